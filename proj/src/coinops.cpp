#include "trail/coinops.hpp"

#include <algorithm>

#include "trail/peer.hpp"
#include "trail/simulation.hpp"

namespace trail {

Trail random_committee(ShardId first, std::uint32_t t, std::uint32_t S, std::mt19937_64& rng) {
  if (t > S) throw ConfigurationError("committee larger than the shard count");
  std::vector<ShardId> others;
  for (std::uint32_t s = 0; s < S; ++s) {
    if (s != first.value) others.push_back(ShardId{s});
  }
  std::shuffle(others.begin(), others.end(), rng);
  Trail committee;
  committee.shards.push_back(first);
  committee.shards.insert(committee.shards.end(), others.begin(), others.begin() + (t - 1));
  return committee;
}

Transaction make_transfer(CoinId coin, WalletId from, WalletId to) {
  Transaction tx;
  tx.kind = from.shard == to.shard ? TxKind::internal : TxKind::external;
  tx.coin = coin;
  tx.sWallet = from;
  tx.tWallet = to;
  return tx;
}

Transaction make_split(CoinId coin, WalletId owner, std::vector<CoinId> children) {
  Transaction tx;
  tx.kind = TxKind::split;
  tx.coin = coin;
  tx.sWallet = owner;
  tx.tWallet = WalletId::retired();
  tx.outputs = std::move(children);
  return tx;
}

Transaction make_merge(CoinId a, CoinId b, WalletId owner, CoinId merged) {
  Transaction tx;
  tx.kind = TxKind::merge;
  tx.coin = a;
  tx.partner = b;
  tx.sWallet = owner;
  tx.tWallet = WalletId::retired();
  tx.outputs = {merged};
  return tx;
}

Transaction make_mint(CoinId coin, WalletId owner, Trail committee) {
  Transaction tx;
  tx.kind = TxKind::mint;
  tx.coin = coin;
  tx.sWallet = WalletId::none();
  tx.tWallet = owner;
  tx.committee = std::move(committee);
  return tx;
}

std::vector<LedgerRecord> bootstrap_genesis(Simulation& sim) {
  const Params& p = sim.params();
  std::vector<LedgerRecord> births;
  auto& rng = sim.rng(RngStream::bootstrap);
  for (std::uint32_t s = 0; s < p.S; ++s) {
    for (std::uint32_t w = 0; w < sim.config().walletsPerShard; ++w) {
      const WalletId owner{ShardId{s}, w};
      for (std::uint32_t k = 0; k < sim.config().coinsPerWallet; ++k) {
        const CoinId coin = sim.allocate_coin();
        Trail committee = random_committee(ShardId{s}, p.t, p.S, rng);
        births.push_back(LedgerRecord{coin, WalletId::none(), owner, 0, std::move(committee), 0});
        sim.install_record(births.back().trail, births.back());
        sim.observer().on_genesis(coin, owner);
      }
    }
  }
  return births;
}

std::optional<std::size_t> MergeTracker::begin(Simulation& sim, CoinId a, CoinId b) {
  if (a == b) return std::nullopt;
  for (const MergeState& m : merges_) {
    if (m.active() && (m.first == a || m.first == b || m.second == a || m.second == b)) {
      return std::nullopt;
    }
  }
  for (ShardId s : sim.correct_shards()) {
    IdleCoins& idle = sim.observer().idle(s);
    auto wa = idle.wallet_of(a);
    auto wb = idle.wallet_of(b);
    if (!wa || !wb || *wa != *wb) continue;
    idle.remove(a);
    idle.remove(b);
    MergeState m;
    m.first = a;
    m.second = b;
    m.wallet = *wa;
    m.required = sim.params().t;
    merges_.push_back(m);
    return merges_.size() - 1;
  }
  return std::nullopt;
}

void MergeTracker::launch_hop(Simulation& sim, MergeState& m) {
  std::uint32_t reader = 0;
  while (reader + 1 < sim.params().s && !sim.peer_correct(PeerId{m.wallet.shard, reader})) ++reader;
  const Ledger& ledger = sim.peer(PeerId{m.wallet.shard, reader}).ledger();
  if (!ledger.knows(m.first) || !ledger.knows(m.second)) {
    m.aborted = true;
    return;
  }
  const Trail ta = ledger.get_trail(m.first);
  const Trail tb = ledger.get_trail(m.second);
  std::vector<ShardId> candidates;
  for (ShardId s : sim.correct_shards()) {
    if (!ta.contains(s) && !tb.contains(s)) candidates.push_back(s);
  }
  if (candidates.empty()) {
    m.aborted = true;
    return;
  }
  auto& rng = sim.rng(RngStream::workload);
  std::uniform_int_distribution<std::size_t> shardPick(0, candidates.size() - 1);
  std::uniform_int_distribution<std::uint32_t> walletPick(0, sim.wallets().wallets_per_shard() - 1);
  const WalletId target{candidates[shardPick(rng)], walletPick(rng)};
  m.hopA = sim.submit(make_transfer(m.first, m.wallet, target))->id;
  m.hopB = sim.submit(make_transfer(m.second, m.wallet, target))->id;
  m.wallet = target;
}

void MergeTracker::scan_confirmations(Simulation& sim) {
  const auto& log = sim.observer().confirmations();
  for (; confirmationsSeen_ < log.size(); ++confirmationsSeen_) {
    const Transaction& tx = *log[confirmationsSeen_];
    for (MergeState& m : merges_) {
      if (!m.active()) continue;
      if (tx.id == m.hopA || tx.id == m.hopB || tx.id == m.finalTx) continue;
      const auto consumed = tx.consumed();
      const bool touches = std::find(consumed.begin(), consumed.end(), m.first) != consumed.end() ||
                           std::find(consumed.begin(), consumed.end(), m.second) != consumed.end();
      if (!touches) continue;
      m.aborted = true;
      // The coin that was not spent goes back to independent use.
      if (!m.hopA && !m.finalTx) {
        for (CoinId c : {m.first, m.second}) {
          if (std::find(consumed.begin(), consumed.end(), c) == consumed.end()) {
            sim.observer().idle(m.wallet.shard).add(c, m.wallet);
          }
        }
      }
    }
  }
}

void MergeTracker::drive(Simulation& sim) {
  scan_confirmations(sim);
  Observer& obs = sim.observer();
  for (MergeState& m : merges_) {
    if (!m.active()) continue;
    if (m.finalTx) {
      if (obs.confirmed(*m.finalTx)) m.merged = m.output;
      continue;
    }
    if (m.hopA) {
      IdleCoins& idle = obs.idle(m.wallet.shard);
      if (!idle.contains(m.first) || !idle.contains(m.second)) continue;
      idle.remove(m.first);
      idle.remove(m.second);
      m.hopA.reset();
      m.hopB.reset();
      ++m.jointHops;
    }
    if (m.jointHops < m.required) {
      launch_hop(sim, m);
      continue;
    }
    const CoinId merged = sim.allocate_coin();
    m.output = merged;
    m.finalTx = sim.submit(make_merge(m.first, m.second, m.wallet, merged))->id;
  }
}

CoinEventScheduler::CoinEventScheduler(std::vector<CoinEvent> events, std::uint64_t seed)
    : events_(std::move(events)), rng_(seed) {
  std::stable_sort(events_.begin(), events_.end(),
                   [](const CoinEvent& a, const CoinEvent& b) { return a.round < b.round; });
}

void CoinEventScheduler::act(Simulation& sim) {
  for (const CoinEvent& ev : events_) {
    if (ev.round != sim.now()) continue;
    std::vector<ShardId> shards;
    if (ev.shard) {
      shards.push_back(*ev.shard);
    } else {
      shards = sim.correct_shards();
      std::shuffle(shards.begin(), shards.end(), rng_);
    }
    for (ShardId s : shards) {
      IdleCoins& idle = sim.observer().idle(s);
      bool done = false;
      switch (ev.kind) {
        case TxKind::split: {
          if (idle.empty()) break;
          const auto [coin, wallet] = idle.take_random(rng_);
          std::vector<CoinId> children;
          for (std::uint32_t k = 0; k < std::max<std::uint32_t>(ev.parts, 2); ++k) {
            children.push_back(sim.allocate_coin());
          }
          sim.submit(make_split(coin, wallet, std::move(children)));
          done = true;
          break;
        }
        case TxKind::merge: {
          const auto& entries = idle.entries();
          for (std::size_t i = 0; i < entries.size() && !done; ++i) {
            for (std::size_t j = i + 1; j < entries.size() && !done; ++j) {
              if (entries[i].second != entries[j].second) continue;
              const CoinId a = entries[i].first;
              const CoinId b = entries[j].first;
              done = merges_.begin(sim, a, b).has_value();
            }
          }
          break;
        }
        case TxKind::mint: {
          std::uniform_int_distribution<std::uint32_t> walletPick(0, sim.wallets().wallets_per_shard() - 1);
          const WalletId owner{s, walletPick(rng_)};
          Trail committee = random_committee(s, sim.params().t, sim.params().S, rng_);
          sim.submit(make_mint(sim.allocate_coin(), owner, std::move(committee)));
          done = true;
          break;
        }
        default:
          break;
      }
      if (done) {
        ++issued_;
        break;
      }
    }
  }
  merges_.drive(sim);
}

}  // namespace trail
