#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "trail/coinops.hpp"
#include "trail/peer.hpp"
#include "trail/simulation.hpp"
#include "trail/workload.hpp"

using namespace trail;

namespace {

SimulationConfig base(std::uint64_t seed = 2) {
  SimulationConfig c;
  c.protocol.params = Params{1, 1, 4, 4, 10};
  c.walletsPerShard = 3;
  c.coinsPerWallet = 2;
  c.seed = seed;
  return c;
}

std::uint64_t live_from_ledger(const std::vector<LedgerRecord>& merged) {
  std::map<CoinId, WalletId> last;
  for (const LedgerRecord& r : merged) last[r.coin] = r.tWallet;
  std::uint64_t n = 0;
  for (const auto& [coin, w] : last) n += w == WalletId::retired() ? 0 : 1;
  return n;
}

}  // namespace

TEST_CASE("random committee is led by its first shard and has distinct members") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const ShardId first{static_cast<std::uint32_t>(i % 10)};
    const Trail c = random_committee(first, 4, 10, rng);
    REQUIRE(c.size() == 4);
    CHECK(c.shards.front() == first);
    std::set<ShardId> distinct(c.shards.begin(), c.shards.end());
    CHECK(distinct.size() == 4);
  }
}

TEST_CASE("genesis gives every wallet its coins on a committee led by its shard") {
  Simulation sim(base());
  const auto births = bootstrap_genesis(sim);
  CHECK(births.size() == 10 * 3 * 2);
  std::map<WalletId, int> perWallet;
  for (const LedgerRecord& r : births) {
    CHECK(r.sWallet == WalletId::none());
    CHECK(r.trail.shards.front() == r.tWallet.shard);
    ++perWallet[r.tWallet];
    for (ShardId s : r.trail.shards) {
      for (std::uint32_t i = 0; i < 4; ++i) {
        CHECK(sim.peer(PeerId{s, i}).ledger().is_present(r.coin, r.tWallet));
      }
    }
  }
  CHECK(perWallet.size() == 30);
  for (const auto& [w, n] : perWallet) CHECK(n == 2);
  CHECK(sim.observer().live_coins() == 60);
}

TEST_CASE("split, merge and mint run through consensus and keep coins conserved") {
  Simulation sim(base(5));
  bootstrap_genesis(sim);
  CoinEventScheduler events({{2, TxKind::split, 3, ShardId{1}},
                             {4, TxKind::merge, 2, ShardId{2}},
                             {6, TxKind::mint, 2, ShardId{3}}},
                            9);
  sim.add_round_hook([&](Simulation& s) { events.act(s); });
  sim.run(250);
  CHECK(events.issued() == 3);
  const Observer& o = sim.observer();
  CHECK(o.minted() == 1);
  CHECK(o.split_extra() == 2);
  REQUIRE(events.merges().merges().size() == 1);
  const MergeState& m = events.merges().merges().front();
  CHECK(m.done());
  CHECK(m.jointHops == 4);
  CHECK(o.merges_completed() == 1);
  CHECK(o.live_coins() == 60 + 1 + 2 - 1);

  const auto merged = merge_ledgers(sim.correct_ledgers());
  CHECK_FALSE(check_ownership_continuity(merged).has_value());
  CHECK(live_from_ledger(merged) == o.live_coins());
  // Both inputs of the merge are retired and the output exists.
  std::map<CoinId, WalletId> last;
  for (const LedgerRecord& r : merged) last[r.coin] = r.tWallet;
  CHECK(last[m.first] == WalletId::retired());
  CHECK(last[m.second] == WalletId::retired());
  CHECK(last[*m.merged] == m.wallet);
}

TEST_CASE("spending a merge input on its own aborts the merge") {
  Simulation sim(base(6));
  bootstrap_genesis(sim);
  // Find two coins in one wallet and start a merge by hand.
  IdleCoins& idle = sim.observer().idle(ShardId{0});
  const auto entries = idle.entries();
  std::optional<std::pair<CoinId, CoinId>> pair;
  WalletId wallet;
  for (std::size_t i = 0; i < entries.size() && !pair; ++i) {
    for (std::size_t j = i + 1; j < entries.size() && !pair; ++j) {
      if (entries[i].second == entries[j].second) {
        pair = std::make_pair(entries[i].first, entries[j].first);
        wallet = entries[i].second;
      }
    }
  }
  REQUIRE(pair);
  MergeTracker tracker;
  REQUIRE(tracker.begin(sim, pair->first, pair->second).has_value());
  // Before any hop launches, spend the first coin directly.
  idle.remove(pair->first);
  sim.submit(make_transfer(pair->first, wallet, WalletId{wallet.shard, (wallet.index + 1) % 3}));
  sim.add_round_hook([&](Simulation& s) { tracker.drive(s); });
  sim.run(120);
  CHECK(tracker.merges().front().aborted);
  CHECK(sim.observer().merges_completed() == 0);
  CHECK_FALSE(check_ownership_continuity(merge_ledgers(sim.correct_ledgers())).has_value());
}

TEST_CASE("workload cross-shard fraction matches its setting") {
  std::mt19937_64 rng(3);
  std::vector<ShardId> shards;
  for (std::uint32_t s = 0; s < 10; ++s) shards.push_back(ShardId{s});
  int cross = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const WalletId src{{static_cast<std::uint32_t>(i % 10)}, static_cast<std::uint32_t>(i % 5)};
    const WalletId to = draw_target(src, 0.25, shards, 5, rng);
    CHECK(to != src);
    cross += to.shard != src.shard;
  }
  CHECK(static_cast<double>(cross) / n == doctest::Approx(0.25).epsilon(0.08));  // within 0.02

  // The simulated workload shows the same mix among started transfers.
  SimulationConfig c = base(8);
  c.walletsPerShard = 10;
  c.coinsPerWallet = 5;
  Simulation sim(c);
  bootstrap_genesis(sim);
  WorkloadGenerator wl(WorkloadSpec{0.25, 1, std::nullopt});
  sim.add_round_hook([&](Simulation& s) { wl.act(s); });
  sim.run(150);
  std::uint64_t external = 0, total = 0;
  for (const TxPtr& tx : sim.observer().confirmations()) {
    ++total;
    external += tx->kind == TxKind::external;
  }
  REQUIRE(total > 1000);
  CHECK(std::abs(static_cast<double>(external) / total - 0.25) <= 0.02);
}

TEST_CASE("same seed, same run; different seed, different run") {
  auto run = [](std::uint64_t seed) {
    Simulation sim(base(seed));
    bootstrap_genesis(sim);
    WorkloadGenerator wl(WorkloadSpec{0.5, 1, std::nullopt});
    sim.add_round_hook([&](Simulation& s) { wl.act(s); });
    std::vector<std::uint64_t> trace;
    for (const MetricsFrame& f : sim.run(60)) {
      trace.push_back(f.confirmedTotal);
      trace.push_back(f.envelopesSent);
    }
    for (const LedgerRecord& r : merge_ledgers(sim.correct_ledgers())) trace.push_back(r.tuple_hash());
    return trace;
  };
  CHECK(run(4) == run(4));
  CHECK(run(4) != run(5));
}

TEST_CASE("scripted workload replays each coin's transfers in order") {
  Simulation sim(base(3));
  const auto births = bootstrap_genesis(sim);
  std::vector<std::pair<CoinId, WalletId>> owners;
  for (const LedgerRecord& r : births) owners.emplace_back(r.coin, r.tWallet);
  std::mt19937_64 rng(1);
  const auto script = make_script(owners, 60, 0.5, 10, 3, rng);
  // Each scripted move starts where the previous one of its coin ended.
  std::map<CoinId, WalletId> at(owners.begin(), owners.end());
  for (const ScriptedTransfer& st : script) {
    CHECK(at[st.coin] == st.from);
    at[st.coin] = st.to;
  }
  ScriptedWorkload driver(script);
  sim.add_round_hook([&](Simulation& s) { driver.act(s); });
  sim.run(300);
  CHECK(driver.finished());
  CHECK(sim.observer().total_confirmed() == script.size());
}
