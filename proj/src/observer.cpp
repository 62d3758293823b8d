#include "trail/observer.hpp"

#include <algorithm>

#include "trail/pbft_external.hpp"

namespace trail {

void IdleCoins::add(CoinId c, WalletId w) {
  if (pos_.count(c)) return;
  pos_.emplace(c, coins_.size());
  coins_.emplace_back(c, w);
}

bool IdleCoins::remove(CoinId c) {
  auto it = pos_.find(c);
  if (it == pos_.end()) return false;
  const std::size_t i = it->second;
  pos_.erase(it);
  if (i + 1 != coins_.size()) {
    coins_[i] = coins_.back();
    pos_[coins_[i].first] = i;
  }
  coins_.pop_back();
  return true;
}

std::optional<WalletId> IdleCoins::wallet_of(CoinId c) const {
  auto it = pos_.find(c);
  if (it == pos_.end()) return std::nullopt;
  return coins_[it->second].second;
}

std::pair<CoinId, WalletId> IdleCoins::take_random(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, coins_.size() - 1);
  const auto entry = coins_[pick(rng)];
  remove(entry.first);
  return entry;
}

Observer::Observer(const ProtocolConfig& cfg, const WalletDirectory& wallets)
    : cfg_(cfg),
      wallets_(wallets),
      idle_(wallets.shards()),
      spentFrom_(wallets.shards()),
      locatedCount_(wallets.total(), 0),
      tainted_(wallets.total(), false),
      faulty_(wallets.shards(), false),
      removed_(wallets.shards(), false) {}

void Observer::on_genesis(CoinId coin, WalletId owner) {
  legit_[coin] = owner;
  move_location(coin, owner);
  idle_[owner.shard.value].add(coin, owner);
  ++liveCoins_;
}

bool Observer::on_started(const TxPtr& tx, Round now) {
  auto [it, fresh] = txs_.try_emplace(tx->id);
  if (!fresh) return false;
  TxState& st = it->second;
  st.tx = tx;
  st.started = now;
  st.settlers = PeerSet(cfg_.params.s);
  st.rejecters = PeerSet(cfg_.params.s);
  ++current_.startedTotal;
  if (tx->honest) ++current_.startedHonest;
  if (tx->kind == TxKind::recovery) ++current_.recoveryStarted;
  if (tx->honest && tx->kind != TxKind::internal && tx->kind != TxKind::recovery &&
      cfg_.validation != Validation::off) {
    escalationQueue_.emplace_back(now, tx->id);
  }
  return true;
}

Observer::TxState* Observer::find(const Transaction& tx) {
  auto it = txs_.find(tx.id);
  return it == txs_.end() ? nullptr : &it->second;
}

bool Observer::confirmed(TxId id) const {
  auto it = txs_.find(id);
  return it != txs_.end() && it->second.confirmed;
}

std::uint32_t Observer::reply_threshold(const Transaction& tx) const {
  if (tx.kind == TxKind::internal) return 1;
  if (cfg_.validation == Validation::off && tx.kind == TxKind::external) return 1;
  return cfg_.params.commit_shard_quorum();
}

void Observer::on_internal_commit(PeerId peer, const Transaction& tx, Round now) {
  TxState* st = find(tx);
  if (!st) return;
  ExtProposal p;
  p.tx = st->tx;
  on_client_reply(peer, p, now);
  if (!st->settled && st->settlers.insert(peer.index) &&
      st->settlers.size() >= cfg_.params.peer_quorum()) {
    settle(*st);
  }
}

void Observer::on_client_reply(PeerId peer, const ExtProposal& p, Round now) {
  TxState* st = find(*p.tx);
  if (!st || st->confirmed) return;
  auto it = std::find_if(st->replies.begin(), st->replies.end(),
                         [&](const auto& e) { return e.first == peer.shard; });
  if (it == st->replies.end()) {
    st->replies.emplace_back(peer.shard, PeerSet(cfg_.params.s));
    it = std::prev(st->replies.end());
  }
  if (!it->second.insert(peer.index)) return;
  if (it->second.size() != cfg_.params.peer_quorum()) return;
  if (++st->shardsReplied >= reply_threshold(*st->tx)) confirm(*st, now);
}

void Observer::on_target_accepted(PeerId peer, const ExtProposal& p, Round) {
  TxState* st = find(*p.tx);
  if (!st || st->settled) return;
  if (peer.shard != reply_shard(*st->tx)) return;
  if (st->settlers.insert(peer.index) && st->settlers.size() >= cfg_.params.peer_quorum()) {
    settle(*st);
  }
}

void Observer::on_rejected(PeerId peer, const Transaction& tx, Round now) {
  TxState* st = find(tx);
  if (!st || st->confirmed || st->dropped) return;
  if (st->rejecters.insert(peer.index) && st->rejecters.size() >= cfg_.params.f + 1) {
    on_dropped(tx, now);
  }
}

void Observer::on_dropped(const Transaction& tx, Round) {
  TxState* st = find(tx);
  if (!st || st->confirmed || st->dropped) return;
  st->dropped = true;
  if (!st->tx->honest || st->tx->kind == TxKind::recovery || st->tx->kind == TxKind::mint) return;
  for (CoinId c : st->tx->consumed()) idle_[st->tx->sWallet.shard.value].add(c, st->tx->sWallet);
}

void Observer::move_location(CoinId coin, std::optional<WalletId> to) {
  auto it = location_.find(coin);
  if (it != location_.end()) {
    if (wallets_.contains(it->second)) --locatedCount_[wallets_.flat_index(it->second)];
    location_.erase(it);
  }
  if (to && wallets_.contains(*to)) {
    location_.emplace(coin, *to);
    ++locatedCount_[wallets_.flat_index(*to)];
  }
}

void Observer::confirm(TxState& st, Round now) {
  st.confirmed = true;
  const Transaction& tx = *st.tx;
  ++current_.confirmedTotal;
  if (tx.honest) ++current_.confirmedHonest;
  if (tx.kind == TxKind::internal) {
    ++current_.confirmedInternal;
  } else {
    ++current_.confirmedExternal;
  }
  latencySum_ += static_cast<double>(now - st.started);
  confirmedLog_.push_back(st.tx);
  if (st.dropped) {
    for (CoinId c : tx.consumed()) idle_[tx.sWallet.shard.value].remove(c);
  }

  auto rightful = [&](CoinId c) {
    auto it = legit_.find(c);
    return it != legit_.end() && it->second == tx.sWallet;
  };
  auto taint = [&](WalletId w) {
    if (wallets_.contains(w)) tainted_[wallets_.flat_index(w)] = true;
  };

  if (!tx.honest) {
    const auto consumed = tx.consumed();
    if (!std::all_of(consumed.begin(), consumed.end(), rightful)) ++doubleSpends_;
  }

  switch (tx.kind) {
    case TxKind::internal:
      if (rightful(tx.coin)) {
        legit_[tx.coin] = tx.tWallet;
      } else {
        taint(tx.tWallet);
      }
      break;
    case TxKind::external:
    case TxKind::recovery:
      if (rightful(tx.coin) || tx.kind == TxKind::recovery) {
        legit_[tx.coin] = tx.tWallet;
      } else {
        taint(tx.tWallet);
      }
      move_location(tx.coin, tx.tWallet);
      if (tx.kind == TxKind::external && tx.honest) {
        spentFrom_[tx.sWallet.shard.value].emplace_back(tx.coin, tx.sWallet);
      }
      break;
    case TxKind::mint:
      legit_[tx.coin] = tx.tWallet;
      move_location(tx.coin, tx.tWallet);
      ++minted_;
      ++liveCoins_;
      break;
    case TxKind::split:
    case TxKind::merge: {
      bool ok = true;
      for (CoinId c : tx.consumed()) {
        ok = ok && rightful(c);
        legit_[c] = WalletId::retired();
        move_location(c, std::nullopt);
      }
      for (CoinId c : tx.outputs) {
        legit_[c] = ok ? tx.sWallet : WalletId::retired();
        move_location(c, tx.sWallet);
      }
      if (!ok) taint(tx.sWallet);
      liveCoins_ += tx.outputs.size();
      liveCoins_ -= tx.consumed().size();
      if (tx.kind == TxKind::split) {
        splitExtra_ += tx.outputs.size() - 1;
      } else {
        ++mergesCompleted_;
      }
      break;
    }
  }
}

void Observer::settle(TxState& st) {
  st.settled = true;
  const Transaction& tx = *st.tx;
  if (!tx.honest && tx.kind != TxKind::external) return;
  switch (tx.kind) {
    case TxKind::internal:
    case TxKind::external:
    case TxKind::recovery:
    case TxKind::mint:
      idle_[tx.tWallet.shard.value].add(tx.coin, tx.tWallet);
      break;
    case TxKind::split:
    case TxKind::merge:
      for (CoinId c : tx.outputs) idle_[tx.sWallet.shard.value].add(c, tx.sWallet);
      break;
  }
}

std::optional<WalletId> Observer::rightful_owner(CoinId coin) const {
  auto it = legit_.find(coin);
  if (it == legit_.end()) return std::nullopt;
  return it->second;
}

void Observer::on_shard_faulty(ShardId shard) { faulty_[shard.value] = true; }
void Observer::on_shard_removed(ShardId shard) { removed_[shard.value] = true; }

bool Observer::shard_wallets_compromised(WalletId w) const {
  if (!faulty_[w.shard.value]) return false;
  if (!removed_[w.shard.value]) return true;
  return locatedCount_[wallets_.flat_index(w)] > 0;
}

WalletStatus Observer::status(WalletId w) const {
  if (!wallets_.contains(w)) return WalletStatus::safe;
  if (tainted_[wallets_.flat_index(w)] || shard_wallets_compromised(w)) {
    return WalletStatus::compromised;
  }
  return WalletStatus::safe;
}

std::vector<TxPtr> Observer::take_overdue(Round now, Round timeout) {
  std::vector<TxPtr> out;
  while (escalationHead_ < escalationQueue_.size() &&
         escalationQueue_[escalationHead_].first + timeout <= now) {
    const TxState& st = txs_.at(escalationQueue_[escalationHead_].second);
    if (!st.confirmed && !st.dropped) out.push_back(st.tx);
    ++escalationHead_;
  }
  return out;
}

MetricsFrame Observer::close_round(Round round, const Network& net) {
  MetricsFrame frame = current_;
  frame.round = round;
  frame.meanLatency =
      frame.confirmedTotal ? latencySum_ / static_cast<double>(frame.confirmedTotal) : 0.0;
  std::uint32_t compromised = 0;
  for (std::uint32_t s = 0; s < wallets_.shards(); ++s) {
    for (std::uint32_t i = 0; i < wallets_.wallets_per_shard(); ++i) {
      if (status(WalletId{ShardId{s}, i}) == WalletStatus::compromised) ++compromised;
    }
  }
  frame.compromisedWalletFraction =
      wallets_.total() ? static_cast<double>(compromised) / wallets_.total() : 0.0;
  frame.envelopesSent = net.envelopes_sent() - lastSent_;
  lastSent_ = net.envelopes_sent();
  for (std::size_t k = 0; k < kMessageKinds; ++k) {
    frame.perPhase[k] = net.sent_by_kind()[k] - lastByKind_[k];
  }
  lastByKind_ = net.sent_by_kind();

  totals_.startedHonest += frame.startedHonest;
  totals_.startedTotal += frame.startedTotal;
  totals_.confirmedHonest += frame.confirmedHonest;
  totals_.confirmedTotal += frame.confirmedTotal;
  totals_.confirmedInternal += frame.confirmedInternal;
  totals_.confirmedExternal += frame.confirmedExternal;
  totals_.recoveryStarted += frame.recoveryStarted;
  current_ = MetricsFrame{};
  latencySum_ = 0.0;
  return frame;
}

}  // namespace trail
