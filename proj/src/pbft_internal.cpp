#include "trail/pbft_internal.hpp"

#include <algorithm>

namespace trail {

namespace {

constexpr std::uint64_t kNullDigest = 0x6e756c6c5f726571ull;
// Completed slots younger than this are reported during a view change so a
// lagging peer can catch up on them.
constexpr std::uint64_t kReportWindow = 64;

std::uint64_t digest_of(const TxPtr& tx) { return tx ? tx->digest() : kNullDigest; }

}  // namespace

InternalReplica::InternalReplica(PeerId self, std::uint32_t shardSize, std::uint32_t f,
                                 Round baseTimeout)
    : self_(self), s_(shardSize), f_(f), baseTimeout_(baseTimeout) {}

Round InternalReplica::timeout() const {
  return baseTimeout_ << std::min<std::uint32_t>(consecutiveViewChanges_, 16);
}

void InternalReplica::arm_timer(ProtocolHost& host) {
  timerArmed_ = true;
  timerDeadline_ = host.now() + timeout();
}

bool InternalReplica::coins_free(const Transaction& tx) const {
  const std::uint64_t id = tx.identity();
  for (CoinId c : tx.consumed()) {
    auto it = inFlight_.find(c);
    if (it != inFlight_.end() && it->second != id) return false;
  }
  return true;
}

void InternalReplica::add_pending(const TxPtr& tx, ProtocolHost&) {
  pending_.emplace(tx->identity(), tx);
}

void InternalReplica::submit(const TxPtr& tx, ProtocolHost& host) {
  const std::uint64_t id = tx->identity();
  if (completedIds_.count(id) || pending_.count(id)) return;
  if (!host.admits(*tx)) {
    host.internal_rejected(tx);
    return;
  }
  if (is_leader() && !inViewChange_) {
    on_request(tx, host);
    return;
  }
  add_pending(tx, host);
  if (!inViewChange_ && !timerArmed_) arm_timer(host);
  host.send(leader_of(view_), make_message(MessageKind::request, RequestBody{tx}));
}

void InternalReplica::on_request(const TxPtr& tx, ProtocolHost& host) {
  const std::uint64_t id = tx->identity();
  if (completedIds_.count(id) || slotOf_.count(id)) return;
  if (!pending_.count(id)) {
    if (!host.admits(*tx)) {
      host.internal_rejected(tx);
      return;
    }
    add_pending(tx, host);
  }
  if (!is_leader() || inViewChange_) return;
  if (!coins_free(*tx)) {
    pending_.erase(id);
    host.internal_rejected(tx);
    return;
  }
  propose(tx, host);
}

void InternalReplica::propose(const TxPtr& tx, ProtocolHost& host) {
  propose_at(highestSeq_ + 1, tx, host);
}

void InternalReplica::propose_at(std::uint64_t seq, const TxPtr& tx, ProtocolHost& host) {
  highestSeq_ = std::max(highestSeq_, seq);
  if (tx) {
    const std::uint64_t id = tx->identity();
    slotOf_[id] = seq;
    for (CoinId c : tx->consumed()) inFlight_[c] = id;
  }
  host.send_to_shard(self_.shard, make_message(MessageKind::pre_prepare,
                                               PrePrepareBody{view_, seq, tx, digest_of(tx)}));
}

void InternalReplica::on_message(PeerId from, const MessagePtr& m, ProtocolHost& host) {
  if (from.shard != self_.shard) return;
  switch (m->kind) {
    case MessageKind::request:
      on_request(std::get<RequestBody>(m->body).tx, host);
      break;
    case MessageKind::pre_prepare:
      on_pre_prepare(from, std::get<PrePrepareBody>(m->body), m, host);
      break;
    case MessageKind::prepare:
    case MessageKind::commit:
      on_vote(from, m->kind, std::get<VoteBody>(m->body), host);
      break;
    case MessageKind::view_change:
      on_view_change(from, std::get<ViewChangeBody>(m->body), host);
      break;
    default:
      break;
  }
}

void InternalReplica::on_pre_prepare(PeerId from, const PrePrepareBody& m, const MessagePtr& raw,
                                     ProtocolHost& host) {
  if (m.view < view_) return;
  if (m.view > view_ || inViewChange_) {
    if (m.view > view_) future_.emplace_back(from, raw);
    return;
  }
  if (from != leader_of(m.view)) return;
  if (m.seq <= lastCompleted_ && !slots_.count(m.seq)) return;

  auto [seen, fresh] = firstSeen_.try_emplace({m.seq, m.view}, m.digest);
  if (!fresh) {
    if (seen->second != m.digest) {
      ++evidence_;
      start_view_change(view_ + 1, host);
    }
    return;
  }

  Slot& slot = slots_[m.seq];
  if (slot.committed) {
    // Re-proposal of a slot this peer already decided: vote so laggards can
    // finish it, but never decide it twice.
    if (slot.digest != m.digest) return;
    slot.view = m.view;
    slot.accepted = true;
    slot.prepareSent = false;
    slot.commitSent = false;
  } else {
    if (m.tx && !completedIds_.count(m.tx->identity()) && !host.admits(*m.tx)) return;
    slot = Slot{m.view, m.tx, m.digest, true};
    highestSeq_ = std::max(highestSeq_, m.seq);
    if (m.tx) {
      const std::uint64_t id = m.tx->identity();
      slotOf_[id] = m.seq;
      for (CoinId c : m.tx->consumed()) inFlight_[c] = id;
      if (!pending_.count(id) && !completedIds_.count(id)) {
        pending_.emplace(id, m.tx);
        if (!is_leader() && !timerArmed_) arm_timer(host);
      }
    }
  }
  if (!is_leader()) {
    slot.prepareSent = true;
    host.send_to_shard(self_.shard, make_message(MessageKind::prepare,
                                                 VoteBody{m.view, m.seq, m.digest}));
  }
  advance(m.seq, host);
}

std::uint32_t InternalReplica::votes(MessageKind kind, std::uint64_t view, std::uint64_t seq,
                                     std::uint64_t digest) const {
  auto it = votes_.find(VoteKey{seq, view, static_cast<std::uint8_t>(kind), digest});
  return it == votes_.end() ? 0 : it->second.size();
}

void InternalReplica::on_vote(PeerId from, MessageKind kind, const VoteBody& m,
                              ProtocolHost& host) {
  if (kind == MessageKind::prepare && from == leader_of(m.view)) return;
  if (m.seq + kReportWindow < lastCompleted_) return;
  auto [it, _] = votes_.try_emplace(VoteKey{m.seq, m.view, static_cast<std::uint8_t>(kind), m.digest},
                                    PeerSet(s_));
  if (!it->second.insert(from.index)) return;
  if (m.view == view_) advance(m.seq, host);
}

void InternalReplica::advance(std::uint64_t seq, ProtocolHost& host) {
  auto it = slots_.find(seq);
  if (it == slots_.end() || inViewChange_) return;
  Slot& slot = it->second;
  if (!slot.accepted || slot.view != view_) return;
  if (!slot.commitSent && votes(MessageKind::prepare, view_, seq, slot.digest) >= s_ - f_ - 1) {
    slot.commitSent = true;
    host.send_to_shard(self_.shard, make_message(MessageKind::commit,
                                                 VoteBody{view_, seq, slot.digest}));
  }
  if (slot.commitSent && !slot.committed &&
      votes(MessageKind::commit, view_, seq, slot.digest) >= s_ - f_) {
    slot.committed = true;
    complete_ready(host);
  }
}

void InternalReplica::complete_ready(ProtocolHost& host) {
  bool progressed = false;
  for (;;) {
    auto it = slots_.find(lastCompleted_ + 1);
    if (it == slots_.end() || !it->second.committed || it->second.completed) break;
    Slot& slot = it->second;
    slot.completed = true;
    ++lastCompleted_;
    progressed = true;
    consecutiveViewChanges_ = 0;
    completions_.push_back({it->first, slot.view, slot.digest});
    if (!slot.tx) continue;
    const std::uint64_t id = slot.tx->identity();
    pending_.erase(id);
    completedIds_.insert(id);
    for (CoinId c : slot.tx->consumed()) {
      auto f = inFlight_.find(c);
      if (f != inFlight_.end() && f->second == id) inFlight_.erase(f);
    }
    TxPtr tx = slot.tx;
    host.internal_completed(tx, it->first, slot.view);
    drop_stale_pending(*tx, host);
  }
  if (!progressed) return;
  if (pending_.empty() || is_leader()) {
    timerArmed_ = false;
  } else {
    arm_timer(host);
  }
}

void InternalReplica::drop_stale_pending(const Transaction& done, ProtocolHost& host) {
  const auto spent = done.consumed();
  std::vector<TxPtr> stale;
  for (const auto& [id, tx] : pending_) {
    if (slotOf_.count(id)) continue;
    const auto coins = tx->consumed();
    const bool overlaps = std::any_of(coins.begin(), coins.end(), [&](CoinId c) {
      return std::find(spent.begin(), spent.end(), c) != spent.end();
    });
    if (overlaps && !host.admits(*tx)) stale.push_back(tx);
  }
  for (const TxPtr& tx : stale) {
    pending_.erase(tx->identity());
    host.internal_rejected(tx);
  }
}

void InternalReplica::start_view_change(std::uint64_t target, ProtocolHost& host) {
  if (target <= view_) return;
  if (inViewChange_ && targetView_ >= target) return;
  inViewChange_ = true;
  targetView_ = target;
  timerArmed_ = false;
  const std::uint32_t backoff =
      std::min<std::uint64_t>(consecutiveViewChanges_ + (target - view_), 16);
  viewChangeDeadline_ = host.now() + (baseTimeout_ << backoff);

  ViewChangeBody body{target, lastCompleted_, highestSeq_, {}};
  for (const auto& [seq, slot] : slots_) {
    if (!slot.accepted && !slot.committed) continue;
    if (slot.completed && seq + kReportWindow <= lastCompleted_) continue;
    body.slots.push_back({seq, slot.view, slot.tx, slot.digest, slot.committed});
  }
  host.send_to_shard(self_.shard, make_message(MessageKind::view_change, std::move(body)));
}

void InternalReplica::on_view_change(PeerId from, const ViewChangeBody& m, ProtocolHost& host) {
  if (m.newView <= view_) return;
  auto& bucket = viewChanges_[m.newView];
  bucket[from.index] = m;
  const std::size_t n = bucket.size();
  if (n >= f_ + 1 && (!inViewChange_ || targetView_ < m.newView)) {
    start_view_change(m.newView, host);
  }
  if (n >= s_ - f_) enter_view(m.newView, host);
}

void InternalReplica::enter_view(std::uint64_t v, ProtocolHost& host) {
  std::map<std::uint32_t, ViewChangeBody> reports = std::move(viewChanges_[v]);
  viewChanges_.erase(viewChanges_.begin(), viewChanges_.upper_bound(v));

  std::vector<SlotReport> own;
  for (const auto& [seq, slot] : slots_) {
    if (slot.accepted || slot.committed) {
      own.push_back({seq, slot.view, slot.tx, slot.digest, slot.committed});
    }
  }

  view_ = v;
  inViewChange_ = false;
  ++consecutiveViewChanges_;
  for (auto& [seq, slot] : slots_) {
    if (slot.committed) continue;
    slot.accepted = false;
    slot.prepareSent = false;
    slot.commitSent = false;
  }

  if (is_leader()) {
    std::uint64_t low = lastCompleted_;
    std::uint64_t high = highestSeq_;
    std::map<std::uint64_t, const SlotReport*> best;
    auto consider = [&](const SlotReport& r) {
      auto& b = best[r.seq];
      if (!b || (r.completed && !b->completed) ||
          (r.completed == b->completed && r.view > b->view)) {
        b = &r;
      }
    };
    for (const SlotReport& r : own) consider(r);
    for (const auto& [_, body] : reports) {
      low = std::min(low, body.lastCompleted);
      high = std::max(high, body.highestSeq);
      for (const SlotReport& r : body.slots) consider(r);
    }
    std::unordered_set<std::uint64_t> proposed;
    for (std::uint64_t seq = low + 1; seq <= high; ++seq) {
      auto it = best.find(seq);
      TxPtr tx = it == best.end() ? nullptr : it->second->tx;
      if (tx) proposed.insert(tx->identity());
      propose_at(seq, tx, host);
    }
    std::vector<TxPtr> rest;
    for (const auto& [id, tx] : pending_) {
      if (!proposed.count(id) && !completedIds_.count(id)) rest.push_back(tx);
    }
    std::sort(rest.begin(), rest.end(),
              [](const TxPtr& a, const TxPtr& b) { return a->identity() < b->identity(); });
    for (const TxPtr& tx : rest) {
      if (coins_free(*tx)) {
        propose(tx, host);
      } else {
        pending_.erase(tx->identity());
        host.internal_rejected(tx);
      }
    }
    timerArmed_ = false;
  } else if (!pending_.empty()) {
    arm_timer(host);
  }

  std::vector<std::pair<PeerId, MessagePtr>> replay;
  std::vector<std::pair<PeerId, MessagePtr>> keep;
  for (auto& entry : future_) {
    const auto& pp = std::get<PrePrepareBody>(entry.second->body);
    if (pp.view == v) {
      replay.push_back(std::move(entry));
    } else if (pp.view > v) {
      keep.push_back(std::move(entry));
    }
  }
  future_ = std::move(keep);
  for (auto& [from, msg] : replay) on_message(from, msg, host);
}

void InternalReplica::prune() {
  if (lastCompleted_ <= 2 * kReportWindow) return;
  const std::uint64_t floor = lastCompleted_ - 2 * kReportWindow;
  votes_.erase(votes_.begin(), votes_.lower_bound(VoteKey{floor, 0, 0, 0}));
  firstSeen_.erase(firstSeen_.begin(), firstSeen_.lower_bound({floor, 0}));
  slots_.erase(slots_.begin(), slots_.lower_bound(floor));
}

void InternalReplica::tick(ProtocolHost& host) {
  const Round now = host.now();
  if (inViewChange_) {
    if (now >= viewChangeDeadline_) start_view_change(targetView_ + 1, host);
  } else if (timerArmed_ && now >= timerDeadline_) {
    if (is_leader()) {
      timerArmed_ = false;
    } else {
      start_view_change(view_ + 1, host);
    }
  }
  if ((now & 63) == 0) prune();
}

}  // namespace trail
