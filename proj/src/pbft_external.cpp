#include "trail/pbft_external.hpp"

#include <algorithm>
#include <optional>

namespace trail {

void ExtProposal::seal() {
  std::uint64_t h = hash_combine(tx->digest(), seq);
  h = hash_combine(h, view);
  h = hash_combine(h, leader.value);
  for (const LedgerRecord& r : history) h = hash_combine(h, r.tuple_hash());
  digest = h;
}

namespace {

std::uint64_t trail_hash(std::uint64_t seed, const Trail& t) {
  for (ShardId s : t.shards) seed = hash_combine(seed, s.value);
  return seed;
}

std::vector<CoinId> lock_keys(const Transaction& tx) {
  if (tx.kind == TxKind::mint) return {tx.coin};
  return tx.consumed();
}

bool chain_reaches(const Ledger& ledger, CoinId coin, WalletId sWallet,
                   const std::vector<LedgerRecord>& history) {
  const LedgerRecord* first = nullptr;
  const LedgerRecord* prev = nullptr;
  for (const LedgerRecord& r : history) {
    if (r.coin != coin) continue;
    if (r.sWallet.is_sentinel() || r.tWallet.is_sentinel()) return false;
    if (r.sWallet.shard != sWallet.shard || r.tWallet.shard != sWallet.shard) return false;
    if (prev && prev->tWallet != r.sWallet) return false;
    if (!first) first = &r;
    prev = &r;
  }
  if (!first) return ledger.is_present(coin, sWallet);
  return prev->tWallet == sWallet && ledger.is_present(coin, first->sWallet);
}

}  // namespace

bool proposal_valid(const Ledger& ledger, const Transaction& tx,
                    const std::vector<LedgerRecord>& history, const ProtocolHost& host) {
  const std::uint32_t t = host.config().params.t;
  auto fresh_outputs = [&] {
    if (tx.outputs.empty()) return false;
    for (CoinId c : tx.outputs) {
      if (ledger.knows(c)) return false;
    }
    return true;
  };
  switch (tx.kind) {
    case TxKind::mint: {
      if (tx.committee.size() != t || ledger.knows(tx.coin)) return false;
      if (!host.known_wallet(tx.tWallet) || tx.committee.shards[0] != tx.tWallet.shard) {
        return false;
      }
      std::vector<ShardId> sorted = tx.committee.shards;
      std::sort(sorted.begin(), sorted.end());
      return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    }
    case TxKind::external:
    case TxKind::recovery:
      return host.known_wallet(tx.sWallet) && host.known_wallet(tx.tWallet) &&
             tx.sWallet != tx.tWallet && chain_reaches(ledger, tx.coin, tx.sWallet, history);
    case TxKind::split:
      return tx.outputs.size() >= 2 && fresh_outputs() && host.known_wallet(tx.sWallet) &&
             chain_reaches(ledger, tx.coin, tx.sWallet, history);
    case TxKind::merge:
      if (!tx.partner || tx.outputs.size() != 1 || !fresh_outputs()) return false;
      if (!host.known_wallet(tx.sWallet)) return false;
      if (!chain_reaches(ledger, tx.coin, tx.sWallet, history) ||
          !chain_reaches(ledger, *tx.partner, tx.sWallet, history)) {
        return false;
      }
      return ledger.get_trail(tx.coin) == ledger.get_trail(*tx.partner);
    case TxKind::internal:
      return false;
  }
  return false;
}

Trail next_trail(const Transaction& tx, const Trail& current, std::uint32_t t) {
  switch (tx.kind) {
    case TxKind::external:
    case TxKind::recovery:
    case TxKind::internal:
      return advance_trail(current, tx.tWallet.shard, t);
    case TxKind::mint:
      return tx.committee;
    case TxKind::split:
    case TxKind::merge:
      return current;
  }
  return current;
}

ShardId reply_shard(const Transaction& tx) {
  switch (tx.kind) {
    case TxKind::split:
    case TxKind::merge:
      return tx.sWallet.shard;
    default:
      return tx.tWallet.shard;
  }
}

ShardId ExternalParticipant::origin_shard(const Transaction& tx) const {
  return tx.kind == TxKind::mint ? tx.tWallet.shard : tx.sWallet.shard;
}

std::optional<Trail> ExternalParticipant::local_trail(const Transaction& tx,
                                                      ProtocolHost& host) const {
  if (tx.kind == TxKind::mint) return tx.committee;
  const LedgerRecord* r = host.ledger().latest(tx.coin);
  if (!r) return std::nullopt;
  return r->trail;
}

void ExternalParticipant::broadcast_to_trail(const Trail& trail, const MessagePtr& m,
                                             ProtocolHost& host) {
  for (ShardId s : trail.shards) {
    if (!host.shard_removed(s)) host.send_to_shard(s, m);
  }
}

void ExternalParticipant::start_phase1(const TxPtr& tx, std::uint64_t seq, ProtocolHost& host) {
  auto trail = local_trail(*tx, host);
  if (!trail) return;
  auto proposal = std::make_shared<ExtProposal>();
  proposal->tx = tx;
  proposal->seq = seq;
  proposal->view = tx->externalView;
  proposal->leader = self_.shard;
  if (tx->externalView == 0) {
    for (CoinId c : tx->consumed()) {
      auto moves = host.ledger().trailing_internal_moves(c);
      proposal->history.insert(proposal->history.end(), moves.begin(), moves.end());
    }
  }
  proposal->seal();
  const std::uint64_t id = tx->identity();
  for (CoinId c : lock_keys(*tx)) locks_.try_emplace(c, Lock{id, proposal->digest});
  broadcast_to_trail(*trail,
                     make_message(MessageKind::x_pre_prepare, ExtPhaseBody{std::move(proposal)}),
                     host);
}

void ExternalParticipant::confirm_unvalidated(const TxPtr& tx, std::uint64_t seq,
                                              ProtocolHost& host) {
  auto proposal = std::make_shared<ExtProposal>();
  proposal->tx = tx;
  proposal->seq = seq;
  proposal->leader = self_.shard;
  proposal->seal();
  const Trail current = local_trail(*tx, host).value_or(Trail{});
  Trail newTrail = next_trail(*tx, current, host.config().params.t);
  ProposalPtr p = proposal;
  apply(p, newTrail, false, host);
  ExtReplyBody reply{p, newTrail, Trail{{self_.shard}}, trail_hash(p->digest, newTrail)};
  const ShardId target = reply_shard(*tx);
  if (!host.shard_removed(target)) {
    host.send_to_shard(target, make_message(MessageKind::x_reply, std::move(reply)));
  }
  host.client_reply(*p, newTrail);
}

ExternalParticipant::Instance* ExternalParticipant::instance_for(const ProposalPtr& p,
                                                                 ProtocolHost& host) {
  auto it = instances_.find(p->digest);
  if (it != instances_.end()) return &it->second;
  if (ignored_.count(p->digest)) return nullptr;

  auto trail = local_trail(*p->tx, host);
  const ShardId origin = origin_shard(*p->tx);
  if (!trail || !trail->contains(self_.shard) || p->leader != external_leader(*trail, origin, p->view)) {
    ignored_.insert(p->digest);
    return nullptr;
  }
  const Params& prm = host.config().params;
  Instance inst;
  inst.proposal = p;
  inst.trail = std::move(*trail);
  inst.leader = p->leader;
  inst.identity = p->tx->identity();
  inst.preprepare = QuorumCollector(p->leader, prm.peer_quorum(), prm.s);
  inst.prepares = ShardQuorum(prm.peer_quorum(), prm.s);
  inst.commits = ShardQuorum(prm.peer_quorum(), prm.s);
  return &instances_.emplace(p->digest, std::move(inst)).first->second;
}

void ExternalParticipant::on_message(PeerId from, const MessagePtr& m, ProtocolHost& host) {
  switch (m->kind) {
    case MessageKind::x_pre_prepare:
      on_pre_prepare(from, std::get<ExtPhaseBody>(m->body).proposal, host);
      break;
    case MessageKind::x_prepare:
      on_prepare(from, std::get<ExtPhaseBody>(m->body).proposal, host);
      break;
    case MessageKind::x_commit:
      on_commit(from, std::get<ExtPhaseBody>(m->body).proposal, host);
      break;
    case MessageKind::x_reply:
      on_reply(from, std::get<ExtReplyBody>(m->body), host);
      break;
    case MessageKind::x_view_change:
      on_view_change(from, std::get<ExtViewChangeBody>(m->body), host);
      break;
    case MessageKind::x_reject:
      on_reject(from, std::get<ExtRejectBody>(m->body), host);
      break;
    case MessageKind::x_recorded:
      on_recorded(from, std::get<ExtReplyBody>(m->body), host);
      break;
    default:
      break;
  }
}

void ExternalParticipant::on_pre_prepare(PeerId from, const ProposalPtr& p, ProtocolHost& host) {
  Instance* inst = instance_for(p, host);
  if (!inst || from.shard != inst->leader) return;
  if (inst->preprepare.add(from) != CollectResult::fired) return;
  if (self_.shard != inst->leader) try_prepare(*inst, host);
  if (host.config().params.prepare_shard_quorum() == 0) maybe_commit(*inst, host);
}

void ExternalParticipant::try_prepare(Instance& inst, ProtocolHost& host) {
  if (inst.prepareSent || inst.done || recorded_.count(inst.identity)) return;
  const Transaction& tx = *inst.proposal->tx;
  const bool colluding = host.colluding_with(inst.leader);
  if (!colluding) {
    if (!proposal_valid(host.ledger(), tx, inst.proposal->history, host)) return;
    for (CoinId c : lock_keys(tx)) {
      auto it = locks_.find(c);
      if (it == locks_.end()) continue;
      if (it->second.identity != inst.identity) {
        auto& w = waiting_[c];
        if (std::find(w.begin(), w.end(), inst.proposal->digest) == w.end()) {
          w.push_back(inst.proposal->digest);
        }
        return;
      }
      if (it->second.digest != inst.proposal->digest) return;
    }
    if (prepared_.count(inst.identity)) return;
    for (CoinId c : lock_keys(tx)) locks_.try_emplace(c, Lock{inst.identity, inst.proposal->digest});
    prepared_.insert(inst.identity);
  }
  inst.prepareSent = true;
  broadcast_to_trail(inst.trail, make_message(MessageKind::x_prepare, ExtPhaseBody{inst.proposal}),
                     host);
}

void ExternalParticipant::on_prepare(PeerId from, const ProposalPtr& p, ProtocolHost& host) {
  Instance* inst = instance_for(p, host);
  if (!inst || from.shard == inst->leader || !inst->trail.contains(from.shard)) return;
  if (!inst->prepares.add(from)) return;
  if (inst->prepares.shards_fired() >= host.config().params.prepare_shard_quorum()) {
    maybe_commit(*inst, host);
  }
}

void ExternalParticipant::maybe_commit(Instance& inst, ProtocolHost& host) {
  if (inst.commitSent || inst.done) return;
  auto [it, fresh] = committedTo_.try_emplace(inst.identity, inst.proposal->digest);
  if (!fresh && it->second != inst.proposal->digest) return;
  inst.commitSent = true;
  broadcast_to_trail(inst.trail, make_message(MessageKind::x_commit, ExtPhaseBody{inst.proposal}),
                     host);
}

void ExternalParticipant::on_commit(PeerId from, const ProposalPtr& p, ProtocolHost& host) {
  Instance* inst = instance_for(p, host);
  if (!inst || !inst->trail.contains(from.shard)) return;
  if (!inst->commits.add(from)) return;
  if (inst->commits.shards_fired() >= host.config().params.commit_shard_quorum()) {
    finalize(*inst, host);
  }
}

bool ExternalParticipant::apply(const ProposalPtr& p, const Trail& newTrail, bool withHistory,
                                ProtocolHost& host) {
  const std::uint64_t id = p->tx->identity();
  if (recorded_.count(id)) return false;
  recorded_.emplace(id, RecordedInfo{p, newTrail});
  Ledger& ledger = host.ledger();
  const Round now = host.now();
  if (withHistory) {
    for (LedgerRecord r : p->history) {
      r.round = now;
      ledger.record_once(r);
    }
  }
  for (const LedgerRecord& r : transaction_records(*p->tx, p->seq, newTrail, now)) {
    ledger.record_once(r);
  }
  pending_.erase(id);
  release(id, host);
  maybe_recover(p->tx->coin, host);
  return true;
}

void ExternalParticipant::release(std::uint64_t identity, ProtocolHost& host) {
  std::vector<std::uint64_t> wake;
  for (auto it = locks_.begin(); it != locks_.end();) {
    if (it->second.identity == identity) {
      auto w = waiting_.find(it->first);
      if (w != waiting_.end()) {
        wake.insert(wake.end(), w->second.begin(), w->second.end());
        waiting_.erase(w);
      }
      it = locks_.erase(it);
    } else {
      ++it;
    }
  }
  for (std::uint64_t digest : wake) {
    auto it = instances_.find(digest);
    if (it != instances_.end()) try_prepare(it->second, host);
  }
}

void ExternalParticipant::finalize(Instance& inst, ProtocolHost& host) {
  if (inst.done) return;
  inst.done = true;
  const Trail newTrail = next_trail(*inst.proposal->tx, inst.trail, host.config().params.t);
  if (!apply(inst.proposal, newTrail, true, host)) return;
  const ShardId target = reply_shard(*inst.proposal->tx);
  if (!host.shard_removed(target)) {
    host.send_to_shard(target, make_message(MessageKind::x_reply,
                                            ExtReplyBody{inst.proposal, newTrail, inst.trail,
                                                         trail_hash(inst.proposal->digest, newTrail)}));
  }
  host.client_reply(*inst.proposal, newTrail);
}

void ExternalParticipant::on_reply(PeerId from, const ExtReplyBody& r, ProtocolHost& host) {
  if (accepted_.count(r.digest)) return;
  const Transaction& tx = *r.proposal->tx;
  if (reply_shard(tx) != self_.shard || !r.voters.contains(from.shard)) return;
  const ProtocolConfig& cfg = host.config();
  std::uint32_t needed = cfg.params.commit_shard_quorum();
  if (cfg.validation == Validation::off && tx.kind == TxKind::external) {
    if (from.shard != origin_shard(tx)) return;
    needed = 1;
  }
  auto [it, _] = replies_.try_emplace(r.digest, ShardQuorum(cfg.params.peer_quorum(), cfg.params.s));
  if (!it->second.add(from) || it->second.shards_fired() < needed) return;
  accepted_.insert(r.digest);
  replies_.erase(it);
  apply(r.proposal, r.newTrail, false, host);
  host.target_accepted(*r.proposal, r.newTrail);
}

void ExternalParticipant::on_client_escalation(const TxPtr& tx, ProtocolHost& host) {
  auto trail = local_trail(*tx, host);
  if (!trail || !trail->contains(self_.shard)) return;
  track(tx, 0, host);
}

ExternalParticipant::Pending* ExternalParticipant::track(const TxPtr& tx, std::uint64_t view,
                                                         ProtocolHost& host) {
  const std::uint64_t id = tx->identity();
  if (recorded_.count(id)) return nullptr;
  auto [it, fresh] = pending_.try_emplace(id);
  if (fresh) {
    it->second.tx = tx;
    it->second.view = view;
    it->second.deadline = host.now() + host.config().externalTimeout;
  }
  return &it->second;
}

void ExternalParticipant::send_view_change(Pending& p, std::uint64_t view, ProtocolHost& host) {
  if (p.sentView >= view) return;
  auto trail = local_trail(*p.tx, host);
  if (!trail) return;
  p.sentView = view;
  broadcast_to_trail(*trail, make_message(MessageKind::x_view_change, ExtViewChangeBody{p.tx, view}),
                     host);
}

void ExternalParticipant::lead(const TxPtr& tx, std::uint64_t view, ProtocolHost& host) {
  auto next = std::make_shared<Transaction>(*tx);
  next->externalView = view;
  for (CoinId c : lock_keys(*next)) {
    if (locks_.count(c)) {
      deferred_.emplace_back(next, view);
      return;
    }
  }
  host.start_internal(next);
}

void ExternalParticipant::on_view_change(PeerId from, const ExtViewChangeBody& v,
                                         ProtocolHost& host) {
  const std::uint64_t id = v.tx->identity();
  if (auto rec = recorded_.find(id); rec != recorded_.end()) {
    host.send(from, make_message(MessageKind::x_recorded,
                                 ExtReplyBody{rec->second.proposal, rec->second.newTrail, Trail{},
                                              trail_hash(rec->second.proposal->digest,
                                                         rec->second.newTrail)}));
    return;
  }
  auto trail = local_trail(*v.tx, host);
  if (!trail || !trail->contains(from.shard) || !trail->contains(self_.shard)) return;
  Pending* p = track(v.tx, 0, host);
  if (!p || v.newView <= p->view) return;
  const Params& prm = host.config().params;
  auto [q, _] = p->viewVotes.try_emplace(v.newView, ShardQuorum(prm.peer_quorum(), prm.s));
  if (!q->second.add(from)) return;
  const std::uint32_t shards = q->second.shards_fired();
  if (shards >= prm.F + 1 && !prepared_.count(id)) send_view_change(*p, v.newView, host);
  if (shards < prm.commit_shard_quorum()) return;

  p->view = v.newView;
  p->deadline = host.now() + (host.config().externalTimeout << std::min<std::uint32_t>(++p->backoff, 16));
  const ShardId leader = external_leader(*trail, origin_shard(*v.tx), v.newView);
  if (leader == self_.shard) lead(v.tx, v.newView, host);
}

void ExternalParticipant::reject_as_leader(const TxPtr& tx, ProtocolHost& host) {
  auto trail = local_trail(*tx, host);
  if (!trail) return;
  broadcast_to_trail(*trail, make_message(MessageKind::x_reject, ExtRejectBody{tx, tx->externalView}),
                     host);
}

void ExternalParticipant::on_reject(PeerId from, const ExtRejectBody& r, ProtocolHost& host) {
  auto it = pending_.find(r.tx->identity());
  if (it == pending_.end() || prepared_.count(it->first)) return;
  auto trail = local_trail(*r.tx, host);
  if (!trail) return;
  const ShardId leader = external_leader(*trail, origin_shard(*r.tx), r.view);
  if (from.shard != leader) return;
  const Params& prm = host.config().params;
  auto [q, _] = it->second.rejects.try_emplace(r.view, QuorumCollector(leader, prm.peer_quorum(), prm.s));
  if (q->second.add(from) != CollectResult::fired) return;
  TxPtr tx = it->second.tx;
  pending_.erase(it);
  host.request_dropped(*tx);
}

void ExternalParticipant::on_recorded(PeerId from, const ExtReplyBody& r, ProtocolHost& host) {
  const std::uint64_t id = r.proposal->tx->identity();
  if (recorded_.count(id) || !pending_.count(id)) return;
  auto trail = local_trail(*r.proposal->tx, host);
  if (!trail || !trail->contains(from.shard)) return;
  const Params& prm = host.config().params;
  auto [q, _] = transfers_.try_emplace(r.digest, ShardQuorum(prm.f + 1, prm.s));
  if (!q->second.add(from) || q->second.shards_fired() < prm.F + 1) return;
  transfers_.erase(q);
  apply(r.proposal, r.newTrail, true, host);
}

void ExternalParticipant::maybe_recover(CoinId coin, ProtocolHost& host) {
  const LedgerRecord* r = host.ledger().latest(coin);
  if (!r || r->tWallet.is_sentinel() || !host.shard_removed(r->tWallet.shard)) return;
  if (!r->trail.contains(self_.shard)) return;
  const Params& prm = host.config().params;
  std::uint32_t lost = 0;
  for (ShardId s : r->trail.shards) lost += host.shard_removed(s) ? 1 : 0;
  if (lost > prm.F) return;

  const ShardId failed = r->tWallet.shard;
  std::uint64_t view = 1;
  while (host.shard_removed(external_leader(r->trail, failed, view)) && view < 2 * r->trail.size()) {
    ++view;
  }
  auto tx = std::make_shared<Transaction>();
  tx->kind = TxKind::recovery;
  tx->coin = coin;
  tx->sWallet = r->tWallet;
  tx->tWallet = host.recovery_target(coin);
  tx->id = hash_combine(hash_combine(coin.value, hash_wallet(r->tWallet)), 0x7265636f76ull) |
           (std::uint64_t{1} << 63);
  tx->externalView = view;
  if (recorded_.count(tx->identity()) || pending_.count(tx->identity())) return;
  Pending* p = track(tx, view, host);
  if (!p) return;
  host.recovery_generated(tx);
  if (external_leader(r->trail, failed, view) == self_.shard) lead(tx, view, host);
}

void ExternalParticipant::on_shard_removed(ShardId shard, ProtocolHost& host) {
  for (CoinId c : host.ledger().coins()) {
    const LedgerRecord* r = host.ledger().latest(c);
    if (r && r->tWallet.shard == shard) maybe_recover(c, host);
  }
}

void ExternalParticipant::tick(ProtocolHost& host) {
  if (!deferred_.empty()) {
    auto retry = std::move(deferred_);
    deferred_.clear();
    for (auto& [tx, view] : retry) {
      if (!recorded_.count(tx->identity())) lead(tx, view, host);
    }
  }
  const Round now = host.now();
  for (auto& [id, p] : pending_) {
    if (now < p.deadline || prepared_.count(id)) continue;
    send_view_change(p, p.view + 1, host);
    p.deadline = now + (host.config().externalTimeout << std::min<std::uint32_t>(++p.backoff, 16));
  }
}

}  // namespace trail
