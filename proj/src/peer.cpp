#include "trail/peer.hpp"

#include "trail/simulation.hpp"

namespace trail {

Peer::Peer(PeerId id, PeerBehavior behavior, Simulation& sim)
    : id_(id),
      behavior_(behavior),
      sim_(sim),
      replica_(id, sim.params().s, sim.params().f, sim.config().protocol.internalTimeout),
      external_(id) {}

bool Peer::honest() const { return behavior_ == PeerBehavior::correct && !colluding(); }

bool Peer::colluding() const { return sim_.shard_byzantine(id_.shard); }

Round Peer::now() const { return sim_.now(); }

const ProtocolConfig& Peer::config() const { return sim_.config().protocol; }

bool Peer::known_wallet(WalletId w) const { return sim_.wallets().contains(w); }

bool Peer::shard_removed(ShardId s) const { return sim_.shard_removed(s); }

bool Peer::drops_for_coalition(const Message& m) const {
  switch (m.kind) {
    case MessageKind::x_pre_prepare:
    case MessageKind::x_prepare:
    case MessageKind::x_commit:
      return !sim_.shard_byzantine(std::get<ExtPhaseBody>(m.body).proposal->leader);
    case MessageKind::x_reply:
    case MessageKind::x_view_change:
    case MessageKind::x_reject:
    case MessageKind::x_recorded:
      return true;
    default:
      return false;
  }
}

void Peer::receive(const Envelope& e) {
  if (behavior_ == PeerBehavior::silent) return;
  const Message& m = *e.payload;
  if (colluding() && drops_for_coalition(m)) return;
  switch (m.kind) {
    case MessageKind::request:
    case MessageKind::pre_prepare:
    case MessageKind::prepare:
    case MessageKind::commit:
    case MessageKind::view_change:
      replica_.on_message(e.sender, e.payload, *this);
      break;
    default:
      external_.on_message(e.sender, e.payload, *this);
      break;
  }
}

void Peer::client_request(const TxPtr& tx) {
  if (behavior_ == PeerBehavior::silent) return;
  replica_.submit(tx, *this);
}

void Peer::client_escalation(const TxPtr& tx) {
  if (behavior_ == PeerBehavior::silent || colluding()) return;
  external_.on_client_escalation(tx, *this);
}

void Peer::notify_removed(ShardId shard) {
  if (behavior_ == PeerBehavior::silent || colluding()) return;
  external_.on_shard_removed(shard, *this);
}

void Peer::tick() {
  if (behavior_ == PeerBehavior::silent) return;
  replica_.tick(*this);
  if (!colluding()) external_.tick(*this);
}

MessagePtr Peer::equivocate(const Message& m) const {
  auto altered_tx = [&](const TxPtr& tx) {
    auto copy = std::make_shared<Transaction>(*tx);
    const std::uint32_t W = sim_.wallets().wallets_per_shard();
    copy->tWallet.index = (copy->tWallet.index + 1) % (W ? W : 1);
    return TxPtr(copy);
  };
  switch (m.kind) {
    case MessageKind::pre_prepare: {
      PrePrepareBody b = std::get<PrePrepareBody>(m.body);
      if (!b.tx) return nullptr;
      b.tx = altered_tx(b.tx);
      b.digest = b.tx->digest();
      return make_message(m.kind, std::move(b));
    }
    case MessageKind::prepare:
    case MessageKind::commit: {
      VoteBody b = std::get<VoteBody>(m.body);
      b.digest ^= 1;
      return make_message(m.kind, b);
    }
    case MessageKind::x_pre_prepare:
    case MessageKind::x_prepare:
    case MessageKind::x_commit: {
      auto p = std::make_shared<ExtProposal>(*std::get<ExtPhaseBody>(m.body).proposal);
      p->tx = altered_tx(p->tx);
      p->seal();
      return make_message(m.kind, ExtPhaseBody{std::move(p)});
    }
    default:
      return nullptr;
  }
}

void Peer::send(PeerId to, MessagePtr m) {
  MessagePtr twin = behavior_ == PeerBehavior::equivocating ? equivocate(*m) : nullptr;
  sim_.network().send(id_, to, std::move(m), sim_.now());
  if (twin) sim_.network().send(id_, to, std::move(twin), sim_.now());
}

void Peer::send_to_shard(ShardId shard, MessagePtr m) {
  MessagePtr twin = behavior_ == PeerBehavior::equivocating ? equivocate(*m) : nullptr;
  sim_.network().send_to_shard(id_, shard, m, sim_.now());
  if (twin) sim_.network().send_to_shard(id_, shard, twin, sim_.now());
}

bool Peer::admits(const Transaction& tx) {
  if (colluding()) return sim_.is_coalition(tx);
  for (CoinId c : tx.consumed()) {
    if (external_.coin_locked(c)) return false;
  }
  if (tx.kind == TxKind::mint && external_.coin_locked(tx.coin)) return false;
  if (tx.externalView > 0 || tx.kind != TxKind::internal) {
    if (tx.kind == TxKind::internal) return false;
    // Requests led by a later view carry no history: the trail already
    // knows where the coin is.
    return proposal_valid(ledger_, tx, {}, *this);
  }
  return known_wallet(tx.sWallet) && known_wallet(tx.tWallet) && tx.sWallet != tx.tWallet &&
         tx.sWallet.shard == id_.shard && tx.tWallet.shard == id_.shard &&
         ledger_.is_present(tx.coin, tx.sWallet);
}

void Peer::internal_completed(const TxPtr& tx, std::uint64_t seq, std::uint64_t) {
  if (tx->externalView > 0) {
    external_.start_phase1(tx, seq, *this);
    return;
  }
  switch (tx->kind) {
    case TxKind::internal: {
      const LedgerRecord* last = ledger_.latest(tx->coin);
      ledger_.record(LedgerRecord{tx->coin, tx->sWallet, tx->tWallet, seq,
                                  last ? last->trail : Trail{}, now()});
      sim_.observer().on_internal_commit(id_, *tx, now());
      break;
    }
    case TxKind::external:
      if (config().validation == Validation::off) {
        external_.confirm_unvalidated(tx, seq, *this);
      } else {
        external_.start_phase1(tx, seq, *this);
      }
      break;
    default:
      external_.start_phase1(tx, seq, *this);
      break;
  }
}

void Peer::internal_rejected(const TxPtr& tx) {
  if (tx->externalView > 0) {
    external_.reject_as_leader(tx, *this);
    return;
  }
  sim_.observer().on_rejected(id_, *tx, now());
}

bool Peer::colluding_with(ShardId leader) const {
  return colluding() && sim_.shard_byzantine(leader);
}

void Peer::start_internal(const TxPtr& tx) { replica_.submit(tx, *this); }

void Peer::client_reply(const ExtProposal& p, const Trail&) {
  sim_.observer().on_client_reply(id_, p, now());
}

void Peer::target_accepted(const ExtProposal& p, const Trail&) {
  sim_.observer().on_target_accepted(id_, p, now());
}

void Peer::request_dropped(const Transaction& tx) { sim_.observer().on_dropped(tx, now()); }

WalletId Peer::recovery_target(CoinId coin) const { return sim_.recovery_target(coin); }

void Peer::recovery_generated(const TxPtr& tx) { sim_.observer().on_started(tx, now()); }

}  // namespace trail
