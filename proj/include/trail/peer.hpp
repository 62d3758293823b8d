#pragma once

#include "trail/faults.hpp"
#include "trail/ledger.hpp"
#include "trail/netsim.hpp"
#include "trail/pbft_external.hpp"
#include "trail/pbft_internal.hpp"
#include "trail/protocol_host.hpp"

namespace trail {

class Simulation;

// A single simulated peer: its ledger plus the internal and trail-level
// consensus roles, wired to the simulation's network and observer.
class Peer final : public ProtocolHost {
 public:
  Peer(PeerId id, PeerBehavior behavior, Simulation& sim);

  PeerBehavior behavior() const { return behavior_; }
  // True while this peer follows the protocol on behalf of honest clients.
  bool honest() const;

  void receive(const Envelope& e);
  void client_request(const TxPtr& tx);
  void client_escalation(const TxPtr& tx);
  void notify_removed(ShardId shard);
  void tick();

  const Ledger& ledger() const { return ledger_; }
  const InternalReplica& replica() const { return replica_; }
  const ExternalParticipant& external() const { return external_; }

  // ProtocolHost
  Round now() const override;
  PeerId self() const override { return id_; }
  const ProtocolConfig& config() const override;
  Ledger& ledger() override { return ledger_; }
  bool known_wallet(WalletId w) const override;
  bool shard_removed(ShardId s) const override;
  void send(PeerId to, MessagePtr m) override;
  void send_to_shard(ShardId shard, MessagePtr m) override;
  bool admits(const Transaction& tx) override;
  void internal_completed(const TxPtr& tx, std::uint64_t seq, std::uint64_t view) override;
  void internal_rejected(const TxPtr& tx) override;
  bool colluding_with(ShardId leader) const override;
  void start_internal(const TxPtr& tx) override;
  void client_reply(const ExtProposal& p, const Trail& newTrail) override;
  void target_accepted(const ExtProposal& p, const Trail& newTrail) override;
  void request_dropped(const Transaction& tx) override;
  WalletId recovery_target(CoinId coin) const override;
  void recovery_generated(const TxPtr& tx) override;

 private:
  bool colluding() const;
  bool drops_for_coalition(const Message& m) const;
  MessagePtr equivocate(const Message& m) const;

  PeerId id_;
  PeerBehavior behavior_;
  Simulation& sim_;
  Ledger ledger_;
  InternalReplica replica_;
  ExternalParticipant external_;
};

}  // namespace trail
