#pragma once

#include "trail/domain.hpp"
#include "trail/ledger.hpp"
#include "trail/messages.hpp"

namespace trail {

enum class Validation : std::uint8_t { off, on, on_recovery };

struct ProtocolConfig {
  Params params;
  Validation validation = Validation::on;
  Round internalTimeout = 10;
  Round externalTimeout = 40;
};

// Services a peer's protocol state machines need from their surroundings.
// The simulator's peer implements it; unit tests substitute recorders.
class ProtocolHost {
 public:
  virtual ~ProtocolHost() = default;

  virtual Round now() const = 0;
  virtual PeerId self() const = 0;
  virtual const ProtocolConfig& config() const = 0;
  virtual Ledger& ledger() = 0;
  virtual bool known_wallet(WalletId w) const = 0;
  virtual bool shard_removed(ShardId s) const = 0;

  virtual void send(PeerId to, MessagePtr m) = 0;
  virtual void send_to_shard(ShardId shard, MessagePtr m) = 0;

  // Local admission check run before a request enters internal consensus.
  virtual bool admits(const Transaction& tx) = 0;
  virtual void internal_completed(const TxPtr& tx, std::uint64_t seq, std::uint64_t view) = 0;
  virtual void internal_rejected(const TxPtr& tx) = 0;

  // True when this peer colludes with the given leader shard and signs off
  // on its proposals without checking them.
  virtual bool colluding_with(ShardId leader) const = 0;
  // Feeds a request into this peer's internal consensus (external view
  // change at the new leader shard).
  virtual void start_internal(const TxPtr& tx) = 0;

  virtual void client_reply(const ExtProposal& p, const Trail& newTrail) = 0;
  virtual void target_accepted(const ExtProposal& p, const Trail& newTrail) = 0;
  virtual void request_dropped(const Transaction& tx) = 0;
  virtual WalletId recovery_target(CoinId coin) const = 0;
  virtual void recovery_generated(const TxPtr& tx) = 0;
};

}  // namespace trail
