#pragma once

#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "trail/netsim.hpp"
#include "trail/protocol_host.hpp"

namespace trail {

// Checks a proposal against the local ledger the way a trail shard does
// before preparing: the coin must sit in the source wallet once the
// attached same-shard moves are replayed.
bool proposal_valid(const Ledger& ledger, const Transaction& tx,
                    const std::vector<LedgerRecord>& history, const ProtocolHost& host);

// Where the coin's trail goes when the transaction is recorded.
Trail next_trail(const Transaction& tx, const Trail& current, std::uint32_t t);

// Shard that receives the reply and thereafter holds the moved coin.
ShardId reply_shard(const Transaction& tx);

// The trail-level consensus role of one peer: leader-shard member, trail
// member, or target-shard member of external transactions.
class ExternalParticipant {
 public:
  explicit ExternalParticipant(PeerId self) : self_(self) {}

  // Phase 1, run by every leader-shard peer once internal consensus
  // ordered the request.
  void start_phase1(const TxPtr& tx, std::uint64_t seq, ProtocolHost& host);
  // Confirmation straight from the source shard when trail validation is
  // disabled.
  void confirm_unvalidated(const TxPtr& tx, std::uint64_t seq, ProtocolHost& host);

  void on_message(PeerId from, const MessagePtr& m, ProtocolHost& host);
  // A client whose request went unanswered hands it to the trail.
  void on_client_escalation(const TxPtr& tx, ProtocolHost& host);
  void on_shard_removed(ShardId shard, ProtocolHost& host);
  // The leader shard of a later view could not admit the request.
  void reject_as_leader(const TxPtr& tx, ProtocolHost& host);
  void tick(ProtocolHost& host);

  bool coin_locked(CoinId c) const { return locks_.count(c) != 0; }
  bool recorded(std::uint64_t identity) const { return recorded_.count(identity) != 0; }
  std::size_t pending_count() const { return pending_.size(); }
  std::size_t instance_count() const { return instances_.size(); }

 private:
  struct Instance {
    ProposalPtr proposal;
    Trail trail;
    ShardId leader;
    std::uint64_t identity = 0;
    QuorumCollector preprepare;
    ShardQuorum prepares;
    ShardQuorum commits;
    bool prepareSent = false;
    bool commitSent = false;
    bool done = false;
  };

  struct Pending {
    TxPtr tx;
    std::uint64_t view = 0;
    std::uint64_t sentView = 0;
    Round deadline = 0;
    std::uint32_t backoff = 0;
    std::map<std::uint64_t, ShardQuorum> viewVotes;
    std::map<std::uint64_t, QuorumCollector> rejects;
  };

  struct RecordedInfo {
    ProposalPtr proposal;
    Trail newTrail;
  };

  Instance* instance_for(const ProposalPtr& p, ProtocolHost& host);
  std::optional<Trail> local_trail(const Transaction& tx, ProtocolHost& host) const;
  ShardId origin_shard(const Transaction& tx) const;
  void broadcast_to_trail(const Trail& trail, const MessagePtr& m, ProtocolHost& host);

  void on_pre_prepare(PeerId from, const ProposalPtr& p, ProtocolHost& host);
  void on_prepare(PeerId from, const ProposalPtr& p, ProtocolHost& host);
  void on_commit(PeerId from, const ProposalPtr& p, ProtocolHost& host);
  void on_reply(PeerId from, const ExtReplyBody& r, ProtocolHost& host);
  void on_view_change(PeerId from, const ExtViewChangeBody& v, ProtocolHost& host);
  void on_reject(PeerId from, const ExtRejectBody& r, ProtocolHost& host);
  void on_recorded(PeerId from, const ExtReplyBody& r, ProtocolHost& host);

  void try_prepare(Instance& inst, ProtocolHost& host);
  void maybe_commit(Instance& inst, ProtocolHost& host);
  void finalize(Instance& inst, ProtocolHost& host);
  // Writes the records of a decided transaction; false when this request
  // was already recorded here.
  bool apply(const ProposalPtr& p, const Trail& newTrail, bool withHistory, ProtocolHost& host);
  void release(std::uint64_t identity, ProtocolHost& host);

  Pending* track(const TxPtr& tx, std::uint64_t view, ProtocolHost& host);
  void send_view_change(Pending& p, std::uint64_t view, ProtocolHost& host);
  void lead(const TxPtr& tx, std::uint64_t view, ProtocolHost& host);
  void maybe_recover(CoinId coin, ProtocolHost& host);

  PeerId self_;
  std::unordered_map<std::uint64_t, Instance> instances_;  // by proposal digest
  std::unordered_set<std::uint64_t> ignored_;
  struct Lock {
    std::uint64_t identity;
    std::uint64_t digest;
  };
  std::unordered_map<CoinId, Lock> locks_;
  std::unordered_map<CoinId, std::vector<std::uint64_t>> waiting_;
  std::unordered_set<std::uint64_t> prepared_;                    // identities
  std::unordered_map<std::uint64_t, std::uint64_t> committedTo_;  // identity -> digest
  std::unordered_map<std::uint64_t, RecordedInfo> recorded_;
  std::map<std::uint64_t, Pending> pending_;
  std::unordered_map<std::uint64_t, ShardQuorum> replies_;
  std::unordered_set<std::uint64_t> accepted_;
  std::unordered_map<std::uint64_t, ShardQuorum> transfers_;
  std::vector<std::pair<TxPtr, std::uint64_t>> deferred_;  // leader starts blocked by a lock
};

}  // namespace trail
