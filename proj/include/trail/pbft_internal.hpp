#pragma once

#include <map>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "trail/netsim.hpp"
#include "trail/protocol_host.hpp"

namespace trail {

// One peer's replica of its shard's three-phase consensus. Requests are
// ordered by sequence number and completed strictly in that order.
class InternalReplica {
 public:
  InternalReplica(PeerId self, std::uint32_t shardSize, std::uint32_t f, Round baseTimeout);

  // A client request (or a locally originated one) arriving at this peer.
  void submit(const TxPtr& tx, ProtocolHost& host);
  void on_message(PeerId from, const MessagePtr& m, ProtocolHost& host);
  void tick(ProtocolHost& host);

  std::uint64_t view() const { return view_; }
  PeerId leader_of(std::uint64_t view) const {
    return PeerId{self_.shard, static_cast<std::uint32_t>(view % s_)};
  }
  bool is_leader() const { return leader_of(view_) == self_; }
  bool in_view_change() const { return inViewChange_; }
  std::uint64_t last_completed() const { return lastCompleted_; }
  bool timer_armed() const { return timerArmed_; }
  Round timer_deadline() const { return timerDeadline_; }
  std::size_t evidence_count() const { return evidence_; }
  std::size_t pending_count() const { return pending_.size(); }

  struct Completion {
    std::uint64_t seq;
    std::uint64_t view;
    std::uint64_t digest;
  };
  // Every completed slot in completion order, null fillers included.
  const std::vector<Completion>& completions() const { return completions_; }

 private:
  struct Slot {
    std::uint64_t view = 0;
    TxPtr tx;
    std::uint64_t digest = 0;
    bool accepted = false;
    bool prepareSent = false;
    bool commitSent = false;
    bool committed = false;
    bool completed = false;
  };
  // (seq, view, kind, digest); seq leads so old entries can be pruned by range.
  using VoteKey = std::tuple<std::uint64_t, std::uint64_t, std::uint8_t, std::uint64_t>;

  Round timeout() const;
  void arm_timer(ProtocolHost& host);
  void add_pending(const TxPtr& tx, ProtocolHost& host);
  bool coins_free(const Transaction& tx) const;
  void propose(const TxPtr& tx, ProtocolHost& host);
  void propose_at(std::uint64_t seq, const TxPtr& tx, ProtocolHost& host);
  void on_request(const TxPtr& tx, ProtocolHost& host);
  void on_pre_prepare(PeerId from, const PrePrepareBody& m, const MessagePtr& raw,
                      ProtocolHost& host);
  void on_vote(PeerId from, MessageKind kind, const VoteBody& m, ProtocolHost& host);
  void on_view_change(PeerId from, const ViewChangeBody& m, ProtocolHost& host);
  void advance(std::uint64_t seq, ProtocolHost& host);
  void complete_ready(ProtocolHost& host);
  // Rejects waiting requests that a just-completed one made unspendable.
  void drop_stale_pending(const Transaction& done, ProtocolHost& host);
  void start_view_change(std::uint64_t target, ProtocolHost& host);
  void enter_view(std::uint64_t v, ProtocolHost& host);
  void prune();
  std::uint32_t votes(MessageKind kind, std::uint64_t view, std::uint64_t seq,
                      std::uint64_t digest) const;

  PeerId self_;
  std::uint32_t s_;
  std::uint32_t f_;
  Round baseTimeout_;

  std::uint64_t view_ = 0;
  bool inViewChange_ = false;
  std::uint64_t targetView_ = 0;
  Round viewChangeDeadline_ = 0;
  std::uint32_t consecutiveViewChanges_ = 0;

  std::uint64_t highestSeq_ = 0;
  std::uint64_t lastCompleted_ = 0;
  std::map<std::uint64_t, Slot> slots_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> firstSeen_;  // (seq, view)
  std::map<VoteKey, PeerSet> votes_;

  std::unordered_map<std::uint64_t, TxPtr> pending_;
  std::unordered_map<std::uint64_t, std::uint64_t> slotOf_;  // identity -> seq
  std::unordered_set<std::uint64_t> completedIds_;
  std::unordered_map<CoinId, std::uint64_t> inFlight_;  // coin -> identity

  bool timerArmed_ = false;
  Round timerDeadline_ = 0;

  std::map<std::uint64_t, std::map<std::uint32_t, ViewChangeBody>> viewChanges_;
  std::vector<std::pair<PeerId, MessagePtr>> future_;
  std::vector<Completion> completions_;
  std::size_t evidence_ = 0;
};

}  // namespace trail
