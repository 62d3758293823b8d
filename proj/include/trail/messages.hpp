#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "trail/domain.hpp"

namespace trail {

enum class MessageKind : std::uint8_t {
  request,
  pre_prepare,
  prepare,
  commit,
  view_change,
  x_request,
  x_pre_prepare,
  x_prepare,
  x_commit,
  x_reply,
  x_view_change,
  x_reject,
  x_recorded,
};

inline constexpr std::size_t kMessageKinds = 13;
const char* to_string(MessageKind k);

// Request forwarded to the shard leader, or injected by the client.
struct RequestBody {
  TxPtr tx;
};

// Internal pre-prepare; a null tx is the no-op filler used after a view
// change.
struct PrePrepareBody {
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  TxPtr tx;
  std::uint64_t digest = 0;
};

struct VoteBody {
  std::uint64_t view = 0;
  std::uint64_t seq = 0;
  std::uint64_t digest = 0;
};

struct SlotReport {
  std::uint64_t seq = 0;
  std::uint64_t view = 0;
  TxPtr tx;
  std::uint64_t digest = 0;
  bool completed = false;
};

struct ViewChangeBody {
  std::uint64_t newView = 0;
  std::uint64_t lastCompleted = 0;
  std::uint64_t highestSeq = 0;
  std::vector<SlotReport> slots;
};

// One externally ordered transaction as proposed by its leader shard. The
// leader attaches its unreported same-shard moves of the coin so trail
// shards can follow the ownership chain.
struct ExtProposal {
  TxPtr tx;
  std::uint64_t seq = 0;
  std::uint64_t view = 0;
  ShardId leader;
  std::vector<LedgerRecord> history;
  std::uint64_t digest = 0;

  void seal();
};

using ProposalPtr = std::shared_ptr<const ExtProposal>;

struct ExtPhaseBody {
  ProposalPtr proposal;
};

struct ExtReplyBody {
  ProposalPtr proposal;
  Trail newTrail;
  Trail voters;  // shards whose replies count toward acceptance
  std::uint64_t digest = 0;
};

struct ExtViewChangeBody {
  TxPtr tx;
  std::uint64_t newView = 0;
};

struct ExtRejectBody {
  TxPtr tx;
  std::uint64_t view = 0;
};

using MessageBody = std::variant<RequestBody, PrePrepareBody, VoteBody, ViewChangeBody,
                                 ExtPhaseBody, ExtReplyBody, ExtViewChangeBody, ExtRejectBody>;

struct Message {
  MessageKind kind;
  MessageBody body;
};

using MessagePtr = std::shared_ptr<const Message>;

template <class Body>
MessagePtr make_message(MessageKind kind, Body body) {
  return std::make_shared<const Message>(Message{kind, MessageBody{std::move(body)}});
}

}  // namespace trail
