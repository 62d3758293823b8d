#include "trail/netsim.hpp"

#include <algorithm>

namespace trail {

const char* to_string(MessageKind k) {
  static constexpr std::array<const char*, kMessageKinds> names = {
      "request",   "pre_prepare", "prepare",  "commit",        "view_change",
      "x_request", "x_pre_prepare", "x_prepare", "x_commit",   "x_reply",
      "x_view_change", "x_reject",  "x_recorded"};
  return names[static_cast<std::size_t>(k)];
}

CollectResult QuorumCollector::add(PeerId sender) {
  if (sender.shard != expected_) return CollectResult::foreign;
  if (!matched_.insert(sender.index)) return CollectResult::duplicate;
  if (fired_) return CollectResult::spent;
  if (matched_.size() >= threshold_) {
    fired_ = true;
    return CollectResult::fired;
  }
  return CollectResult::pending;
}

bool ShardQuorum::add(PeerId sender) {
  QuorumCollector* c = nullptr;
  for (auto& existing : collectors_) {
    if (existing.expected_shard() == sender.shard) {
      c = &existing;
      break;
    }
  }
  if (!c) c = &collectors_.emplace_back(sender.shard, peerThreshold_, shardSize_);
  if (c->add(sender) != CollectResult::fired) return false;
  fired_.push_back(sender.shard);
  return true;
}

Network::Network(std::uint32_t shards, std::uint32_t shardSize, DelayModel delay,
                 std::uint64_t seed)
    : shards_(shards),
      shardSize_(shardSize),
      delay_(delay),
      rng_(seed),
      buckets_(static_cast<std::size_t>(std::max<Round>(delay.maxDelay, 1)) + 1),
      removed_(shards, false) {
  if (delay_.maxDelay < 1) delay_.maxDelay = 1;
  if (delay_.maxDelay > 1) {
    const std::size_t n = static_cast<std::size_t>(shards) * shardSize;
    lastDelivery_.assign(n * n, 0);
  }
}

void Network::enqueue(PeerId from, PeerId to, MessagePtr payload, Round now) {
  Round at = now + 1;
  if (delay_.maxDelay > 1) {
    std::uniform_int_distribution<Round> d(1, delay_.maxDelay);
    at = now + d(rng_);
    Round& last = lastDelivery_[flat(from) * (static_cast<std::size_t>(shards_) * shardSize_) +
                                flat(to)];
    at = std::max(at, last);
    last = at;
  }
  ++sent_;
  ++byKind_[static_cast<std::size_t>(payload->kind)];
  buckets_[slot(at)].push_back(Envelope{from, to, now, std::move(payload)});
}

void Network::send(PeerId from, PeerId to, MessagePtr payload, Round now) {
  if (removed_[to.shard.value]) return;
  enqueue(from, to, std::move(payload), now);
}

void Network::send_to_shard(PeerId from, ShardId shard, const MessagePtr& payload, Round now) {
  if (removed_[shard.value]) return;
  for (std::uint32_t i = 0; i < shardSize_; ++i) enqueue(from, PeerId{shard, i}, payload, now);
}

std::size_t Network::in_flight() const {
  std::size_t n = 0;
  for (const auto& b : buckets_) n += b.size();
  return n;
}

}  // namespace trail
