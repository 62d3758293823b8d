#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "trail/domain.hpp"
#include "trail/messages.hpp"

namespace trail {

struct Envelope {
  PeerId sender;
  PeerId receiver;
  Round sendRound = 0;
  MessagePtr payload;
};

// Set of peer indices within one shard.
class PeerSet {
 public:
  explicit PeerSet(std::uint32_t capacity = 0) : words_((capacity + 63) / 64, 0) {}

  // Returns false when the index was already present.
  bool insert(std::uint32_t index) {
    const std::size_t w = index / 64;
    if (w >= words_.size()) words_.resize(w + 1, 0);
    const std::uint64_t bit = std::uint64_t{1} << (index % 64);
    if (words_[w] & bit) return false;
    words_[w] |= bit;
    ++count_;
    return true;
  }
  bool contains(std::uint32_t index) const {
    const std::size_t w = index / 64;
    return w < words_.size() && (words_[w] >> (index % 64)) & 1u;
  }
  std::uint32_t size() const { return count_; }

 private:
  std::vector<std::uint64_t> words_;
  std::uint32_t count_ = 0;
};

enum class CollectResult : std::uint8_t { pending, fired, duplicate, foreign, spent };

// Counts unique senders of one shard for one payload key and fires once.
class QuorumCollector {
 public:
  QuorumCollector() = default;
  QuorumCollector(ShardId expected, std::uint32_t threshold, std::uint32_t shardSize = 0)
      : expected_(expected), threshold_(threshold), matched_(shardSize) {}

  CollectResult add(PeerId sender);

  ShardId expected_shard() const { return expected_; }
  std::uint32_t threshold() const { return threshold_; }
  std::uint32_t count() const { return matched_.size(); }
  bool fired() const { return fired_; }

 private:
  ShardId expected_;
  std::uint32_t threshold_ = 0;
  PeerSet matched_;
  bool fired_ = false;
};

// Shard-level vote: one peer collector per shard, counting the shards whose
// collector has fired.
class ShardQuorum {
 public:
  ShardQuorum() = default;
  explicit ShardQuorum(std::uint32_t peerThreshold, std::uint32_t shardSize = 0)
      : peerThreshold_(peerThreshold), shardSize_(shardSize) {}

  // True exactly when this sender completes its shard's peer quorum.
  bool add(PeerId sender);
  std::uint32_t shards_fired() const { return static_cast<std::uint32_t>(fired_.size()); }
  const std::vector<ShardId>& fired_shards() const { return fired_; }

 private:
  std::uint32_t peerThreshold_ = 0;
  std::uint32_t shardSize_ = 0;
  std::vector<QuorumCollector> collectors_;
  std::vector<ShardId> fired_;
};

struct DelayModel {
  Round maxDelay = 1;  // 1 gives the fixed one-round delay
};

// Round-bucketed reliable FIFO channels between all peers.
class Network {
 public:
  Network(std::uint32_t shards, std::uint32_t shardSize, DelayModel delay, std::uint64_t seed);

  void send(PeerId from, PeerId to, MessagePtr payload, Round now);
  void send_to_shard(PeerId from, ShardId shard, const MessagePtr& payload, Round now);

  // Hands every envelope due in `round` to `handler` in enqueue order.
  // Envelopes sent during delivery land in later rounds.
  template <class Handler>
  void deliver(Round round, Handler&& handler) {
    auto& bucket = buckets_[slot(round)];
    for (std::size_t i = 0; i < bucket.size(); ++i) {
      const Envelope& e = bucket[i];
      if (removed_[e.receiver.shard.value]) continue;
      ++delivered_;
      handler(e);
    }
    bucket.clear();
  }

  void remove_shard(ShardId shard) { removed_[shard.value] = true; }
  bool is_removed(ShardId shard) const { return removed_[shard.value]; }

  std::uint64_t envelopes_sent() const { return sent_; }
  std::uint64_t envelopes_delivered() const { return delivered_; }
  const std::array<std::uint64_t, kMessageKinds>& sent_by_kind() const { return byKind_; }
  std::size_t in_flight() const;

  std::uint32_t shards() const { return shards_; }
  std::uint32_t shard_size() const { return shardSize_; }

 private:
  std::size_t slot(Round r) const { return static_cast<std::size_t>(r) % buckets_.size(); }
  std::size_t flat(PeerId p) const {
    return static_cast<std::size_t>(p.shard.value) * shardSize_ + p.index;
  }
  void enqueue(PeerId from, PeerId to, MessagePtr payload, Round now);

  std::uint32_t shards_;
  std::uint32_t shardSize_;
  DelayModel delay_;
  std::mt19937_64 rng_;
  std::vector<std::vector<Envelope>> buckets_;
  std::vector<bool> removed_;
  std::vector<Round> lastDelivery_;  // per channel, only used with random delays
  std::uint64_t sent_ = 0;
  std::uint64_t delivered_ = 0;
  std::array<std::uint64_t, kMessageKinds> byKind_{};
};

}  // namespace trail
