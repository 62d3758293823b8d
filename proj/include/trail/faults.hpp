#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "trail/domain.hpp"

namespace trail {

class Simulation;

// Behavior of an individual faulty peer inside an otherwise correct shard.
enum class PeerBehavior : std::uint8_t { correct, silent, equivocating };

struct PeerFault {
  PeerId peer;
  PeerBehavior behavior = PeerBehavior::silent;
};

struct FaultPlan {
  std::vector<ShardId> byzantineShards;
  Round failRound = 0;
  // Rounds between a shard failing and every correct shard learning it.
  // Detection and removal only happen in the recovery-enabled mode.
  Round detectionDelay = 0;
  std::vector<PeerFault> peerFaults;
  // Peers failing per round in the failure-time model.
  std::uint32_t peerFailureRate = 1;
};

struct SystemStatus {
  std::uint32_t faultyShardCount = 0;
  bool failed = false;

  // Failure is sticky: once the count exceeded the tolerance it stays failed.
  void update(std::uint32_t faultyShards, std::uint32_t F) {
    faultyShardCount = faultyShards;
    failed = failed || faultyShards > F;
  }
};

// Wallet that receives a recovered coin: a hash of the coin id over the
// shards still in service, so every peer picks the same one.
WalletId recovery_wallet(CoinId coin, const std::vector<ShardId>& liveShards,
                         std::uint32_t walletsPerShard);

// Failure-time model: one still-correct peer fails per round, in an order
// fixed by the seed so configurations with equal peer counts share it.
struct FailureModelSetup {
  std::uint32_t totalPeers = 160;
  std::uint32_t shardCount = 16;
  std::uint32_t F = 0;
  std::optional<Round> detectionDelay;  // no detector when empty
  std::uint32_t peersPerRound = 1;
};

struct FailureOutcome {
  Round failureRound = 0;
  std::uint32_t faultyShards = 0;
  std::uint32_t removedShards = 0;
  bool peersExhausted = false;
};

class ShardFailureModel {
 public:
  ShardFailureModel(const FailureModelSetup& setup, std::uint64_t seed);

  // Advances one round; returns true once the system has failed.
  bool step();
  FailureOutcome run();

  Round round() const { return round_; }
  const SystemStatus& status() const { return status_; }
  std::uint32_t failed_peers(ShardId s) const { return failedPeers_[s.value]; }
  bool shard_faulty(ShardId s) const { return faultyAt_[s.value].has_value(); }
  bool shard_removed(ShardId s) const { return removed_[s.value]; }
  std::uint32_t shard_size() const { return shardSize_; }
  std::uint32_t shard_tolerance() const { return f_; }

 private:
  void remove_detected();
  bool fail_next_peer();
  bool check_failed();

  FailureModelSetup setup_;
  std::uint32_t shardSize_;
  std::uint32_t f_;
  std::vector<std::uint32_t> order_;
  std::size_t next_ = 0;
  std::vector<std::uint32_t> failedPeers_;
  std::vector<std::optional<Round>> faultyAt_;
  std::vector<bool> removed_;
  std::uint32_t removedCount_ = 0;
  Round round_ = 0;
  SystemStatus status_;
  bool exhausted_ = false;
};

// Exact expected number of rounds until the first shard has more than f
// failed peers, by dynamic programming over per-shard failure counts. Used
// as an independent check of the failure-time model for small systems.
double expected_first_shard_failure(std::uint32_t shards, std::uint32_t shardSize,
                                    std::uint32_t f);

// Double-spending shard coalition: after the fail round each Byzantine shard
// re-spends coins that already left it through confirmed transactions.
class Adversary {
 public:
  Adversary(std::uint32_t txPerShardPerRound, std::uint64_t seed);

  void act(Simulation& sim);
  std::uint64_t issued() const { return issued_; }

 private:
  std::uint32_t rate_;
  std::mt19937_64 rng_;
  std::uint64_t issued_ = 0;
};

}  // namespace trail
