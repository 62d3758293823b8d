#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "trail/domain.hpp"

namespace trail {

class Simulation;

struct WorkloadSpec {
  double crossShardProbability = 0.25;
  std::uint32_t txPerShardPerRound = 1;
  // Last round in which new requests are issued; unlimited when empty.
  std::optional<Round> stopRound;
};

// Target wallet for a spend from `source`: another shard with probability
// `crossShard`, otherwise a different wallet of the same shard.
WalletId draw_target(WalletId source, double crossShard, const std::vector<ShardId>& shards,
                     std::uint32_t walletsPerShard, std::mt19937_64& rng);

// Honest clients: every correct shard issues up to txPerShardPerRound
// spends of coins it holds idle.
class WorkloadGenerator {
 public:
  explicit WorkloadGenerator(WorkloadSpec spec) : spec_(spec) {}
  void act(Simulation& sim);
  std::uint64_t issued() const { return issued_; }

 private:
  WorkloadSpec spec_;
  std::uint64_t issued_ = 0;
};

// A fixed list of transfers, replayed so that each coin's transfers run one
// after another in list order.
struct ScriptedTransfer {
  CoinId coin;
  WalletId from;
  WalletId to;
};

std::vector<ScriptedTransfer> make_script(const std::vector<std::pair<CoinId, WalletId>>& owners,
                                          std::size_t count, double crossShard,
                                          std::uint32_t shards, std::uint32_t walletsPerShard,
                                          std::mt19937_64& rng);

class ScriptedWorkload {
 public:
  explicit ScriptedWorkload(std::vector<ScriptedTransfer> script);
  void act(Simulation& sim);
  bool finished() const { return submitted_ == script_.size(); }
  std::size_t submitted() const { return submitted_; }

 private:
  std::vector<ScriptedTransfer> script_;
  std::unordered_map<CoinId, std::deque<std::size_t>> queues_;
  std::size_t submitted_ = 0;
};

}  // namespace trail
