#include "trail/faults.hpp"

#include <algorithm>
#include <numeric>

#include "trail/simulation.hpp"

namespace trail {

WalletId recovery_wallet(CoinId coin, const std::vector<ShardId>& liveShards,
                         std::uint32_t walletsPerShard) {
  if (liveShards.empty() || walletsPerShard == 0) {
    throw ConfigurationError("no live shard can host a recovered wallet");
  }
  std::vector<ShardId> sorted = liveShards;
  std::sort(sorted.begin(), sorted.end());
  const std::uint64_t h = mix64(coin.value ^ 0x5245434f56455259ull);
  const ShardId shard = sorted[h % sorted.size()];
  const auto index = static_cast<std::uint32_t>(mix64(h) % walletsPerShard);
  return WalletId{shard, index};
}

ShardFailureModel::ShardFailureModel(const FailureModelSetup& setup, std::uint64_t seed)
    : setup_(setup) {
  if (setup.shardCount == 0 || setup.totalPeers % setup.shardCount != 0) {
    throw ConfigurationError("peer count must split evenly into shards");
  }
  shardSize_ = setup.totalPeers / setup.shardCount;
  f_ = (shardSize_ - 1) / 3;
  order_.resize(setup.totalPeers);
  std::iota(order_.begin(), order_.end(), 0u);
  std::mt19937_64 rng(seed);
  std::shuffle(order_.begin(), order_.end(), rng);
  failedPeers_.assign(setup.shardCount, 0);
  faultyAt_.assign(setup.shardCount, std::nullopt);
  removed_.assign(setup.shardCount, false);
}

void ShardFailureModel::remove_detected() {
  if (!setup_.detectionDelay) return;
  for (std::uint32_t s = 0; s < setup_.shardCount; ++s) {
    if (removed_[s] || !faultyAt_[s]) continue;
    if (*faultyAt_[s] + *setup_.detectionDelay <= round_) {
      removed_[s] = true;
      ++removedCount_;
    }
  }
}

bool ShardFailureModel::fail_next_peer() {
  while (next_ < order_.size()) {
    const std::uint32_t p = order_[next_++];
    const std::uint32_t s = p / shardSize_;
    if (removed_[s]) continue;
    if (++failedPeers_[s] == f_ + 1) faultyAt_[s] = round_;
    return true;
  }
  return false;
}

bool ShardFailureModel::check_failed() {
  std::uint32_t faulty = 0;
  for (std::uint32_t s = 0; s < setup_.shardCount; ++s) {
    if (faultyAt_[s] && !removed_[s]) ++faulty;
  }
  status_.update(faulty, setup_.F);
  if (removedCount_ == setup_.shardCount) status_.failed = true;
  return status_.failed;
}

bool ShardFailureModel::step() {
  if (status_.failed) return true;
  ++round_;
  // Shards detected in an earlier round leave before this round's failures.
  remove_detected();
  for (std::uint32_t k = 0; k < setup_.peersPerRound; ++k) {
    if (!fail_next_peer()) {
      exhausted_ = true;
      status_.failed = true;
      return true;
    }
  }
  if (setup_.detectionDelay && *setup_.detectionDelay == 0) remove_detected();
  return check_failed();
}

FailureOutcome ShardFailureModel::run() {
  while (!step()) {
  }
  return FailureOutcome{round_, status_.faultyShardCount, removedCount_, exhausted_};
}

double expected_first_shard_failure(std::uint32_t shards, std::uint32_t shardSize,
                                    std::uint32_t f) {
  // ways[k] = number of k-subsets of failed peers leaving every shard with
  // at most f failures: coefficients of (sum_{j<=f} C(s,j) x^j)^shards.
  auto choose = [](std::uint32_t n, std::uint32_t k) {
    double r = 1.0;
    for (std::uint32_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  std::vector<double> per(f + 1);
  for (std::uint32_t j = 0; j <= f; ++j) per[j] = choose(shardSize, j);
  std::vector<double> ways{1.0};
  for (std::uint32_t s = 0; s < shards; ++s) {
    std::vector<double> next(ways.size() + f, 0.0);
    for (std::size_t a = 0; a < ways.size(); ++a) {
      for (std::uint32_t j = 0; j <= f; ++j) next[a + j] += ways[a] * per[j];
    }
    ways = std::move(next);
  }
  const std::uint32_t total = shards * shardSize;
  double expected = 0.0;
  for (std::size_t k = 0; k < ways.size(); ++k) {
    expected += ways[k] / choose(total, static_cast<std::uint32_t>(k));
  }
  return expected;
}

Adversary::Adversary(std::uint32_t txPerShardPerRound, std::uint64_t seed)
    : rate_(txPerShardPerRound), rng_(seed) {}

void Adversary::act(Simulation& sim) {
  const FaultPlan& plan = sim.config().faults;
  if (sim.now() < plan.failRound) return;
  const std::vector<ShardId> live = sim.live_shards();
  const std::uint32_t W = sim.wallets().wallets_per_shard();
  for (ShardId x : plan.byzantineShards) {
    if (!sim.shard_byzantine(x) || sim.shard_removed(x)) continue;
    auto& spent = sim.observer().spent_from(x);
    std::vector<ShardId> targets;
    for (ShardId s : live) {
      if (s != x) targets.push_back(s);
    }
    if (targets.empty()) continue;
    for (std::uint32_t k = 0; k < rate_ && !spent.empty(); ++k) {
      std::uniform_int_distribution<std::size_t> pick(0, spent.size() - 1);
      const std::size_t i = pick(rng_);
      const auto [coin, wallet] = spent[i];
      spent[i] = spent.back();
      spent.pop_back();
      // A coin that has since come back to the same wallet is owned again;
      // spending it would not be a double spend.
      if (sim.observer().rightful_owner(coin) == wallet) continue;

      Transaction tx;
      tx.id = (std::uint64_t{1} << 62) | ++issued_ | (std::uint64_t{x.value} << 40);
      tx.kind = TxKind::external;
      tx.coin = coin;
      tx.sWallet = wallet;
      std::uniform_int_distribution<std::size_t> shardPick(0, targets.size() - 1);
      std::uniform_int_distribution<std::uint32_t> walletPick(0, W - 1);
      tx.tWallet = WalletId{targets[shardPick(rng_)], walletPick(rng_)};
      tx.honest = false;
      sim.mark_coalition(tx.id);
      sim.submit(std::move(tx));
    }
  }
}

}  // namespace trail
