#include "trail/workload.hpp"

#include "trail/coinops.hpp"
#include "trail/simulation.hpp"

namespace trail {

WalletId draw_target(WalletId source, double crossShard, const std::vector<ShardId>& shards,
                     std::uint32_t walletsPerShard, std::mt19937_64& rng) {
  std::bernoulli_distribution cross(crossShard);
  std::uniform_int_distribution<std::uint32_t> walletPick(0, walletsPerShard - 1);
  std::vector<ShardId> others;
  for (ShardId s : shards) {
    if (s != source.shard) others.push_back(s);
  }
  const bool wantCross = cross(rng);
  if ((wantCross || walletsPerShard < 2) && !others.empty()) {
    std::uniform_int_distribution<std::size_t> shardPick(0, others.size() - 1);
    return WalletId{others[shardPick(rng)], walletPick(rng)};
  }
  std::uniform_int_distribution<std::uint32_t> otherWallet(0, walletsPerShard - 2);
  std::uint32_t idx = otherWallet(rng);
  if (idx >= source.index) ++idx;
  return WalletId{source.shard, idx};
}

void WorkloadGenerator::act(Simulation& sim) {
  if (spec_.stopRound && sim.now() > *spec_.stopRound) return;
  auto& rng = sim.rng(RngStream::workload);
  const std::vector<ShardId> targets = sim.live_shards();
  const std::uint32_t W = sim.wallets().wallets_per_shard();
  for (ShardId s : sim.correct_shards()) {
    IdleCoins& idle = sim.observer().idle(s);
    for (std::uint32_t k = 0; k < spec_.txPerShardPerRound && !idle.empty(); ++k) {
      const auto [coin, wallet] = idle.take_random(rng);
      sim.submit(make_transfer(coin, wallet,
                               draw_target(wallet, spec_.crossShardProbability, targets, W, rng)));
      ++issued_;
    }
  }
}

std::vector<ScriptedTransfer> make_script(const std::vector<std::pair<CoinId, WalletId>>& owners,
                                          std::size_t count, double crossShard,
                                          std::uint32_t shards, std::uint32_t walletsPerShard,
                                          std::mt19937_64& rng) {
  std::vector<ShardId> all;
  for (std::uint32_t s = 0; s < shards; ++s) all.push_back(ShardId{s});
  std::vector<std::pair<CoinId, WalletId>> state = owners;
  std::vector<ScriptedTransfer> script;
  if (state.empty()) return script;
  std::uniform_int_distribution<std::size_t> coinPick(0, state.size() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    auto& [coin, owner] = state[coinPick(rng)];
    const WalletId to = draw_target(owner, crossShard, all, walletsPerShard, rng);
    script.push_back({coin, owner, to});
    owner = to;
  }
  return script;
}

ScriptedWorkload::ScriptedWorkload(std::vector<ScriptedTransfer> script)
    : script_(std::move(script)) {
  for (std::size_t i = 0; i < script_.size(); ++i) queues_[script_[i].coin].push_back(i);
}

void ScriptedWorkload::act(Simulation& sim) {
  // Scan in script order so submission order is reproducible.
  for (std::size_t i = 0; i < script_.size(); ++i) {
    const ScriptedTransfer& st = script_[i];
    auto& queue = queues_[st.coin];
    if (queue.empty() || queue.front() != i) continue;
    IdleCoins& idle = sim.observer().idle(st.from.shard);
    if (idle.wallet_of(st.coin) != st.from) continue;
    idle.remove(st.coin);
    queue.pop_front();
    sim.submit(make_transfer(st.coin, st.from, st.to));
    ++submitted_;
  }
}

}  // namespace trail
