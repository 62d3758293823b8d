#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "trail/domain.hpp"

namespace trail {

class Simulation;

// `t` distinct shards with `first` leading; the rest drawn uniformly.
Trail random_committee(ShardId first, std::uint32_t t, std::uint32_t S, std::mt19937_64& rng);

Transaction make_transfer(CoinId coin, WalletId from, WalletId to);
Transaction make_split(CoinId coin, WalletId owner, std::vector<CoinId> children);
Transaction make_merge(CoinId a, CoinId b, WalletId owner, CoinId merged);
Transaction make_mint(CoinId coin, WalletId owner, Trail committee);

// Installs the initial coins: coinsPerWallet coins in every wallet, each
// born by a mint record held by a random committee led by its shard.
// Returns the birth records in creation order.
std::vector<LedgerRecord> bootstrap_genesis(Simulation& sim);

struct MergeState {
  CoinId first;
  CoinId second;
  WalletId wallet;             // where both coins currently sit
  std::uint32_t jointHops = 0;
  std::uint32_t required = 0;  // t
  std::optional<TxId> hopA;
  std::optional<TxId> hopB;
  std::optional<TxId> finalTx;
  CoinId output;  // id reserved for the merged coin
  std::optional<CoinId> merged;
  bool aborted = false;

  bool done() const { return merged.has_value(); }
  bool active() const { return !aborted && !done(); }
};

// Drives merges: both coins move together to fresh shards until they have
// travelled t hops jointly, after which one merge transaction replaces them.
// Spending either coin on its own aborts the merge.
class MergeTracker {
 public:
  // Returns the merge index, or nothing when the coins do not share a
  // wallet that the observer considers idle.
  std::optional<std::size_t> begin(Simulation& sim, CoinId a, CoinId b);
  // Call once per round after message delivery.
  void drive(Simulation& sim);

  const std::vector<MergeState>& merges() const { return merges_; }

 private:
  void scan_confirmations(Simulation& sim);
  void launch_hop(Simulation& sim, MergeState& m);

  std::vector<MergeState> merges_;
  std::size_t confirmationsSeen_ = 0;
};

// A coin lifecycle event scheduled by the scenario configuration.
struct CoinEvent {
  Round round = 0;
  TxKind kind = TxKind::split;  // split, merge or mint
  std::uint32_t parts = 2;      // split fan-out
  std::optional<ShardId> shard; // where to act; random when empty
};

// Executes scheduled split/merge/mint events on idle coins.
class CoinEventScheduler {
 public:
  CoinEventScheduler(std::vector<CoinEvent> events, std::uint64_t seed);
  void act(Simulation& sim);

  const MergeTracker& merges() const { return merges_; }
  std::uint64_t issued() const { return issued_; }

 private:
  std::vector<CoinEvent> events_;
  std::mt19937_64 rng_;
  MergeTracker merges_;
  std::uint64_t issued_ = 0;
};

}  // namespace trail
