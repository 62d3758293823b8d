#pragma once

#include <functional>
#include <memory>
#include <random>
#include <unordered_set>
#include <vector>

#include "trail/faults.hpp"
#include "trail/netsim.hpp"
#include "trail/observer.hpp"
#include "trail/protocol_host.hpp"

namespace trail {

class Peer;

struct SimulationConfig {
  ProtocolConfig protocol;
  std::uint32_t walletsPerShard = 10;
  std::uint32_t coinsPerWallet = 5;
  DelayModel delay;
  std::uint64_t seed = 1;
  FaultPlan faults;
  // Clients hand requests that went unanswered for one external timeout to
  // the coin's trail.
  bool clientEscalation = true;
};

// Independent random streams derived from one seed, so adding faults does
// not perturb the workload and vice versa.
enum class RngStream : std::uint32_t { bootstrap = 1, workload = 2, faults = 3, network = 4 };
std::mt19937_64 make_stream(std::uint64_t seed, RngStream stream);

// The whole simulated network: peers, channels, fault injection and the
// global observer, advanced one synchronous round at a time.
class Simulation {
 public:
  explicit Simulation(SimulationConfig cfg);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const SimulationConfig& config() const { return cfg_; }
  const Params& params() const { return cfg_.protocol.params; }
  const WalletDirectory& wallets() const { return wallets_; }
  Round now() const { return round_; }

  Network& network() { return network_; }
  const Network& network() const { return network_; }
  Observer& observer() { return observer_; }
  const Observer& observer() const { return observer_; }
  Peer& peer(PeerId id);
  const Peer& peer(PeerId id) const;
  std::size_t peer_count() const { return peers_.size(); }
  std::mt19937_64& rng(RngStream stream);

  // Writes a record straight into every peer of the given shards; used for
  // the genesis state.
  void install_record(const Trail& holders, const LedgerRecord& r);
  CoinId allocate_coin() { return CoinId{nextCoin_++}; }

  // Hands a client request to the peers of its origin shard. A zero id is
  // replaced by a fresh one.
  TxPtr submit(Transaction tx);
  void mark_coalition(TxId id) { coalition_.insert(id); }
  bool is_coalition(const Transaction& tx) const { return coalition_.count(tx.id) != 0; }

  // Hooks run every round after message delivery, in registration order.
  void add_round_hook(std::function<void(Simulation&)> hook);
  MetricsFrame step();
  std::vector<MetricsFrame> run(Round rounds);

  bool shard_byzantine(ShardId s) const { return byzantine_[s.value]; }
  bool shard_removed(ShardId s) const { return network_.is_removed(s); }
  // Shards that behave correctly and are still in service.
  std::vector<ShardId> correct_shards() const;
  std::vector<ShardId> live_shards() const;
  WalletId recovery_target(CoinId coin) const;

  // Ledgers of peers that followed the protocol for the whole run.
  std::vector<const Ledger*> correct_ledgers() const;
  bool peer_correct(PeerId id) const;

 private:
  void apply_faults();
  void remove_shard(ShardId s);

  SimulationConfig cfg_;
  WalletDirectory wallets_;
  Network network_;
  Observer observer_;
  std::vector<std::unique_ptr<Peer>> peers_;
  std::vector<bool> byzantine_;
  std::vector<bool> everByzantine_;
  std::unordered_set<TxId> coalition_;
  std::vector<std::function<void(Simulation&)>> hooks_;
  std::mt19937_64 bootstrapRng_;
  std::mt19937_64 workloadRng_;
  std::mt19937_64 faultRng_;
  Round round_ = 0;
  std::uint64_t nextCoin_ = 1;
  TxId nextTx_ = 1;
};

}  // namespace trail
