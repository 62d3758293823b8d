#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trail/coinops.hpp"
#include "trail/faults.hpp"
#include "trail/ledger.hpp"
#include "trail/observer.hpp"
#include "trail/simple_trail.hpp"
#include "trail/simulation.hpp"
#include "trail/workload.hpp"

namespace trail {

enum class ScenarioMode : std::uint8_t { dynamics, throughput, mttf, oracle_compare };

const char* to_string(ScenarioMode m);
const char* to_string(Validation v);

struct ThroughputSweep {
  std::vector<std::uint32_t> shardCounts{4, 8, 16, 32};
  std::vector<std::uint32_t> faultTolerances{0, 1, 2};
};

struct MttfSweep {
  std::uint32_t totalPeers = 160;
  std::vector<std::uint32_t> shardCounts{8, 16, 32};
  std::vector<std::uint32_t> faultTolerances{0, 1, 2};
  std::vector<std::optional<Round>> detectionDelays{std::nullopt};
};

struct ScenarioConfig {
  std::string name = "scenario";
  ScenarioMode mode = ScenarioMode::dynamics;
  Params params{2, 1, 7, 4, 10};
  Round rounds = 200;
  WorkloadSpec workload;
  FaultPlan faultPlan;
  // Byzantine shards drawn per replicate when no explicit list is given.
  std::uint32_t byzantineShardCount = 0;
  Validation validation = Validation::on;
  std::uint64_t seed = 1;
  std::uint32_t replicates = 1;
  std::uint32_t walletsPerShard = 10;
  std::uint32_t coinsPerWallet = 5;
  Round internalTimeout = 10;
  Round externalTimeout = 40;
  Round maxDelay = 1;
  bool clientEscalation = true;
  std::vector<CoinEvent> events;
  ThroughputSweep throughput;
  MttfSweep mttf;
  std::uint32_t oracleTransactions = 200;
};

// Parses a scenario; unknown keys and out-of-range values raise
// ConfigurationError naming the offending field.
ScenarioConfig parse_scenario(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
// Every problem with the configuration; empty when it can run.
std::vector<std::string> validate_scenario(const ScenarioConfig& cfg);

struct NamedScenario {
  std::string name;
  std::string description;
  ScenarioConfig config;
};
std::vector<NamedScenario> builtin_presets();
std::optional<ScenarioConfig> find_preset(const std::string& name);

// Seed of replicate k (0-based).
inline std::uint64_t replicate_seed(const ScenarioConfig& cfg, std::uint32_t k) {
  return cfg.seed + k;
}

SimulationConfig simulation_config(const ScenarioConfig& cfg, std::uint64_t seed);

struct ReplicateResult {
  std::uint64_t seed = 0;
  std::vector<ShardId> byzantineShards;
  std::vector<MetricsFrame> frames;
  std::vector<LedgerRecord> unionLedger;
  std::optional<ContinuityViolation> violation;
  std::uint64_t startedTotal = 0;
  std::uint64_t confirmedTotal = 0;
  std::uint64_t confirmedExternal = 0;
  std::uint64_t maliciousConfirmed = 0;
  std::uint64_t maliciousIssued = 0;
  std::uint64_t envelopes = 0;
  std::size_t inFlightAtEnd = 0;
  bool conservationHeld = true;

  // A safety breach: a malicious confirmation or a broken ownership chain
  // while trail validation is on.
  bool safety_violated(Validation v) const;
};

ReplicateResult run_replicate(const ScenarioConfig& cfg, std::uint64_t seed);
// All replicates, run in parallel; results are ordered by replicate.
std::vector<ReplicateResult> run_replicates(const ScenarioConfig& cfg);

// Per-round means over replicates of equal length, same columns as the
// per-replicate files.
void write_mean_csv(std::ostream& out, const std::vector<ReplicateResult>& results);

std::string frames_csv_header();
void write_frames_csv(std::ostream& out, const std::vector<MetricsFrame>& frames);
std::string ledger_csv_header();
void write_ledger_csv(std::ostream& out, const std::vector<LedgerRecord>& records);
std::vector<LedgerRecord> read_ledger_csv(std::istream& in);

struct ThroughputPoint {
  std::uint32_t shardCount = 0;
  std::uint32_t F = 0;
  std::uint32_t replicate = 0;
  double throughput = 0.0;  // confirmed transactions per round
  double internalPerRound = 0.0;
  double externalPerRound = 0.0;
};

struct ThroughputResult {
  std::vector<ThroughputPoint> points;
  // (shardCount, F) combinations skipped because t = 3F+1 exceeds S.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> infeasible;
  double mean(std::uint32_t shardCount, std::uint32_t F) const;
};

ThroughputResult run_throughput(const ScenarioConfig& cfg);
void write_throughput_csv(std::ostream& out, const ThroughputResult& r);

struct MttfSample {
  std::uint32_t shardCount = 0;
  std::uint32_t F = 0;
  std::optional<Round> detectionDelay;
  std::uint32_t replicate = 0;
  Round failureRound = 0;
};

std::vector<MttfSample> run_mttf(const ScenarioConfig& cfg);
void write_mttf_csv(std::ostream& out, const std::vector<MttfSample>& samples);
// Samples of one configuration in replicate order.
std::vector<double> mttf_series(const std::vector<MttfSample>& samples, std::uint32_t shardCount,
                                std::uint32_t F, std::optional<Round> d);

struct SignTest {
  std::uint32_t wins = 0;
  std::uint32_t losses = 0;
  std::uint32_t ties = 0;
  double pValue = 1.0;
};

// One-sided paired sign test of "a > b": ties are discarded and the
// p-value is the binomial tail P(X >= wins) with X ~ Bin(wins+losses, 1/2).
SignTest sign_test_greater(const std::vector<double>& a, const std::vector<double>& b);

struct OracleComparison {
  std::uint64_t seed = 0;
  std::size_t transfers = 0;
  std::size_t confirmedByTrail = 0;
  std::size_t confirmedByOracle = 0;
  std::size_t coinsCompared = 0;
  bool identical = false;
  std::string firstDifference;
};

// Full-protocol sequences per coin from the union ledger of correct peers.
CoinSequences sequences_from_ledger(const std::vector<LedgerRecord>& unionLedger);
OracleComparison compare_with_oracle(const ScenarioConfig& cfg, std::uint64_t seed);

struct ComplexityPoint {
  std::uint32_t s = 0;
  std::uint32_t t = 0;
  std::uint64_t envelopes = 0;
  std::uint64_t confirmedExternal = 0;
  std::uint64_t startedTotal = 0;
  std::size_t inFlightAtEnd = 0;
  double perTransaction = 0.0;
  double ratio = 0.0;  // perTransaction / (s^2 t^2)
};

// Fault-free run with only cross-shard transfers and a workload that stops
// early, so the network is quiet when counting.
ComplexityPoint measure_message_complexity(std::uint32_t s, std::uint32_t t, std::uint64_t seed);

}  // namespace trail
