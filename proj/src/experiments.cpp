#include "trail/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "trail/peer.hpp"

namespace trail {

using nlohmann::json;

const char* to_string(ScenarioMode m) {
  switch (m) {
    case ScenarioMode::dynamics: return "dynamics";
    case ScenarioMode::throughput: return "throughput";
    case ScenarioMode::mttf: return "mttf";
    case ScenarioMode::oracle_compare: return "oracle";
  }
  return "?";
}

const char* to_string(Validation v) {
  switch (v) {
    case Validation::off: return "off";
    case Validation::on: return "on";
    case Validation::on_recovery: return "on+recovery";
  }
  return "?";
}

namespace {

ScenarioMode parse_mode(const std::string& s) {
  if (s == "dynamics") return ScenarioMode::dynamics;
  if (s == "throughput") return ScenarioMode::throughput;
  if (s == "mttf") return ScenarioMode::mttf;
  if (s == "oracle") return ScenarioMode::oracle_compare;
  throw ConfigurationError("mode: unknown value '" + s + "'");
}

Validation parse_validation(const std::string& s) {
  if (s == "off") return Validation::off;
  if (s == "on") return Validation::on;
  if (s == "on+recovery") return Validation::on_recovery;
  throw ConfigurationError("validation: unknown value '" + s + "'");
}

TxKind parse_event_kind(const std::string& s) {
  if (s == "split") return TxKind::split;
  if (s == "merge") return TxKind::merge;
  if (s == "mint") return TxKind::mint;
  throw ConfigurationError("events.kind: unknown value '" + s + "'");
}

PeerBehavior parse_behavior(const std::string& s) {
  if (s == "silent") return PeerBehavior::silent;
  if (s == "equivocating") return PeerBehavior::equivocating;
  if (s == "correct") return PeerBehavior::correct;
  throw ConfigurationError("faultPlan.peerFaults.behavior: unknown value '" + s + "'");
}

const char* behavior_name(PeerBehavior b) {
  switch (b) {
    case PeerBehavior::correct: return "correct";
    case PeerBehavior::silent: return "silent";
    case PeerBehavior::equivocating: return "equivocating";
  }
  return "?";
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigurationError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return it.key() == k; });
    if (!known) {
      throw ConfigurationError("unknown key '" + (where.empty() ? "" : where + ".") + it.key() +
                               "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigurationError((where.empty() ? "" : where + ".") + key + ": " + e.what());
  }
}

std::optional<Round> parse_delay(const json& v) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_number_integer() || v.get<Round>() < 0) {
    throw ConfigurationError("mttf.detectionDelays: expected null or a non-negative integer");
  }
  return v.get<Round>();
}

}  // namespace

ScenarioConfig parse_scenario(const json& j) {
  reject_unknown(j,
                 {"name", "mode", "params", "rounds", "crossShardProbability",
                  "txPerShardPerRound", "workloadStopRound", "faultPlan", "validation", "seed",
                  "replicates", "walletsPerShard", "coinsPerWallet", "internalTimeout",
                  "externalTimeout", "maxDelay", "clientEscalation", "events", "throughput",
                  "mttf", "oracleTransactions"},
                 "");
  ScenarioConfig c;
  read(j, "name", c.name, "");
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m, "");
    c.mode = parse_mode(m);
  }
  if (j.contains("params")) {
    const json& p = j.at("params");
    reject_unknown(p, {"f", "F", "s", "t", "S"}, "params");
    read(p, "f", c.params.f, "params");
    read(p, "F", c.params.F, "params");
    read(p, "s", c.params.s, "params");
    read(p, "t", c.params.t, "params");
    read(p, "S", c.params.S, "params");
  }
  read(j, "rounds", c.rounds, "");
  read(j, "crossShardProbability", c.workload.crossShardProbability, "");
  read(j, "txPerShardPerRound", c.workload.txPerShardPerRound, "");
  if (j.contains("workloadStopRound") && !j.at("workloadStopRound").is_null()) {
    Round r = 0;
    read(j, "workloadStopRound", r, "");
    c.workload.stopRound = r;
  }
  if (j.contains("faultPlan")) {
    const json& f = j.at("faultPlan");
    reject_unknown(f,
                   {"byzantineShards", "byzantineShardCount", "failRound", "detectionDelay",
                    "peerFaults", "peerFailureRate"},
                   "faultPlan");
    std::vector<std::uint32_t> shards;
    read(f, "byzantineShards", shards, "faultPlan");
    for (std::uint32_t s : shards) c.faultPlan.byzantineShards.push_back(ShardId{s});
    read(f, "byzantineShardCount", c.byzantineShardCount, "faultPlan");
    read(f, "failRound", c.faultPlan.failRound, "faultPlan");
    read(f, "detectionDelay", c.faultPlan.detectionDelay, "faultPlan");
    read(f, "peerFailureRate", c.faultPlan.peerFailureRate, "faultPlan");
    if (f.contains("peerFaults")) {
      if (!f.at("peerFaults").is_array()) {
        throw ConfigurationError("faultPlan.peerFaults: expected an array");
      }
      for (const json& pf : f.at("peerFaults")) {
        reject_unknown(pf, {"shard", "index", "behavior"}, "faultPlan.peerFaults");
        PeerFault fault;
        read(pf, "shard", fault.peer.shard.value, "faultPlan.peerFaults");
        read(pf, "index", fault.peer.index, "faultPlan.peerFaults");
        std::string b = "silent";
        read(pf, "behavior", b, "faultPlan.peerFaults");
        fault.behavior = parse_behavior(b);
        c.faultPlan.peerFaults.push_back(fault);
      }
    }
  }
  if (j.contains("validation")) {
    std::string v;
    read(j, "validation", v, "");
    c.validation = parse_validation(v);
  }
  read(j, "seed", c.seed, "");
  read(j, "replicates", c.replicates, "");
  read(j, "walletsPerShard", c.walletsPerShard, "");
  read(j, "coinsPerWallet", c.coinsPerWallet, "");
  read(j, "internalTimeout", c.internalTimeout, "");
  read(j, "externalTimeout", c.externalTimeout, "");
  read(j, "maxDelay", c.maxDelay, "");
  read(j, "clientEscalation", c.clientEscalation, "");
  read(j, "oracleTransactions", c.oracleTransactions, "");
  if (j.contains("events")) {
    if (!j.at("events").is_array()) throw ConfigurationError("events: expected an array");
    for (const json& e : j.at("events")) {
      reject_unknown(e, {"round", "kind", "parts", "shard"}, "events");
      CoinEvent ev;
      read(e, "round", ev.round, "events");
      std::string kind = "split";
      read(e, "kind", kind, "events");
      ev.kind = parse_event_kind(kind);
      read(e, "parts", ev.parts, "events");
      if (e.contains("shard") && !e.at("shard").is_null()) {
        std::uint32_t s = 0;
        read(e, "shard", s, "events");
        ev.shard = ShardId{s};
      }
      c.events.push_back(ev);
    }
  }
  if (j.contains("throughput")) {
    const json& t = j.at("throughput");
    reject_unknown(t, {"shardCounts", "faultTolerances"}, "throughput");
    read(t, "shardCounts", c.throughput.shardCounts, "throughput");
    read(t, "faultTolerances", c.throughput.faultTolerances, "throughput");
  }
  if (j.contains("mttf")) {
    const json& m = j.at("mttf");
    reject_unknown(m, {"totalPeers", "shardCounts", "faultTolerances", "detectionDelays"},
                   "mttf");
    read(m, "totalPeers", c.mttf.totalPeers, "mttf");
    read(m, "shardCounts", c.mttf.shardCounts, "mttf");
    read(m, "faultTolerances", c.mttf.faultTolerances, "mttf");
    if (m.contains("detectionDelays")) {
      if (!m.at("detectionDelays").is_array()) {
        throw ConfigurationError("mttf.detectionDelays: expected an array");
      }
      c.mttf.detectionDelays.clear();
      for (const json& d : m.at("detectionDelays")) c.mttf.detectionDelays.push_back(parse_delay(d));
    }
  }
  const auto problems = validate_scenario(c);
  if (!problems.empty()) throw ConfigurationError(problems.front());
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigurationError(path + ": " + e.what());
  }
  return parse_scenario(j);
}

json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["mode"] = to_string(c.mode);
  j["params"] = {{"f", c.params.f}, {"F", c.params.F}, {"s", c.params.s},
                 {"t", c.params.t}, {"S", c.params.S}};
  j["rounds"] = c.rounds;
  j["crossShardProbability"] = c.workload.crossShardProbability;
  j["txPerShardPerRound"] = c.workload.txPerShardPerRound;
  j["workloadStopRound"] =
      c.workload.stopRound ? json(*c.workload.stopRound) : json(nullptr);
  json fp;
  std::vector<std::uint32_t> shards;
  for (ShardId s : c.faultPlan.byzantineShards) shards.push_back(s.value);
  fp["byzantineShards"] = shards;
  fp["byzantineShardCount"] = c.byzantineShardCount;
  fp["failRound"] = c.faultPlan.failRound;
  fp["detectionDelay"] = c.faultPlan.detectionDelay;
  fp["peerFailureRate"] = c.faultPlan.peerFailureRate;
  json faults = json::array();
  for (const PeerFault& pf : c.faultPlan.peerFaults) {
    faults.push_back({{"shard", pf.peer.shard.value},
                      {"index", pf.peer.index},
                      {"behavior", behavior_name(pf.behavior)}});
  }
  fp["peerFaults"] = faults;
  j["faultPlan"] = fp;
  j["validation"] = to_string(c.validation);
  j["seed"] = c.seed;
  j["replicates"] = c.replicates;
  j["walletsPerShard"] = c.walletsPerShard;
  j["coinsPerWallet"] = c.coinsPerWallet;
  j["internalTimeout"] = c.internalTimeout;
  j["externalTimeout"] = c.externalTimeout;
  j["maxDelay"] = c.maxDelay;
  j["clientEscalation"] = c.clientEscalation;
  json events = json::array();
  for (const CoinEvent& e : c.events) {
    events.push_back({{"round", e.round},
                      {"kind", to_string(e.kind)},
                      {"parts", e.parts},
                      {"shard", e.shard ? json(e.shard->value) : json(nullptr)}});
  }
  j["events"] = events;
  j["throughput"] = {{"shardCounts", c.throughput.shardCounts},
                     {"faultTolerances", c.throughput.faultTolerances}};
  json delays = json::array();
  for (const auto& d : c.mttf.detectionDelays) delays.push_back(d ? json(*d) : json(nullptr));
  j["mttf"] = {{"totalPeers", c.mttf.totalPeers},
               {"shardCounts", c.mttf.shardCounts},
               {"faultTolerances", c.mttf.faultTolerances},
               {"detectionDelays", delays}};
  j["oracleTransactions"] = c.oracleTransactions;
  return j;
}

std::vector<std::string> validate_scenario(const ScenarioConfig& c) {
  std::vector<std::string> out;
  if (c.replicates == 0) out.push_back("replicates: must be at least 1");
  if (c.mode == ScenarioMode::mttf) {
    if (c.mttf.shardCounts.empty()) out.push_back("mttf.shardCounts: must not be empty");
    for (std::uint32_t S : c.mttf.shardCounts) {
      if (S == 0 || c.mttf.totalPeers % S != 0) {
        out.push_back("mttf.shardCounts: " + std::to_string(S) + " does not divide totalPeers " +
                      std::to_string(c.mttf.totalPeers));
      }
    }
    if (c.mttf.detectionDelays.empty()) out.push_back("mttf.detectionDelays: must not be empty");
    if (c.faultPlan.peerFailureRate == 0) out.push_back("faultPlan.peerFailureRate: must be positive");
    return out;
  }
  if (c.rounds <= 0) out.push_back("rounds: must be positive");
  if (!(c.workload.crossShardProbability >= 0.0 && c.workload.crossShardProbability <= 1.0)) {
    out.push_back("crossShardProbability: must lie in [0, 1]");
  }
  if (c.walletsPerShard == 0) out.push_back("walletsPerShard: must be positive");
  if (c.coinsPerWallet == 0) out.push_back("coinsPerWallet: must be positive");
  if (c.internalTimeout <= 0) out.push_back("internalTimeout: must be positive");
  if (c.externalTimeout <= 0) out.push_back("externalTimeout: must be positive");
  if (c.maxDelay <= 0) out.push_back("maxDelay: must be positive");
  if (c.mode == ScenarioMode::throughput) {
    if (c.params.s == 0 || c.params.s < 3 * c.params.f + 1) {
      out.push_back("params.s: must be at least 3f+1");
    }
    if (c.throughput.shardCounts.empty()) out.push_back("throughput.shardCounts: must not be empty");
    return out;
  }
  for (const ParamViolation& v : validate_params(c.params)) {
    out.push_back("params: " + v.constraint + " violated (" + v.detail + ")");
  }
  for (ShardId s : c.faultPlan.byzantineShards) {
    if (s.value >= c.params.S) {
      out.push_back("faultPlan.byzantineShards: shard " + std::to_string(s.value) +
                    " does not exist");
    }
  }
  if (c.byzantineShardCount > c.params.S) {
    out.push_back("faultPlan.byzantineShardCount: exceeds the shard count");
  }
  if (c.byzantineShardCount > 0 && !c.faultPlan.byzantineShards.empty()) {
    out.push_back("faultPlan: give either byzantineShards or byzantineShardCount, not both");
  }
  for (const PeerFault& pf : c.faultPlan.peerFaults) {
    if (pf.peer.shard.value >= c.params.S || pf.peer.index >= c.params.s) {
      out.push_back("faultPlan.peerFaults: peer " + std::to_string(pf.peer.shard.value) + "." +
                    std::to_string(pf.peer.index) + " does not exist");
    }
  }
  for (const CoinEvent& e : c.events) {
    if (e.shard && e.shard->value >= c.params.S) out.push_back("events.shard: no such shard");
    if (e.kind == TxKind::split && e.parts < 2) out.push_back("events.parts: split needs 2+");
  }
  return out;
}

namespace {

ScenarioConfig desk_base(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.params = Params{2, 1, 7, 4, 10};
  c.rounds = 200;
  c.seed = 1;
  c.replicates = 10;
  c.faultPlan.failRound = 50;
  c.faultPlan.detectionDelay = 3;
  c.byzantineShardCount = 1;
  return c;
}

ScenarioConfig full_scale(ScenarioConfig c) {
  c.name += "-full";
  c.params = Params{7, 2, 22, 7, 50};
  c.rounds = 500;
  c.faultPlan.failRound = 100;
  c.byzantineShardCount = 2;
  c.replicates = 15;
  return c;
}

}  // namespace

std::vector<NamedScenario> builtin_presets() {
  std::vector<NamedScenario> out;

  ScenarioConfig off = desk_base("validation-off");
  off.validation = Validation::off;
  out.push_back({off.name, "double spends under no cross-shard validation", off});

  ScenarioConfig on = desk_base("validation-on");
  on.validation = Validation::on;
  out.push_back({on.name, "trail validation blocks double spends", on});

  ScenarioConfig rec = desk_base("recovery");
  rec.validation = Validation::on_recovery;
  out.push_back({rec.name, "failed shard removed and its coins recovered", rec});

  ScenarioConfig tp;
  tp.name = "scaling";
  tp.mode = ScenarioMode::throughput;
  tp.params = Params{4, 0, 13, 1, 4};
  tp.rounds = 200;
  tp.replicates = 5;
  out.push_back({tp.name, "throughput against shard count and trail tolerance", tp});

  ScenarioConfig mt;
  mt.name = "failure-time";
  mt.mode = ScenarioMode::mttf;
  mt.replicates = 30;
  out.push_back({mt.name, "rounds until system failure, no detector", mt});

  ScenarioConfig md = mt;
  md.name = "failure-time-detection";
  md.mttf.faultTolerances = {3};
  md.mttf.detectionDelays = {std::nullopt, 0, 3, 6};
  out.push_back({md.name, "rounds until system failure with delayed detection", md});

  ScenarioConfig oc;
  oc.name = "oracle";
  oc.mode = ScenarioMode::oracle_compare;
  oc.params = Params{1, 1, 4, 4, 5};
  oc.replicates = 5;
  oc.rounds = 2000;
  oc.oracleTransactions = 200;
  out.push_back({oc.name, "full protocol against the one-peer-per-shard reference", oc});

  ScenarioConfig lc = desk_base("lifecycle");
  lc.byzantineShardCount = 0;
  lc.replicates = 3;
  lc.events = {{20, TxKind::split, 3, std::nullopt},
               {30, TxKind::merge, 2, std::nullopt},
               {40, TxKind::mint, 2, std::nullopt}};
  out.push_back({lc.name, "split, merge and mint alongside the transfer workload", lc});

  out.push_back({"validation-off-full", "validation-off at full scale", full_scale(off)});
  out.push_back({"validation-on-full", "validation-on at full scale", full_scale(on)});
  out.push_back({"recovery-full", "recovery at full scale", full_scale(rec)});
  ScenarioConfig tpf = tp;
  tpf.name = "scaling-full";
  tpf.params = Params{7, 0, 22, 1, 4};
  tpf.throughput.shardCounts = {4, 8, 16, 32, 50};
  tpf.replicates = 15;
  out.push_back({tpf.name, "scaling at full shard size", tpf});
  ScenarioConfig mtf = mt;
  mtf.name = "failure-time-full";
  mtf.mttf.totalPeers = 1600;
  mtf.mttf.shardCounts = {16, 32, 50, 64, 100};
  out.push_back({mtf.name, "failure time with 1600 peers", mtf});
  return out;
}

std::optional<ScenarioConfig> find_preset(const std::string& name) {
  for (const NamedScenario& n : builtin_presets()) {
    if (n.name == name) return n.config;
  }
  return std::nullopt;
}

SimulationConfig simulation_config(const ScenarioConfig& c, std::uint64_t seed) {
  SimulationConfig sc;
  sc.protocol.params = c.params;
  sc.protocol.validation = c.validation;
  sc.protocol.internalTimeout = c.internalTimeout;
  sc.protocol.externalTimeout = c.externalTimeout;
  sc.walletsPerShard = c.walletsPerShard;
  sc.coinsPerWallet = c.coinsPerWallet;
  sc.delay.maxDelay = c.maxDelay;
  sc.seed = seed;
  sc.faults = c.faultPlan;
  sc.clientEscalation = c.clientEscalation;
  if (c.byzantineShardCount > 0 && sc.faults.byzantineShards.empty()) {
    std::mt19937_64 rng = make_stream(seed, RngStream::faults);
    std::vector<ShardId> all;
    for (std::uint32_t s = 0; s < c.params.S; ++s) all.push_back(ShardId{s});
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(c.byzantineShardCount);
    std::sort(all.begin(), all.end());
    sc.faults.byzantineShards = all;
  }
  return sc;
}

bool ReplicateResult::safety_violated(Validation v) const {
  if (v == Validation::off) return false;
  return maliciousConfirmed > 0 || violation.has_value() || !conservationHeld;
}

namespace {

// Coin counts agree between the observer's running total and its
// event counters, and no coin is spendable in two places at once. Only
// shards whose clients still spend are inspected; a failed shard's idle
// set goes stale once its coins are recovered elsewhere.
bool conservation_holds(const Simulation& sim, std::uint64_t genesis) {
  const Observer& o = sim.observer();
  if (o.live_coins() + o.merges_completed() != genesis + o.minted() + o.split_extra()) {
    return false;
  }
  std::set<CoinId> seen;
  std::size_t idle = 0;
  for (ShardId s : sim.correct_shards()) {
    for (const auto& [coin, wallet] : o.idle(s).entries()) {
      if (!seen.insert(coin).second) return false;
      ++idle;
    }
  }
  return idle <= o.live_coins();
}

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureLock;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failureLock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

ReplicateResult run_replicate(const ScenarioConfig& cfg, std::uint64_t seed) {
  const SimulationConfig sc = simulation_config(cfg, seed);
  Simulation sim(sc);
  const std::vector<LedgerRecord> genesis = bootstrap_genesis(sim);

  WorkloadGenerator workload(cfg.workload);
  std::mt19937_64 seeder = make_stream(seed, RngStream::faults);
  Adversary adversary(cfg.workload.txPerShardPerRound, seeder());
  CoinEventScheduler events(cfg.events, seeder());
  sim.add_round_hook([&](Simulation& s) { workload.act(s); });
  if (!sc.faults.byzantineShards.empty()) {
    sim.add_round_hook([&](Simulation& s) { adversary.act(s); });
  }
  if (!cfg.events.empty()) sim.add_round_hook([&](Simulation& s) { events.act(s); });

  ReplicateResult r;
  r.seed = seed;
  r.byzantineShards = sc.faults.byzantineShards;
  r.frames = sim.run(cfg.rounds);
  r.unionLedger = merge_ledgers(sim.correct_ledgers());
  r.violation = check_ownership_continuity(r.unionLedger);
  r.startedTotal = sim.observer().total_started();
  r.confirmedTotal = sim.observer().total_confirmed();
  r.confirmedExternal = sim.observer().external_confirmed();
  r.maliciousConfirmed = sim.observer().malicious_confirmed();
  r.maliciousIssued = adversary.issued();
  r.envelopes = sim.network().envelopes_sent();
  r.inFlightAtEnd = sim.network().in_flight();
  r.conservationHeld = conservation_holds(sim, genesis.size());
  return r;
}

std::vector<ReplicateResult> run_replicates(const ScenarioConfig& cfg) {
  std::vector<ReplicateResult> out(cfg.replicates);
  parallel_for(cfg.replicates, [&](std::size_t k) {
    out[k] = run_replicate(cfg, replicate_seed(cfg, static_cast<std::uint32_t>(k)));
  });
  return out;
}

namespace {

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string frames_csv_header() {
  std::string h =
      "round,startedHonest,startedTotal,confirmedHonest,confirmedTotal,confirmedInternal,"
      "confirmedExternal,recoveryStarted,meanLatency,compromisedWalletFraction,envelopesSent";
  for (std::size_t k = 0; k < kMessageKinds; ++k) {
    h += ",msg_";
    h += to_string(static_cast<MessageKind>(k));
  }
  return h;
}

void write_frames_csv(std::ostream& out, const std::vector<MetricsFrame>& frames) {
  out << frames_csv_header() << '\n';
  for (const MetricsFrame& f : frames) {
    out << f.round << ',' << f.startedHonest << ',' << f.startedTotal << ',' << f.confirmedHonest
        << ',' << f.confirmedTotal << ',' << f.confirmedInternal << ',' << f.confirmedExternal
        << ',' << f.recoveryStarted << ',' << fixed(f.meanLatency) << ','
        << fixed(f.compromisedWalletFraction) << ',' << f.envelopesSent;
    for (std::uint64_t n : f.perPhase) out << ',' << n;
    out << '\n';
  }
}

void write_mean_csv(std::ostream& out, const std::vector<ReplicateResult>& results) {
  out << frames_csv_header() << '\n';
  if (results.empty()) return;
  std::size_t rounds = results.front().frames.size();
  for (const ReplicateResult& r : results) rounds = std::min(rounds, r.frames.size());
  const double n = static_cast<double>(results.size());
  for (std::size_t i = 0; i < rounds; ++i) {
    std::array<double, 10 + kMessageKinds> acc{};
    for (const ReplicateResult& r : results) {
      const MetricsFrame& f = r.frames[i];
      const double row[10] = {double(f.startedHonest),     double(f.startedTotal),
                              double(f.confirmedHonest),   double(f.confirmedTotal),
                              double(f.confirmedInternal), double(f.confirmedExternal),
                              double(f.recoveryStarted),   f.meanLatency,
                              f.compromisedWalletFraction, double(f.envelopesSent)};
      for (std::size_t k = 0; k < 10; ++k) acc[k] += row[k];
      for (std::size_t k = 0; k < kMessageKinds; ++k) acc[10 + k] += double(f.perPhase[k]);
    }
    out << results.front().frames[i].round;
    for (double v : acc) out << ',' << fixed(v / n);
    out << '\n';
  }
}

std::string ledger_csv_header() { return "round,coin,sWallet,tWallet,seq,trail"; }

void write_ledger_csv(std::ostream& out, const std::vector<LedgerRecord>& records) {
  out << ledger_csv_header() << '\n';
  for (const LedgerRecord& r : records) {
    out << r.round << ',' << r.coin.value << ',' << format_wallet(r.sWallet) << ','
        << format_wallet(r.tWallet) << ',' << r.seq << ',' << format_trail(r.trail) << '\n';
  }
}

std::vector<LedgerRecord> read_ledger_csv(std::istream& in) {
  std::vector<LedgerRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (line != ledger_csv_header()) {
    throw ConfigurationError("ledger file: unexpected header '" + line + "'");
  }
  std::size_t lineNo = 1;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) {
      throw ConfigurationError("ledger file line " + std::to_string(lineNo) +
                               ": expected 6 fields");
    }
    try {
      LedgerRecord r;
      r.round = std::stoll(cells[0]);
      r.coin = CoinId{std::stoull(cells[1])};
      r.sWallet = parse_wallet(cells[2]);
      r.tWallet = parse_wallet(cells[3]);
      r.seq = std::stoull(cells[4]);
      r.trail = parse_trail(cells[5]);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ConfigurationError("ledger file line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  return out;
}

double ThroughputResult::mean(std::uint32_t shardCount, std::uint32_t F) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const ThroughputPoint& p : points) {
    if (p.shardCount == shardCount && p.F == F) {
      sum += p.throughput;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

ThroughputResult run_throughput(const ScenarioConfig& cfg) {
  ThroughputResult result;
  struct Job {
    std::uint32_t S, F, k;
  };
  std::vector<Job> jobs;
  for (std::uint32_t S : cfg.throughput.shardCounts) {
    for (std::uint32_t F : cfg.throughput.faultTolerances) {
      if (3 * F + 1 > S) {
        result.infeasible.emplace_back(S, F);
        continue;
      }
      for (std::uint32_t k = 0; k < cfg.replicates; ++k) jobs.push_back({S, F, k});
    }
  }
  result.points.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const Job& job = jobs[i];
    ScenarioConfig c = cfg;
    c.mode = ScenarioMode::dynamics;
    c.params = Params{(cfg.params.s - 1) / 3, job.F, cfg.params.s, 3 * job.F + 1, job.S};
    c.faultPlan = FaultPlan{};
    c.byzantineShardCount = 0;
    c.events.clear();
    const ReplicateResult r = run_replicate(c, replicate_seed(cfg, job.k));
    std::uint64_t internal = 0;
    for (const MetricsFrame& f : r.frames) internal += f.confirmedInternal;
    const double rounds = static_cast<double>(cfg.rounds);
    result.points[i] = ThroughputPoint{job.S,
                                       job.F,
                                       job.k,
                                       static_cast<double>(r.confirmedTotal) / rounds,
                                       static_cast<double>(internal) / rounds,
                                       static_cast<double>(r.confirmedExternal) / rounds};
  });
  return result;
}

void write_throughput_csv(std::ostream& out, const ThroughputResult& r) {
  out << "shardCount,F,replicate,throughput,internalPerRound,externalPerRound\n";
  for (const ThroughputPoint& p : r.points) {
    out << p.shardCount << ',' << p.F << ',' << p.replicate << ',' << fixed(p.throughput) << ','
        << fixed(p.internalPerRound) << ',' << fixed(p.externalPerRound) << '\n';
  }
}

std::vector<MttfSample> run_mttf(const ScenarioConfig& cfg) {
  std::vector<MttfSample> out;
  for (std::uint32_t S : cfg.mttf.shardCounts) {
    for (std::uint32_t F : cfg.mttf.faultTolerances) {
      for (const std::optional<Round>& d : cfg.mttf.detectionDelays) {
        for (std::uint32_t k = 0; k < cfg.replicates; ++k) {
          FailureModelSetup setup{cfg.mttf.totalPeers, S, F, d, cfg.faultPlan.peerFailureRate};
          ShardFailureModel model(setup, replicate_seed(cfg, k));
          out.push_back(MttfSample{S, F, d, k, model.run().failureRound});
        }
      }
    }
  }
  return out;
}

void write_mttf_csv(std::ostream& out, const std::vector<MttfSample>& samples) {
  out << "shardCount,F,d,replicate,failureRound\n";
  for (const MttfSample& m : samples) {
    out << m.shardCount << ',' << m.F << ',';
    if (m.detectionDelay) out << *m.detectionDelay;
    out << ',' << m.replicate << ',' << m.failureRound << '\n';
  }
}

std::vector<double> mttf_series(const std::vector<MttfSample>& samples, std::uint32_t shardCount,
                                std::uint32_t F, std::optional<Round> d) {
  std::vector<const MttfSample*> picked;
  for (const MttfSample& m : samples) {
    if (m.shardCount == shardCount && m.F == F && m.detectionDelay == d) picked.push_back(&m);
  }
  std::sort(picked.begin(), picked.end(),
            [](const MttfSample* a, const MttfSample* b) { return a->replicate < b->replicate; });
  std::vector<double> out;
  for (const MttfSample* m : picked) out.push_back(static_cast<double>(m->failureRound));
  return out;
}

SignTest sign_test_greater(const std::vector<double>& a, const std::vector<double>& b) {
  SignTest t;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] > b[i]) {
      ++t.wins;
    } else if (a[i] < b[i]) {
      ++t.losses;
    } else {
      ++t.ties;
    }
  }
  const std::uint32_t m = t.wins + t.losses;
  if (m == 0) return t;
  // Tail in log space so large m stays accurate.
  double p = 0.0;
  for (std::uint32_t k = t.wins; k <= m; ++k) {
    const double logTerm = std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0) -
                           static_cast<double>(m) * std::log(2.0);
    p += std::exp(logTerm);
  }
  t.pValue = std::min(1.0, p);
  return t;
}

CoinSequences sequences_from_ledger(const std::vector<LedgerRecord>& unionLedger) {
  CoinSequences out;
  for (const LedgerRecord& r : unionLedger) {
    out[r.coin].push_back(CoinStep{r.sWallet, r.tWallet, r.trail});
  }
  return out;
}

namespace {

std::string describe(const std::vector<CoinStep>& steps) {
  std::string s;
  for (const CoinStep& st : steps) {
    if (!s.empty()) s += " ";
    s += format_wallet(st.from) + ">" + format_wallet(st.to) + "[" + format_trail(st.trail) + "]";
  }
  return s;
}

}  // namespace

OracleComparison compare_with_oracle(const ScenarioConfig& cfg, std::uint64_t seed) {
  ScenarioConfig c = cfg;
  c.faultPlan = FaultPlan{};
  c.byzantineShardCount = 0;
  SimulationConfig sc = simulation_config(c, seed);
  Simulation sim(sc);
  const std::vector<LedgerRecord> genesis = bootstrap_genesis(sim);

  std::vector<std::pair<CoinId, WalletId>> owners;
  for (const LedgerRecord& r : genesis) owners.emplace_back(r.coin, r.tWallet);
  std::mt19937_64 rng = make_stream(seed, RngStream::workload);
  const std::vector<ScriptedTransfer> script =
      make_script(owners, cfg.oracleTransactions, cfg.workload.crossShardProbability,
                  cfg.params.S, cfg.walletsPerShard, rng);

  ScriptedWorkload driver(script);
  sim.add_round_hook([&](Simulation& s) { driver.act(s); });
  // Stop once every scripted transfer is confirmed and the network is quiet.
  while (sim.now() < cfg.rounds) {
    sim.step();
    if (driver.finished() && sim.observer().total_confirmed() == script.size() &&
        sim.network().in_flight() == 0) {
      break;
    }
  }

  SimpleTrail oracle(cfg.params.S, cfg.params.t, cfg.params.F, genesis);
  OracleComparison out;
  out.seed = seed;
  out.transfers = script.size();
  out.confirmedByTrail = sim.observer().total_confirmed();
  for (const ScriptedTransfer& st : script) {
    if (oracle.execute(st)) ++out.confirmedByOracle;
  }

  const CoinSequences full = sequences_from_ledger(merge_ledgers(sim.correct_ledgers()));
  const CoinSequences ref = oracle.sequences();
  out.identical = true;
  std::set<CoinId> coins;
  for (const auto& [coin, steps] : full) coins.insert(coin);
  for (const auto& [coin, steps] : ref) coins.insert(coin);
  out.coinsCompared = coins.size();
  static const std::vector<CoinStep> kEmpty;
  for (CoinId coin : coins) {
    const auto a = full.find(coin);
    const auto b = ref.find(coin);
    const auto& sa = a == full.end() ? kEmpty : a->second;
    const auto& sb = b == ref.end() ? kEmpty : b->second;
    if (sa != sb) {
      out.identical = false;
      out.firstDifference = "coin " + std::to_string(coin.value) + ": protocol {" + describe(sa) +
                            "} reference {" + describe(sb) + "}";
      break;
    }
  }
  return out;
}

ComplexityPoint measure_message_complexity(std::uint32_t s, std::uint32_t t, std::uint64_t seed) {
  ScenarioConfig c;
  c.params = Params{(s - 1) / 3, (t - 1) / 3, s, t, t + 3};
  c.workload.crossShardProbability = 1.0;
  c.workload.txPerShardPerRound = 1;
  c.workload.stopRound = 10;
  c.walletsPerShard = 4;
  c.coinsPerWallet = 3;
  c.rounds = 80;
  c.validation = Validation::on;

  SimulationConfig sc = simulation_config(c, seed);
  Simulation sim(sc);
  bootstrap_genesis(sim);
  // Genesis is installed without messages, so everything counted below
  // belongs to the transfers.
  WorkloadGenerator workload(c.workload);
  sim.add_round_hook([&](Simulation& x) { workload.act(x); });
  sim.run(c.rounds);

  ComplexityPoint p;
  p.s = s;
  p.t = t;
  p.envelopes = sim.network().envelopes_sent();
  p.confirmedExternal = sim.observer().external_confirmed();
  p.startedTotal = sim.observer().total_started();
  p.inFlightAtEnd = sim.network().in_flight();
  if (p.confirmedExternal > 0) {
    p.perTransaction = static_cast<double>(p.envelopes) / static_cast<double>(p.confirmedExternal);
    p.ratio = p.perTransaction / (static_cast<double>(s) * s * t * t);
  }
  return p;
}

}  // namespace trail
