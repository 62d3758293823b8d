#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "trail/experiments.hpp"

namespace fs = std::filesystem;
using namespace trail;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write '" + path.string() + "'");
  return out;
}

ScenarioConfig resolve(const std::string& config) {
  if (fs::exists(config)) return load_scenario(config);
  if (auto preset = find_preset(config)) return *preset;
  throw ConfigurationError("'" + config + "' is neither a file nor a preset name");
}

int run_dynamics(const ScenarioConfig& cfg, const fs::path& dir) {
  const std::vector<ReplicateResult> results = run_replicates(cfg);
  bool breached = false;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const ReplicateResult& r = results[k];
    const std::string stem = cfg.name + "_rep" + std::to_string(k) + "_seed" + std::to_string(r.seed);
    auto frames = open_out(dir / (stem + ".csv"));
    write_frames_csv(frames, r.frames);
    auto ledger = open_out(dir / (stem + "_ledger.csv"));
    write_ledger_csv(ledger, r.unionLedger);
    std::cout << stem << ": started " << r.startedTotal << " confirmed " << r.confirmedTotal
              << " malicious " << r.maliciousConfirmed << " continuity "
              << (r.violation ? "broken at coin " + std::to_string(r.violation->coin.value)
                              : std::string("ok"))
              << (r.conservationHeld ? "" : " conservation FAILED") << '\n';
    breached = breached || r.safety_violated(cfg.validation);
  }
  auto mean = open_out(dir / (cfg.name + "_mean.csv"));
  write_mean_csv(mean, results);
  if (breached) {
    std::cerr << "safety violated with validation " << to_string(cfg.validation) << '\n';
    return 2;
  }
  return 0;
}

int run_scenario(ScenarioConfig cfg, std::optional<std::uint64_t> seed,
                 std::optional<std::uint32_t> replicates, const fs::path& dir) {
  if (seed) cfg.seed = *seed;
  if (replicates) cfg.replicates = *replicates;
  const auto problems = validate_scenario(cfg);
  if (!problems.empty()) {
    for (const std::string& p : problems) std::cerr << "config error: " << p << '\n';
    return 1;
  }
  fs::create_directories(dir);
  auto echo = open_out(dir / (cfg.name + "_config.json"));
  echo << scenario_to_json(cfg).dump(2) << '\n';

  switch (cfg.mode) {
    case ScenarioMode::dynamics:
      return run_dynamics(cfg, dir);
    case ScenarioMode::throughput: {
      const ThroughputResult r = run_throughput(cfg);
      auto out = open_out(dir / (cfg.name + "_throughput.csv"));
      write_throughput_csv(out, r);
      for (const auto& [S, F] : r.infeasible) {
        std::cout << "skipped S=" << S << " F=" << F << ": trail of " << 3 * F + 1
                  << " shards does not fit\n";
      }
      return 0;
    }
    case ScenarioMode::mttf: {
      auto out = open_out(dir / (cfg.name + "_mttf.csv"));
      write_mttf_csv(out, run_mttf(cfg));
      return 0;
    }
    case ScenarioMode::oracle_compare: {
      auto out = open_out(dir / (cfg.name + "_oracle.csv"));
      out << "seed,transfers,confirmedByTrail,confirmedByOracle,coinsCompared,identical\n";
      bool allSame = true;
      for (std::uint32_t k = 0; k < cfg.replicates; ++k) {
        const OracleComparison c = compare_with_oracle(cfg, replicate_seed(cfg, k));
        out << c.seed << ',' << c.transfers << ',' << c.confirmedByTrail << ','
            << c.confirmedByOracle << ',' << c.coinsCompared << ',' << (c.identical ? 1 : 0)
            << '\n';
        if (!c.identical) std::cerr << "seed " << c.seed << ": " << c.firstDifference << '\n';
        allSame = allSame && c.identical;
      }
      return allSame ? 0 : 2;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sharded coin-transfer simulator with trail validation"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario file or a built-in preset");
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> replicates;
  std::string outDir = "results";
  run->add_option("--config", config, "scenario JSON file or preset name")->required();
  run->add_option("--seed", seed, "base seed; replicate k uses seed + k");
  run->add_option("--replicates", replicates, "number of replicates");
  run->add_option("--out", outDir, "output directory");

  auto* presets = app.add_subcommand("presets", "list the built-in scenarios");
  std::string writeDir;
  presets->add_option("--write", writeDir, "also write each preset as JSON into this directory");

  auto* audit = app.add_subcommand("audit", "check ownership continuity of ledger CSV files");
  std::vector<std::string> ledgers;
  audit->add_option("files", ledgers, "ledger CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_scenario(resolve(config), seed, replicates, outDir);
    if (*presets) {
      for (const NamedScenario& n : builtin_presets()) {
        std::cout << n.name << "  (" << to_string(n.config.mode) << ")  " << n.description << '\n';
        if (!writeDir.empty()) {
          fs::create_directories(writeDir);
          auto out = open_out(fs::path(writeDir) / (n.name + ".json"));
          out << scenario_to_json(n.config).dump(2) << '\n';
        }
      }
      return 0;
    }
    if (*audit) {
      int status = 0;
      for (const std::string& path : ledgers) {
        std::ifstream in(path);
        if (!in) throw ConfigurationError("cannot open '" + path + "'");
        const auto records = read_ledger_csv(in);
        const auto v = check_ownership_continuity(records);
        if (v) {
          std::cout << path << ": coin " << v->coin.value << " at record " << v->position
                    << " leaves " << format_wallet(v->found) << " but was held by "
                    << format_wallet(v->expected) << '\n';
          status = 3;
        } else {
          std::cout << path << ": " << records.size() << " records, continuity ok\n";
        }
      }
      return status;
    }
  } catch (const ConfigurationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
