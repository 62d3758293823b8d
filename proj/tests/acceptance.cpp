// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "trail/experiments.hpp"

using namespace trail;

namespace {

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s | %s\n", pass ? "PASS" : "FAIL", id, title.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ScenarioConfig desk(Validation v) {
  ScenarioConfig c;
  c.params = Params{2, 1, 7, 4, 10};
  c.rounds = 200;
  c.seed = 1;
  c.replicates = 10;
  c.byzantineShardCount = 1;
  c.faultPlan.failRound = 50;
  c.faultPlan.detectionDelay = 3;
  c.validation = v;
  return c;
}

struct Timed {
  std::vector<ReplicateResult> results;
  double seconds = 0.0;
};

Timed run_timed(const ScenarioConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Timed t;
  t.results = run_replicates(c);
  t.seconds = seconds_since(t0);
  return t;
}

std::vector<double> mean_series(const std::vector<ReplicateResult>& rs,
                                const std::function<double(const MetricsFrame&)>& field) {
  std::vector<double> out(rs.front().frames.size(), 0.0);
  for (const ReplicateResult& r : rs) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += field(r.frames[i]);
  }
  for (double& v : out) v /= static_cast<double>(rs.size());
  return out;
}

double window_mean(const std::vector<double>& xs, std::size_t lo, std::size_t hi) {
  double sum = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) sum += xs[i];
  return sum / static_cast<double>(hi - lo + 1);
}

void criterion_validation_on(const Timed& on) {
  std::uint64_t malicious = 0;
  for (const ReplicateResult& r : on.results) malicious += r.maliciousConfirmed;
  report(1, "validation on blocks double spends", malicious == 0 && on.seconds < 30.0,
         "malicious confirmed " + std::to_string(malicious) + " over 10 seeds, runtime " +
             fmt("%.2f s", on.seconds));
}

void criterion_validation_off(const Timed& off) {
  std::uint64_t malicious = 0, started = 0, confirmed = 0;
  bool everySeed = true;
  for (const ReplicateResult& r : off.results) {
    malicious += r.maliciousConfirmed;
    started += r.startedTotal;
    confirmed += r.confirmedTotal;
    everySeed = everySeed && r.maliciousConfirmed > 0;
  }
  const double gap = 1.0 - static_cast<double>(confirmed) / static_cast<double>(started);
  report(2, "validation off admits double spends",
         everySeed && std::abs(gap) <= 0.05 && off.seconds < 30.0,
         "malicious confirmed " + std::to_string(malicious) +
             (everySeed ? " (every seed)" : " (some seed had none)") + ", confirmed/started gap " +
             fmt("%.4f", gap) + ", runtime " + fmt("%.2f s", off.seconds));
}

void criterion_recovery(const Timed& rec) {
  const ScenarioConfig c = desk(Validation::on_recovery);
  const double expectedPeak = static_cast<double>(c.byzantineShardCount) / c.params.S;
  bool peakExact = true, returned = true;
  Round latestReturn = 0;
  for (const ReplicateResult& r : rec.results) {
    double peak = 0.0;
    Round zeroAt = -1;
    for (const MetricsFrame& f : r.frames) {
      peak = std::max(peak, f.compromisedWalletFraction);
      if (f.round > c.faultPlan.failRound && f.compromisedWalletFraction == 0.0 && zeroAt < 0) {
        zeroAt = f.round;
      }
    }
    peakExact = peakExact && std::abs(peak - expectedPeak) < 1e-12;
    returned = returned && zeroAt >= 0 && zeroAt < c.rounds &&
               r.frames.back().compromisedWalletFraction == 0.0;
    latestReturn = std::max(latestReturn, zeroAt);
  }
  const auto rate = mean_series(rec.results, [](const MetricsFrame& f) {
    return static_cast<double>(f.confirmedTotal);
  });
  const auto fail = static_cast<std::size_t>(c.faultPlan.failRound);
  const auto d = static_cast<std::size_t>(c.faultPlan.detectionDelay);
  const double pre = window_mean(rate, 0, fail - 1);
  const double steady = window_mean(rate, 10, fail - 1);
  const double window = window_mean(rate, fail + d, fail + d + 20);
  const double ratio = window / pre;
  report(3, "recovery bounds the damage and catches up",
         peakExact && returned && ratio >= 1.2 && rec.seconds < 60.0,
         std::string("peak ") + (peakExact ? "= F/S" : "!= F/S") + ", back to 0 by round " +
             std::to_string(latestReturn) + ", window/pre-failure " + fmt("%.3f", ratio) +
             " (pre-failure mean over rounds 0..49; steady-state 10..49 gives " +
             fmt("%.3f", window / steady) + "), runtime " + fmt("%.2f s", rec.seconds));
}

void criterion_scaling() {
  ScenarioConfig c = *find_preset("scaling");
  const auto t0 = std::chrono::steady_clock::now();
  const ThroughputResult r = run_throughput(c);
  const double secs = seconds_since(t0);
  bool monotoneS = true, monotoneF = true;
  std::string table;
  for (std::uint32_t F : c.throughput.faultTolerances) {
    double prev = 0.0;
    for (std::uint32_t S : c.throughput.shardCounts) {
      if (3 * F + 1 > S) continue;
      const double m = r.mean(S, F);
      if (m < prev * 0.9) monotoneS = false;
      prev = m;
      table += " S" + std::to_string(S) + "F" + std::to_string(F) + "=" + fmt("%.2f", m);
    }
  }
  for (std::uint32_t S : c.throughput.shardCounts) {
    for (std::uint32_t F = 1; F < c.throughput.faultTolerances.size(); ++F) {
      if (3 * F + 1 > S) continue;
      if (r.mean(S, F) > r.mean(S, F - 1)) monotoneF = false;
    }
  }
  std::string skipped;
  for (const auto& [S, F] : r.infeasible) {
    skipped += " S=" + std::to_string(S) + ",F=" + std::to_string(F);
  }
  const bool expectedSkip = r.infeasible.size() == 1 && r.infeasible[0].first == 4 &&
                            r.infeasible[0].second == 2;
  report(4, "throughput scales with shards and falls with trail tolerance",
         monotoneS && monotoneF && expectedSkip && secs < 300.0,
         "means" + table + "; infeasible" + skipped + "; runtime " + fmt("%.1f s", secs));
}

bool all_significant(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
                     std::string& detail) {
  bool ok = true;
  for (const auto& [a, b] : pairs) {
    const SignTest t = sign_test_greater(a, b);
    detail += " " + std::to_string(t.wins) + "/" + std::to_string(t.losses) + "/" +
              std::to_string(t.ties) + " p=" + fmt("%.2g", t.pValue);
    ok = ok && t.pValue < 0.05;
  }
  return ok;
}

void criterion_mttf() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig base = *find_preset("failure-time");
  const auto plain = run_mttf(base);
  ScenarioConfig det = *find_preset("failure-time-detection");
  const auto withDet = run_mttf(det);
  const double secs = seconds_since(t0);
  const std::vector<std::uint32_t> sizes{8, 16, 32};

  std::string da;
  const bool a = all_significant(
      {{mttf_series(plain, 8, 0, std::nullopt), mttf_series(plain, 16, 0, std::nullopt)},
       {mttf_series(plain, 16, 0, std::nullopt), mttf_series(plain, 32, 0, std::nullopt)}},
      da);
  std::string db;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> bPairs;
  for (std::uint32_t S : sizes) {
    bPairs.push_back({mttf_series(plain, S, 2, std::nullopt), mttf_series(plain, S, 1, std::nullopt)});
    bPairs.push_back({mttf_series(plain, S, 1, std::nullopt), mttf_series(plain, S, 0, std::nullopt)});
  }
  const bool b = all_significant(bPairs, db);
  std::string dc;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> cPairs;
  for (std::uint32_t S : sizes) {
    cPairs.push_back({mttf_series(withDet, S, 3, Round{3}), mttf_series(withDet, S, 3, Round{0})});
  }
  cPairs.push_back({mttf_series(withDet, 8, 3, Round{6}), mttf_series(withDet, 16, 3, Round{6})});
  cPairs.push_back({mttf_series(withDet, 16, 3, Round{6}), mttf_series(withDet, 32, 3, Round{6})});
  const bool c = all_significant(cPairs, dc);
  report(5, "failure time orderings (one-sided sign tests, p < 0.05)",
         a && b && c && secs < 300.0,
         "(a)" + da + " (b)" + db + " (c)" + dc + "; runtime " + fmt("%.2f s", secs));
}

void criterion_oracle() {
  ScenarioConfig c = *find_preset("oracle");
  const auto t0 = std::chrono::steady_clock::now();
  bool same = true;
  std::string detail;
  std::size_t compared = 0;
  for (std::uint32_t k = 0; k < 5; ++k) {
    const OracleComparison r = compare_with_oracle(c, replicate_seed(c, k));
    compared += r.coinsCompared;
    if (!r.identical || r.confirmedByTrail != r.transfers) {
      same = false;
      detail += " seed " + std::to_string(r.seed) + ": " + r.firstDifference;
    }
  }
  const double secs = seconds_since(t0);
  report(6, "full protocol matches the single-peer reference", same && secs < 10.0,
         std::to_string(compared) + " coin histories over 5 seeds x 200 transfers" + detail +
             ", runtime " + fmt("%.2f s", secs));
}

void criterion_continuity(const Timed& on, const Timed& rec, const Timed& off) {
  std::size_t broken = 0, records = 0;
  for (const Timed* t : {&on, &rec}) {
    for (const ReplicateResult& r : t->results) {
      records += r.unionLedger.size();
      if (r.violation || !r.conservationHeld) ++broken;
    }
  }
  std::size_t offBroken = 0;
  for (const ReplicateResult& r : off.results) offBroken += r.violation ? 1 : 0;
  report(7, "ownership continuity on correct peers' union ledger", broken == 0,
         std::to_string(records) + " records across 20 validated runs, " + std::to_string(broken) +
             " broken; baseline with validation off: " + std::to_string(offBroken) +
             "/10 runs broken (expected)");
}

void criterion_complexity() {
  const auto t0 = std::chrono::steady_clock::now();
  double lo = 1e300, hi = 0.0;
  std::string detail;
  bool quiet = true;
  for (std::uint32_t s : {4u, 7u, 13u}) {
    for (std::uint32_t t : {4u, 7u}) {
      const ComplexityPoint p = measure_message_complexity(s, t, 1);
      lo = std::min(lo, p.ratio);
      hi = std::max(hi, p.ratio);
      quiet = quiet && p.inFlightAtEnd == 0 && p.confirmedExternal == p.startedTotal;
      detail += " (" + std::to_string(s) + "," + std::to_string(t) + ")=" + fmt("%.3f", p.ratio);
    }
  }
  const double secs = seconds_since(t0);
  report(8, "messages per cross-shard transfer scale as s^2 t^2",
         quiet && hi / lo < 2.0 && secs < 120.0,
         "ratio" + detail + ", max/min " + fmt("%.3f", hi / lo) + ", runtime " +
             fmt("%.1f s", secs));
}

// Any two quorums of q out of n members share at least `need` members,
// checked over every pair of subsets.
bool quorums_intersect(std::uint32_t n, std::uint32_t q, std::uint32_t need) {
  std::vector<std::uint32_t> subsets;
  for (std::uint32_t m = 0; m < (1u << n); ++m) {
    if (static_cast<std::uint32_t>(__builtin_popcount(m)) == q) subsets.push_back(m);
  }
  for (std::uint32_t a : subsets) {
    for (std::uint32_t b : subsets) {
      if (static_cast<std::uint32_t>(__builtin_popcount(a & b)) < need) return false;
    }
  }
  return true;
}

void criterion_quorums() {
  std::size_t checked = 0;
  bool ok = true;
  for (std::uint32_t n = 1; n <= 7; ++n) {
    for (std::uint32_t f = 0; 3 * f + 1 <= n; ++f) {
      // Peer level: s - f replies; trail level: t - F shards.
      Params p{f, f, n, n, n};
      ok = ok && validate_params(p).empty();
      ok = ok && quorums_intersect(n, p.peer_quorum(), f + 1);
      ok = ok && quorums_intersect(n, p.commit_shard_quorum(), f + 1);
      // A commit quorum always holds a correct member besides the
      // prepare quorum's leader.
      ok = ok && p.prepare_shard_quorum() + 1 == p.commit_shard_quorum();
      ok = ok && p.commit_shard_quorum() >= f + 1;
      checked += 2;
    }
    // One tolerance too many must break intersection whenever it is legal
    // to ask for it.
    const std::uint32_t over = (n + 2) / 3;
    if (3 * over + 1 > n && over < n) {
      ok = ok && !validate_params(Params{over, 0, n, 1, 1}).empty();
      ok = ok && !quorums_intersect(n, n - over, over + 1);
    }
  }
  report(9, "quorum intersection, exhaustive up to 7 members", ok,
         std::to_string(checked) + " (size, tolerance) cases plus over-tolerance negatives");
}

}  // namespace

int main() {
  const Timed on = run_timed(desk(Validation::on));
  const Timed off = run_timed(desk(Validation::off));
  const Timed rec = run_timed(desk(Validation::on_recovery));
  criterion_validation_on(on);
  criterion_validation_off(off);
  criterion_recovery(rec);
  criterion_scaling();
  criterion_mttf();
  criterion_oracle();
  criterion_continuity(on, rec, off);
  criterion_complexity();
  criterion_quorums();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
