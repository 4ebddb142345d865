// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "malbehave/evaluation.hpp"
#include "malbehave/features.hpp"
#include "malbehave/model_io.hpp"
#include "malbehave/synthgen.hpp"
#include "oracles.hpp"

using namespace malbehave;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int number;
  const char* title;
  double limit_seconds;  // 0: no limit
  std::function<Outcome()> check;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// ---- 1 ----------------------------------------------------------------------

Outcome metric_arithmetic() {
  const auto svm = format_errors(error_report({42, 67, 979, 1000}).target);
  const auto tree = format_errors(error_report({225, 46, 979, 1000}).target);
  return {svm == "6.84%/4.29%" && tree == "4.70%/22.98%", "SVM " + svm + ", Decision Trees " + tree};
}

// ---- desk-scale experiment (2, 6, 7, 8) ------------------------------------

Dataset corpus(std::uint64_t seed, std::size_t nt, std::size_t nn, std::string* log_bytes = nullptr,
               std::string* csv_bytes = nullptr) {
  const auto runs = generate({.seed = seed, .n_target = nt, .n_nontarget = nn, .separation = 0.9});
  if (log_bytes) *log_bytes = emit_log(runs);
  auto data = build_dataset(runs, DatasetPurpose::Training);
  if (csv_bytes) {
    std::ostringstream out;
    write_feature_matrix(out, data, default_layout());
    *csv_bytes = out.str();
  }
  return data;
}

struct Direction {
  std::vector<NamedReport> reports;
  std::vector<std::string> model_bytes;
};

Direction train_and_score(const Dataset& train_set, const Dataset& test_set, std::uint64_t seed) {
  Direction d;
  for (const auto& config : default_algorithms()) {
    const TrainedModel model = train(config, train_set, seed);
    d.model_bytes.push_back(save_model(model));
    const auto report =
        evaluate([&model](const FeatureVector& x) { return predict(model, x); }, test_set);
    d.reports.push_back({std::string(algorithm_id(config.algorithm)),
                         std::string(display_name(config.algorithm)), report});
  }
  return d;
}

struct SeedRun {
  std::uint64_t seed = 0;
  Direction forward;  // train seed s (1001/1000), test seed s+1 (979/1000)
  Direction flipped;  // train seed s+1, test seed s
  std::string artifacts;  // logs, matrices, models and reports, concatenated
};

SeedRun desk_experiment(std::uint64_t seed) {
  SeedRun r;
  r.seed = seed;
  std::string log_a, csv_a, log_b, csv_b;
  const auto a = corpus(seed, 1001, 1000, &log_a, &csv_a);
  const auto b = corpus(seed + 1, 979, 1000, &log_b, &csv_b);
  r.forward = train_and_score(a, b, seed);
  r.flipped = train_and_score(b, a, seed);
  r.artifacts = log_a + log_b + csv_a + csv_b;
  for (const auto* d : {&r.forward, &r.flipped}) {
    for (const auto& m : d->model_bytes) r.artifacts += m;
    r.artifacts += render_table(d->reports) + render_json(d->reports);
  }
  return r;
}

const std::vector<SeedRun>& desk_runs() {
  static const std::vector<SeedRun> runs = [] {
    std::vector<SeedRun> out;
    for (std::uint64_t s = 41; s <= 45; ++s) out.push_back(desk_experiment(s));
    return out;
  }();
  return runs;
}

Outcome symmetry() {
  const auto train_set = corpus(42, 1001, 1000);
  const auto test_set = corpus(43, 1000, 1000);
  const auto reports = run_experiment(train_set, test_set, default_algorithms(), 42);
  std::size_t holding = 0;
  std::string detail;
  for (const auto& r : reports) {
    const auto& e = r.report;
    const bool ok = e.target.fp_pct == e.nontarget.fn_pct && e.target.fn_pct == e.nontarget.fp_pct;
    holding += ok ? 1 : 0;
    detail += (detail.empty() ? "" : ", ") + r.id + " " + format_errors(e.target) + " | " +
              format_errors(e.nontarget);
  }
  return {holding == reports.size() && reports.size() == 5,
          std::to_string(holding) + "/5 algorithms symmetric on 1000/1000: " + detail};
}

Outcome end_to_end() {
  int good_seeds = 0;
  std::string detail;
  for (const auto& run : desk_runs()) {
    bool ok = true;
    std::string line = "seed " + std::to_string(run.seed) + ":";
    for (const auto& r : run.forward.reports) {
      const double err = 100.0 * r.report.combined_error();
      ok = ok && err <= 10.0 && (r.id != "svm" || err <= 5.0);
      line += " " + r.id + "=" + fmt("%.2f%%", err);
    }
    good_seeds += ok ? 1 : 0;
    detail += (detail.empty() ? "" : "; ") + line + (ok ? "" : " [miss]");
  }
  return {good_seeds >= 4, std::to_string(good_seeds) + "/5 seeds within bounds; " + detail};
}

Outcome flip_robustness() {
  int good_seeds = 0;
  double worst = 0.0;
  std::string worst_at;
  for (const auto& run : desk_runs()) {
    bool ok = true;
    for (std::size_t i = 0; i < run.forward.reports.size(); ++i) {
      const double change = 100.0 * std::abs(run.flipped.reports[i].report.combined_error() -
                                             run.forward.reports[i].report.combined_error());
      ok = ok && change <= 5.0;
      if (change > worst) {
        worst = change;
        worst_at = run.forward.reports[i].id + " seed " + std::to_string(run.seed);
      }
    }
    good_seeds += ok ? 1 : 0;
  }
  return {good_seeds >= 4, std::to_string(good_seeds) + "/5 seeds within 5 points; largest change " +
                               fmt("%.2f", worst) + " points (" + worst_at + ")"};
}

Outcome determinism() {
  std::size_t identical = 0, bytes = 0;
  for (const auto& first : desk_runs()) {
    const auto again = desk_experiment(first.seed);
    identical += again.artifacts == first.artifacts ? 1 : 0;
    bytes += first.artifacts.size();
  }
  return {identical == desk_runs().size(),
          std::to_string(identical) + "/5 seeds byte-identical (" + std::to_string(bytes) +
              " bytes of logs, matrices, models and reports)"};
}

// ---- 3 ----------------------------------------------------------------------

Outcome optimizer_correctness() {
  Rng rng(2024);
  const std::array<double, 3> costs{0.01, 0.1, 1.0};
  double worst_gap = 0.0, worst_grad = 0.0;
  int failures = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t rows = 100 + rng.below(401);
    const auto data = oracle::random_dataset(
        rng, {.rows = rows, .noise = 0.05 * (trial % 4), .counts = trial % 3 == 0});
    const double cost = costs[static_cast<std::size_t>(trial) % costs.size()];
    const auto problem = oracle::make_problem(data, cost);

    for (LinearKind kind : {LinearKind::SvmL2L2, LinearKind::LogRegL1, LinearKind::LogRegL2}) {
      const LinearOptions opt{.cost = cost, .seed = static_cast<std::uint64_t>(trial)};
      const LinearModel m = kind == LinearKind::SvmL2L2 ? train_svm(data, opt)
                            : kind == LinearKind::LogRegL1 ? train_logreg(data, Penalty::L1, opt)
                                                           : train_logreg(data, Penalty::L2, opt);
      const double ours = oracle::objective(
          kind, problem, std::vector<double>(m.weights.begin(), m.weights.end()), m.bias);
      const double ref = oracle::first_order_solve(kind, problem).value;
      const double gap = std::abs(ours - ref) / std::abs(ref);
      worst_gap = std::max(worst_gap, gap);
      failures += gap <= 0.01 ? 0 : 1;
    }

    const LinearProblem lp(data, fit_standardizer(data), cost);
    for (LinearKind kind : {LinearKind::LogRegL1, LinearKind::LogRegL2}) {
      std::vector<double> w(kFeatureCount);
      for (auto& v : w) v = 0.2 * rng.normal();
      const double b = rng.normal();
      auto g = lp.smooth_gradient(kind, w, b);
      if (kind == LinearKind::LogRegL1) {
        for (std::size_t j = 0; j < kFeatureCount; ++j) g[j] += w[j] > 0 ? 1.0 : -1.0;
      }
      const double h = 1e-5;
      double err = 0.0, norm = 0.0;
      for (std::size_t j = 0; j <= kFeatureCount; ++j) {
        auto wp = w, wm = w;
        double bp = b, bm = b;
        if (j < kFeatureCount) {
          wp[j] += h;
          wm[j] -= h;
        } else {
          bp += h;
          bm -= h;
        }
        const double fd = (lp.objective(kind, wp, bp) - lp.objective(kind, wm, bm)) / (2 * h);
        err += (fd - g[j]) * (fd - g[j]);
        norm += fd * fd;
      }
      const double rel = std::sqrt(err) / std::max(1.0, std::sqrt(norm));
      worst_grad = std::max(worst_grad, rel);
      failures += rel <= 1e-5 ? 0 : 1;
    }
  }
  return {failures == 0, "worst objective gap " + fmt("%.2e", worst_gap) +
                             " (limit 1e-2), worst gradient error " + fmt("%.2e", worst_grad) +
                             " (limit 1e-5), " + std::to_string(failures) + " failures"};
}

// ---- 4 ----------------------------------------------------------------------

Outcome knn_oracle() {
  Rng rng(4040);
  const std::array<std::size_t, 3> ks{1, 7, 980};
  std::size_t queries = 0, mismatches = 0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t k = ks[static_cast<std::size_t>(set) % ks.size()];
    const std::size_t rows = k == 980 ? 980 + rng.below(2001 - 980 + 1) : 50 + rng.below(2001 - 50 + 1);
    const auto data = oracle::random_dataset(rng, {.rows = rows, .counts = set % 2 == 0});
    const auto model = train_knn(data, k);
    for (int q = 0; q < 10; ++q) {
      FeatureValues x = data.rows[rng.below(rows)].values;
      if (q % 2 == 1) {
        for (auto& v : x) v += rng.normal();
      }
      const auto sq = model.standardizer.apply(x);
      ++queries;
      const bool same = model.nearest(sq) == oracle::brute_force_nearest(model, sq) &&
                        model.predict(x) == oracle::brute_force_predict(model, x);
      mismatches += same ? 0 : 1;
    }
  }
  return {mismatches == 0, std::to_string(queries) + " queries over 100 sets, " +
                               std::to_string(mismatches) + " mismatches"};
}

// ---- 5 ----------------------------------------------------------------------

Outcome tree_audit() {
  Rng rng(5050);
  std::size_t violations = 0, internal = 0;
  std::string first;
  for (int set = 0; set < 20; ++set) {
    const auto data = oracle::random_dataset(
        rng, {.rows = 100 + rng.below(400), .noise = 0.2, .counts = set % 2 == 0});
    const auto tree = train_tree(data, 5);
    for (const auto& n : tree.nodes) internal += n.is_leaf() ? 0 : 1;
    const auto found = oracle::audit_tree(tree, data);
    if (!found.empty() && first.empty()) first = found.front();
    violations += found.size();
  }
  return {violations == 0, std::to_string(internal) + " internal nodes audited, " +
                               std::to_string(violations) + " violations" +
                               (first.empty() ? "" : " (first: " + first + ")")};
}

// ---- 9 ----------------------------------------------------------------------

Outcome extraction_properties() {
  Rng rng(9090);
  std::size_t violations = 0;
  std::string first;
  for (int i = 0; i < 1000; ++i) {
    const auto run = oracle::random_run(rng, "run" + std::to_string(i));
    const auto donor = oracle::random_run(rng, "donor" + std::to_string(i));
    const auto found = oracle::extraction_violations(run, donor, rng);
    if (!found.empty() && first.empty()) first = found.front();
    violations += found.size();
  }
  return {violations == 0, "1000 random runs, " + std::to_string(violations) + " violations" +
                               (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "metric arithmetic", 1, metric_arithmetic},
      {2, "symmetry with equal test classes", 60, symmetry},
      {3, "optimizer correctness", 120, optimizer_correctness},
      {4, "kNN oracle", 60, knn_oracle},
      {5, "tree structure audit", 60, tree_audit},
      {6, "end-to-end desk-scale experiment", 300, end_to_end},
      {7, "flip robustness", 300, flip_robustness},
      {8, "determinism", 0, determinism},
      {9, "feature-extraction properties", 30, extraction_properties},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_seconds > 0 && secs > c.limit_seconds) {
      o.pass = false;
      o.detail += "; exceeded " + fmt("%.0f", c.limit_seconds) + " s";
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s criterion %d: %s [%.1f s] %s\n", o.pass ? "PASS" : "FAIL", c.number, c.title,
                secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
