#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "malbehave/error.hpp"
#include "malbehave/evaluation.hpp"
#include "malbehave/features.hpp"
#include "malbehave/synthgen.hpp"

using namespace malbehave;

namespace {

Dataset corpus(std::uint64_t seed, std::size_t nt, std::size_t nn, double sep) {
  return build_dataset(generate({.seed = seed, .n_target = nt, .n_nontarget = nn, .separation = sep}),
                       DatasetPurpose::Training);
}

double accuracy(const ErrorReport& r) { return 100.0 * (1.0 - r.combined_error()); }

}  // namespace

TEST_SUITE("synthgen") {
  TEST_CASE("empty request") { CHECK(generate({.seed = 1}).empty()); }

  TEST_CASE("same seed, same bytes") {
    const GenSpec spec{.seed = 7, .n_target = 20, .n_nontarget = 20, .separation = 0.5};
    CHECK(emit_log(generate(spec)) == emit_log(generate(spec)));
    GenSpec other = spec;
    other.seed = 8;
    CHECK(emit_log(generate(other)) != emit_log(generate(spec)));
  }

  TEST_CASE("class counts, ids and order independence") {
    const GenSpec spec{.seed = 42, .n_target = 13, .n_nontarget = 9, .separation = 0.9};
    const auto runs = generate(spec);
    REQUIRE(runs.size() == 22);
    CHECK(runs[0].sample_id == "s42-t0");
    CHECK(runs[13].sample_id == "s42-n0");
    std::size_t targets = 0;
    for (const auto& r : runs) {
      targets += r.label == Label::Target ? 1 : 0;
      CHECK(validate_run(r).empty());
    }
    CHECK(targets == 13);
    // Each sample has its own stream: generating one in isolation agrees.
    CHECK(generate_one(spec, Label::NonTarget, 5) == runs[13 + 5]);
    CHECK(generate_one(spec, Label::Target, 12) == runs[12]);
    // Prefixes of larger corpora are identical.
    GenSpec bigger = spec;
    bigger.n_target = 30;
    CHECK(generate(bigger)[7] == runs[7]);
  }

  TEST_CASE("emit and parse reach a fixpoint") {
    const auto runs = generate({.seed = 3, .n_target = 50, .n_nontarget = 50});
    const std::string log = emit_log(runs);
    const auto parsed = parse_artifact_log(log);
    CHECK(parsed == runs);
    CHECK(emit_log(parsed) == log);
    std::set<std::string> ids;
    for (const auto& r : parsed) ids.insert(r.sample_id);
    CHECK(ids.size() == 100);
  }

  TEST_CASE("one run emits one line per event") {
    const auto run = generate_one({.seed = 4, .n_target = 1}, Label::Target, 0);
    REQUIRE(run.event_count() > 0);
    const std::string log = emit_log({run});
    CHECK(static_cast<std::size_t>(std::count(log.begin(), log.end(), '\n')) == run.event_count());
  }

  TEST_CASE("desk-scale corpus has the requested class sizes") {
    const auto data = corpus(42, 1001, 1000, 0.9);
    CHECK(data.size() == 2001);
    CHECK(data.count(Label::Target) == 1001);
    CHECK(data.count(Label::NonTarget) == 1000);
  }

  TEST_CASE("built-in profiles are valid and match the shipped files") {
    CHECK(validate_profile(zeus_like_profile()).empty());
    CHECK(validate_profile(generic_profile()).empty());
    CHECK(read_profile_file(MALBEHAVE_PROFILE_DIR "/zeus_like.profile") == zeus_like_profile());
    CHECK(read_profile_file(MALBEHAVE_PROFILE_DIR "/generic.profile") == generic_profile());
    // The target profile leans on APPDATA drops, POST beacons and ports 80/443.
    const auto& z = zeus_like_profile();
    CHECK(z.path_mix[0] == *std::max_element(z.path_mix.begin(), z.path_mix.end()));
    CHECK(z.method_mix[0] > generic_profile().method_mix[0]);
    CHECK(z.port_mix[5] + z.port_mix[11] > 0.5);
  }

  TEST_CASE("profile text round trip and validation") {
    std::istringstream in(write_profile(generic_profile()));
    CHECK(read_profile(in) == generic_profile());

    BehaviorProfile bad = zeus_like_profile();
    bad.port_mix[0] += 0.2;
    bad.flows = {5, 2};
    bad.dormant_fraction = 1.5;
    CHECK(validate_profile(bad).size() == 3);

    std::istringstream not_json("{");
    CHECK_THROWS_AS(read_profile(not_json), DatasetError);
    std::istringstream missing(R"({"name":"x"})");
    CHECK_THROWS_AS(read_profile(missing), DatasetError);
    CHECK_THROWS_AS(read_profile_file("/nonexistent/profile"), DatasetError);
  }

  TEST_CASE("interpolation endpoints") {
    const auto& z = zeus_like_profile();
    const auto& g = generic_profile();
    const auto at0 = interpolate(z, g, 0.0);
    const auto at1 = interpolate(z, g, 1.0);
    CHECK(at0.port_mix == z.port_mix);
    CHECK(at0.flows == z.flows);
    CHECK(at1.record_mix == g.record_mix);
    CHECK(at1.file_size == g.file_size);
    const auto mid = interpolate(z, g, 0.5);
    CHECK(mid.http_requests.max == doctest::Approx(0.5 * (z.http_requests.max + g.http_requests.max)));
    CHECK(validate_profile(mid).empty());
  }
}

TEST_SUITE("synthgen-separability") {
  TEST_CASE("at separation 0 every classifier is at chance") {
    // 99% binomial interval around 50% for 1000 test samples.
    const double half_width = 2.5758 * std::sqrt(0.25 / 1000.0) * 100.0;
    std::vector<double> mean(5, 0.0);
    for (std::uint64_t s = 41; s <= 45; ++s) {
      const auto reports = run_experiment(corpus(s, 1001, 1000, 0.0), corpus(s + 1, 979, 1000, 0.0),
                                          default_algorithms(), s);
      for (std::size_t i = 0; i < 5; ++i) mean[i] += accuracy(reports[i].report) / 5.0;
    }
    for (std::size_t i = 0; i < 5; ++i) {
      CAPTURE(i);
      CHECK(std::abs(mean[i] - 50.0) <= half_width);
    }
  }

  TEST_CASE("SVM accuracy grows with separation") {
    const std::vector<AlgorithmConfig> svm{AlgorithmConfig{.algorithm = Algorithm::Svm}};
    std::vector<double> acc;
    for (double sep : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      double total = 0.0;
      for (std::uint64_t s = 41; s <= 45; ++s) {
        const auto r = run_experiment(corpus(s, 1001, 1000, sep), corpus(s + 1, 979, 1000, sep), svm, s);
        total += accuracy(r[0].report);
      }
      acc.push_back(total / 5.0);
    }
    int inversions = 0;
    for (std::size_t i = 1; i < acc.size(); ++i) {
      if (acc[i] < acc[i - 1]) {
        ++inversions;
        CHECK(acc[i - 1] - acc[i] <= 1.0);
      }
    }
    CHECK(inversions <= 1);
    CHECK(acc.back() > acc.front() + 25.0);
  }
}
