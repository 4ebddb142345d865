#include "malbehave/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "malbehave/artifacts.hpp"
#include "malbehave/error.hpp"
#include "malbehave/evaluation.hpp"
#include "malbehave/features.hpp"
#include "malbehave/model_io.hpp"
#include "malbehave/synthgen.hpp"

namespace malbehave {
namespace {

namespace fs = std::filesystem;

struct Options {
  std::uint64_t seed = 0;
  std::vector<std::string> algos;
  double cost = 0.01;
  std::size_t min_split = 5;
  std::size_t k = 980;
  double sep = 0.9;
  std::size_t n_target = 1001;
  std::size_t n_nontarget = 1000;
  std::vector<std::string> inputs;
  std::string output;
  std::string model;
  std::string target_profile;
  std::string nontarget_profile;
  std::vector<std::uint16_t> ports;
};

// Failure carrying the pipeline stage it happened in.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Stages every output next to its destination, then renames them into place.
class OutputSet {
 public:
  void add(std::string path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }

  void commit() {
    std::vector<std::pair<fs::path, fs::path>> staged;
    try {
      for (const auto& [path, content] : files_) {
        fs::path target(path);
        fs::path tmp = target;
        tmp += ".tmp." + std::to_string(::getpid());
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
        out.close();
        if (!out) throw Error("failed writing '" + tmp.string() + "'");
        staged.emplace_back(tmp, target);
      }
    } catch (...) {
      for (const auto& [tmp, _] : staged) fs::remove(tmp);
      throw;
    }
    for (const auto& [tmp, target] : staged) fs::rename(tmp, target);
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

Dataset load_matrix(const std::string& path, FeatureLayout& layout) {
  std::istringstream in(read_file(path));
  return read_feature_matrix(in, &layout);
}

AlgorithmConfig config_for(const std::string& id, const Options& opt) {
  auto algorithm = algorithm_from_id(id);
  if (!algorithm) throw Error("unknown algorithm '" + id + "'");
  AlgorithmConfig c;
  c.algorithm = *algorithm;
  c.cost = opt.cost;
  c.min_split = opt.min_split;
  c.k = opt.k;
  return c;
}

void cmd_synth(const Options& opt, std::ostream& out) {
  GenSpec spec;
  spec.seed = opt.seed;
  spec.n_target = opt.n_target;
  spec.n_nontarget = opt.n_nontarget;
  spec.separation = opt.sep;
  stage("synth: profile", [&] {
    if (!opt.target_profile.empty()) spec.target = read_profile_file(opt.target_profile);
    if (!opt.nontarget_profile.empty()) spec.nontarget = read_profile_file(opt.nontarget_profile);
  });
  const auto runs = stage("synth: generate", [&] { return generate(spec); });
  OutputSet files;
  files.add(opt.output, emit_log(runs));
  stage("synth: write", [&] { files.commit(); });
  out << "wrote " << runs.size() << " samples to " << opt.output << '\n';
}

void cmd_extract(const Options& opt, std::ostream& out) {
  FeatureLayout layout;
  if (!opt.ports.empty()) {
    stage("extract: layout", [&] {
      if (opt.ports.size() != kPortSlots) {
        throw Error("--ports needs exactly " + std::to_string(kPortSlots) + " ports");
      }
      PortList ports{};
      std::copy(opt.ports.begin(), opt.ports.end(), ports.begin());
      layout = FeatureLayout(ports);
    });
  }
  const auto runs = stage("extract: parse", [&] {
    std::istringstream in(read_file(opt.inputs.at(0)));
    return parse_artifact_log(in);
  });
  Dataset data;
  data.layout_fingerprint = layout.fingerprint();
  stage("extract: validate", [&] {
    for (const auto& run : runs) {
      auto problems = validate_run(run);
      if (!problems.empty()) {
        throw Error("sample '" + run.sample_id + "': " + problems.front() +
                    (problems.size() > 1 ? " (+" + std::to_string(problems.size() - 1) + " more)" : ""));
      }
      data.rows.push_back(extract_features(run, layout));
    }
  });
  std::ostringstream csv;
  stage("extract: export", [&] { write_feature_matrix(csv, data, layout); });
  OutputSet files;
  files.add(opt.output, csv.str());
  stage("extract: write", [&] { files.commit(); });
  out << "extracted " << data.size() << " feature vectors to " << opt.output << '\n';
}

void cmd_train(const Options& opt, std::ostream& out) {
  FeatureLayout layout;
  const auto data = stage("train: read", [&] { return load_matrix(opt.inputs.at(0), layout); });
  const auto id = opt.algos.empty() ? std::string("svm") : opt.algos.front();
  const auto model = stage("train: fit", [&] { return train(config_for(id, opt), data, opt.seed); });
  OutputSet files;
  files.add(opt.output, save_model(model));
  stage("train: write", [&] { files.commit(); });
  out << "trained " << id << " on " << data.size() << " samples";
  if (const auto* tree = std::get_if<TreeModel>(&model)) {
    out << " (" << tree->nodes.size() << " nodes, depth " << tree->depth() << ")";
  }
  out << '\n';
}

TrainedModel load_model_for(const Options& opt, const FeatureLayout& layout, const std::string& name) {
  return stage(name + ": model", [&] {
    const std::string bytes = read_file(opt.model);
    return load_model(std::string_view(bytes), layout);
  });
}

void cmd_predict(const Options& opt, std::ostream& out) {
  FeatureLayout layout;
  const auto data = stage("predict: read", [&] { return load_matrix(opt.inputs.at(0), layout); });
  const auto model = load_model_for(opt, layout, "predict");
  std::string text = "sample_id,predicted\n";
  std::size_t targets = 0;
  stage("predict: classify", [&] {
    for (const auto& row : data.rows) {
      const Label label = predict(model, row);
      targets += label == Label::Target ? 1 : 0;
      text += row.sample_id + "," + std::string(to_string(label)) + "\n";
    }
  });
  OutputSet files;
  files.add(opt.output, text);
  stage("predict: write", [&] { files.commit(); });
  out << "predicted " << data.size() << " samples (" << targets << " target)\n";
}

void cmd_evaluate(const Options& opt, std::ostream& out) {
  FeatureLayout layout;
  const auto data = stage("evaluate: read", [&] { return load_matrix(opt.inputs.at(0), layout); });
  const auto model = load_model_for(opt, layout, "evaluate");
  const Algorithm algorithm = algorithm_of(model);
  const std::vector<NamedReport> reports{
      {std::string(algorithm_id(algorithm)), std::string(display_name(algorithm)),
       stage("evaluate: score", [&] {
         return evaluate([&model](const FeatureVector& x) { return predict(model, x); }, data);
       })}};
  OutputSet files;
  files.add(opt.output + ".txt", render_table(reports));
  files.add(opt.output + ".json", render_json(reports));
  stage("evaluate: write", [&] { files.commit(); });
  out << render_table(reports);
}

void cmd_flip(const Options& opt, std::ostream& out) {
  FeatureLayout layout_a;
  FeatureLayout layout_b;
  const auto a = stage("flip-eval: read A", [&] { return load_matrix(opt.inputs.at(0), layout_a); });
  const auto b = stage("flip-eval: read B", [&] { return load_matrix(opt.inputs.at(1), layout_b); });
  std::vector<AlgorithmConfig> configs;
  stage("flip-eval: config", [&] {
    if (opt.algos.empty()) {
      for (Algorithm alg : kAllAlgorithms) configs.push_back(config_for(std::string(algorithm_id(alg)), opt));
    } else {
      for (const auto& id : opt.algos) configs.push_back(config_for(id, opt));
    }
  });
  const auto result = stage("flip-eval: run", [&] { return flip_experiment(a, b, configs, opt.seed); });
  OutputSet files;
  files.add(opt.output + ".AB.txt", render_table(result.forward));
  files.add(opt.output + ".AB.json", render_json(result.forward));
  files.add(opt.output + ".BA.txt", render_table(result.flipped));
  files.add(opt.output + ".BA.json", render_json(result.flipped));
  stage("flip-eval: write", [&] { files.commit(); });
  out << "train A, test B\n" << render_table(result.forward) << "\ntrain B, test A\n"
      << render_table(result.flipped);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Behavior-based malware family classification toolkit", "malbehave"};
  app.require_subcommand(1);
  Options opt;

  auto algo_check = CLI::IsMember({"svm", "logreg-l1", "logreg-l2", "tree", "knn"});

  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic artifact log");
  synth->add_option("--seed", opt.seed, "Generator seed");
  synth->add_option("--target", opt.n_target, "Number of target samples")->capture_default_str();
  synth->add_option("--nontarget", opt.n_nontarget, "Number of non-target samples")->capture_default_str();
  synth->add_option("--sep", opt.sep, "Class separation in [0, 1]")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  synth->add_option("--target-profile", opt.target_profile, "Target behavior profile file");
  synth->add_option("--nontarget-profile", opt.nontarget_profile, "Non-target behavior profile file");
  synth->add_option("--out", opt.output, "Artifact log to write")->required();

  auto* extract = app.add_subcommand("extract", "Turn an artifact log into a feature matrix");
  extract->add_option("--in", opt.inputs, "Artifact log")->required()->expected(1);
  extract->add_option("--out", opt.output, "Feature matrix CSV to write")->required();
  extract->add_option("--ports", opt.ports, "18 monitored destination ports")->delimiter(',');

  auto add_hyper = [&](CLI::App* cmd) {
    cmd->add_option("--cost", opt.cost, "Linear model cost C")->capture_default_str();
    cmd->add_option("--min-split", opt.min_split, "Tree: minimum samples to split")->capture_default_str();
    cmd->add_option("--k", opt.k, "kNN: neighbours")->capture_default_str();
    cmd->add_option("--seed", opt.seed, "Training seed");
  };

  auto* train_cmd = app.add_subcommand("train", "Train one classifier on a labeled matrix");
  train_cmd->add_option("--in", opt.inputs, "Labeled feature matrix")->required()->expected(1);
  train_cmd->add_option("--algo", opt.algos, "svm|logreg-l1|logreg-l2|tree|knn")
      ->expected(1)
      ->check(algo_check);
  add_hyper(train_cmd);
  train_cmd->add_option("--out", opt.output, "Model file to write")->required();

  auto* predict_cmd = app.add_subcommand("predict", "Label every row of a feature matrix");
  predict_cmd->add_option("--model", opt.model, "Model file")->required();
  predict_cmd->add_option("--in", opt.inputs, "Feature matrix")->required()->expected(1);
  predict_cmd->add_option("--out", opt.output, "Label CSV to write")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a model on a labeled matrix");
  evaluate_cmd->add_option("--model", opt.model, "Model file")->required();
  evaluate_cmd->add_option("--in", opt.inputs, "Labeled feature matrix")->required()->expected(1);
  evaluate_cmd->add_option("--out", opt.output, "Report prefix (.txt and .json)")->required();

  auto* flip = app.add_subcommand("flip-eval", "Train/test on A/B and again on B/A");
  flip->add_option("--in", opt.inputs, "Matrices A and B")->required()->expected(2);
  flip->add_option("--algo", opt.algos, "Algorithms (default: all five)")->check(algo_check);
  add_hyper(flip);
  flip->add_option("--out", opt.output, "Report prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (synth->parsed()) cmd_synth(opt, out);
    if (extract->parsed()) cmd_extract(opt, out);
    if (train_cmd->parsed()) cmd_train(opt, out);
    if (predict_cmd->parsed()) cmd_predict(opt, out);
    if (evaluate_cmd->parsed()) cmd_evaluate(opt, out);
    if (flip->parsed()) cmd_flip(opt, out);
  } catch (const StageError& e) {
    err << "malbehave " << e.stage() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "malbehave: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace malbehave
