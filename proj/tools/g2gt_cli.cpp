// Copyright 2026 The G2GT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: train, parse, eval, gradcheck, refine-demo.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include "g2gt/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace g2gt;
using json = nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Ablation {
  bool no_key_term = false;
  bool no_value_term = false;

  void add_to(CLI::App& cmd) {
    cmd.add_flag("--ablate-key-term", no_key_term, "Drop the key-side relation term");
    cmd.add_flag("--ablate-value-term", no_value_term, "Drop the value-side relation term");
  }
  void apply(G2GLayerConfig& cfg) const {
    if (no_key_term) cfg.use_key_term = false;
    if (no_value_term) cfg.use_value_term = false;
  }
};

struct TrainArgs {
  std::string config_file;
  std::string train_file;
  std::string dev_file;
  std::string checkpoint;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> t_max;
  std::optional<int> epochs;
  Ablation ablation;
  bool quiet = false;
};

// Precedence, lowest first: defaults, G2GT_SEED, config file, --set, flags.
TrainConfig resolve_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (const char* env = std::getenv("G2GT_SEED"); env != nullptr && *env != '\0') {
    cfg.set("seed", env);
  }
  if (!a.config_file.empty()) {
    std::ifstream in(a.config_file);
    if (!in) throw DataError("cannot open config file " + a.config_file);
    for (const auto& [k, v] : read_key_values(in, a.config_file)) cfg.set(k, v);
  }
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValueError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!a.train_file.empty()) cfg.train_file = a.train_file;
  if (!a.dev_file.empty()) cfg.dev_file = a.dev_file;
  if (!a.checkpoint.empty()) cfg.checkpoint = a.checkpoint;
  if (a.seed) cfg.seed = *a.seed;
  if (a.t_max) cfg.t_max = *a.t_max;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.ablation.no_key_term) cfg.use_key_term = false;
  if (a.ablation.no_value_term) cfg.use_value_term = false;
  cfg.validate();
  if (cfg.checkpoint.empty()) throw ValueError("no checkpoint path: set 'checkpoint' or pass --output");
  return cfg;
}

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = resolve_config(a);
  std::ostream* log = a.quiet ? nullptr : &std::cout;
  const TrainResult r = train(cfg, log);
  if (!a.quiet) {
    std::cout << "saved " << cfg.checkpoint << " (epoch " << r.best_epoch << " of "
              << r.epochs.size() << ")\n";
  }
  return kOk;
}

struct ParseArgs {
  std::string checkpoint;
  std::string input;
  std::string output = "-";
  std::optional<int> t_max;
  Ablation ablation;
};

int run_parse(const ParseArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  a.ablation.apply(ckpt.model.encoder_config());
  const Corpus input = load_conllu(a.input);
  ParseOptions options;
  options.t_max = a.t_max;
  const Corpus out = parse(ckpt, input, options);
  if (a.output == "-") {
    write_conllu(std::cout, out);
  } else {
    write_conllu(out, a.output);
  }
  return kOk;
}

struct EvalArgs {
  std::string pred;
  std::string gold;
  bool per_sentence = false;
  bool as_json = false;
};

int run_eval(const EvalArgs& a) {
  const Corpus pred = load_conllu(a.pred);
  const Corpus gold = load_conllu(a.gold);
  const EvalReport r = evaluate(pred.trees(), gold.trees());
  if (a.as_json) {
    json j = {{"uas", r.uas}, {"las", r.las}, {"tokens", r.tokens}};
    if (a.per_sentence) {
      j["sentences"] = json::array();
      for (const auto& s : r.sentences) {
        j["sentences"].push_back(
            {{"tokens", s.tokens}, {"heads", s.correct_heads}, {"labeled", s.correct_labeled}});
      }
    }
    std::cout << j.dump(2) << '\n';
    return kOk;
  }
  std::cout.setf(std::ios::fixed);
  std::cout.precision(2);
  std::cout << "UAS " << r.uas << "\nLAS " << r.las << "\ntokens " << r.tokens << '\n';
  if (a.per_sentence) {
    for (std::size_t k = 0; k < r.sentences.size(); ++k) {
      const auto& s = r.sentences[k];
      std::cout << k + 1 << '\t' << s.correct_heads << '/' << s.tokens << '\t'
                << s.correct_labeled << '/' << s.tokens << '\n';
    }
  }
  return kOk;
}

struct GradCheckArgs {
  Index d = 8;
  Index heads = 2;
  Index layers = 1;
  Index edge_dim = 4;
  Index tokens = 5;
  int t_train = 2;
  std::uint64_t seed = 1;
  double eps = 1e-5;
  double threshold = 1e-4;
  double init_scale = 0.3;
  Ablation ablation;
};

// Checks the refinement loss of a randomly initialized model on a random tree.
int run_gradcheck(const GradCheckArgs& a) {
  if (a.tokens < 2) throw ValueError("--tokens must be at least 2");
  ModelConfig mc;
  mc.encoder.d = a.d;
  mc.encoder.heads = a.heads;
  mc.encoder.d_ff = 2 * a.d;
  mc.encoder.layers = a.layers;
  a.ablation.apply(mc.encoder);
  mc.edge_dim = a.edge_dim;
  mc.vocab_size = a.tokens + 3;
  mc.max_positions = a.tokens;
  G2GTModel model(mc, RelationVocab::dependency({"x"}), a.seed);

  std::mt19937_64 rng(a.seed);
  std::normal_distribution<Scalar> normal(0.0, a.init_scale);
  for (auto& p : model.params()) {
    p.tensor.mutable_value() = p.tensor.value().unaryExpr([&](Scalar) { return normal(rng); });
  }
  TrainingExample ex;
  ex.tokens.push_back(Vocab::kRoot);
  DepTree tree;
  for (Index k = 1; k < a.tokens; ++k) {
    ex.tokens.push_back(2 + k);
    tree.head.push_back(static_cast<int>(std::uniform_int_distribution<Index>(0, k - 1)(rng)));
    tree.deprel.push_back("x");
  }
  ex.gold = dep_tree_to_graph(tree, model.relations());
  RefinementConfig cfg;
  cfg.t_train = a.t_train;

  const GradCheckReport report = grad_check([&] { return refinement_loss(model, ex, cfg); },
                                            model.params(), a.eps, a.threshold);
  for (const auto& e : report.entries) {
    std::cout << (e.passed ? "ok   " : "FAIL ") << e.name << "  elements " << e.elements
              << "  max rel error " << e.max_rel_error << '\n';
  }
  std::cout << (report.passed ? "passed" : "failed") << ", max rel error "
            << report.max_rel_error << " (threshold " << report.threshold << ")\n";
  return report.passed ? kOk : kInternal;
}

struct DemoArgs {
  std::string checkpoint;
  std::string input;
  std::string sentence;
  int limit = 1;
  std::optional<int> t_max;
  bool as_json = false;
  Ablation ablation;
};

// "dep<-head:deprel" for each token, read off the up labels.
std::vector<std::string> describe_arcs(const LabeledGraph& g, const RelationVocab& vocab) {
  std::vector<std::string> arcs;
  for (Index i = 1; i < g.size(); ++i) {
    std::string arc = std::to_string(i) + "<-";
    bool found = false;
    for (Index j = 0; j < g.size(); ++j) {
      const Label l = g(i, j);
      if (!vocab.is_up(l)) continue;
      arc += (found ? "," : "") + std::to_string(j) + ":" + vocab.deprel_of(l);
      found = true;
    }
    if (!found) arc += "_";
    arcs.push_back(arc);
  }
  return arcs;
}

int run_refine_demo(const DemoArgs& a) {
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  a.ablation.apply(ckpt.model.encoder_config());
  Corpus input;
  if (!a.sentence.empty()) {
    Sentence s;
    std::istringstream words(a.sentence);
    for (std::string w; words >> w;) s.forms.push_back(w);
    input.sentences.push_back(std::move(s));
  } else if (!a.input.empty()) {
    input = load_conllu(a.input);
  } else {
    throw ValueError("refine-demo needs --sentence or --input");
  }

  ParseOptions options;
  options.t_max = a.t_max;
  json out = json::array();
  const RelationVocab& vocab = ckpt.vocab.relations();
  const std::size_t count = std::min(input.size(), static_cast<std::size_t>(std::max(a.limit, 0)));
  for (std::size_t k = 0; k < count; ++k) {
    const Sentence& s = input.sentences[k];
    RefinementTrace trace;
    const DepTree tree = parse_sentence(ckpt, s, options, &trace);
    json steps = json::array();
    if (!a.as_json) {
      std::cout << "sentence " << k + 1 << ':';
      for (const auto& f : s.forms) std::cout << ' ' << f;
      std::cout << '\n';
    }
    for (const auto& step : trace.steps) {
      const auto arcs = describe_arcs(step.graph, vocab);
      if (a.as_json) {
        steps.push_back({{"iteration", step.iteration}, {"arcs", arcs}, {"converged", step.converged}});
        continue;
      }
      std::cout << "  t=" << step.iteration << ' ';
      for (const auto& arc : arcs) std::cout << ' ' << arc;
      if (step.converged) std::cout << "  (converged)";
      std::cout << '\n';
    }
    if (a.as_json) {
      out.push_back({{"forms", s.forms}, {"head", tree.head}, {"deprel", tree.deprel},
                     {"converged", trace.converged()}, {"steps", steps}});
    }
  }
  if (a.as_json) std::cout << out.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-to-graph transformer dependency parser"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a parser and save a checkpoint");
  train_cmd->add_option("-c,--config", train_args.config_file, "key = value config file");
  train_cmd->add_option("--train", train_args.train_file, "Training CoNLL-U file");
  train_cmd->add_option("--dev", train_args.dev_file, "Development CoNLL-U file");
  train_cmd->add_option("-o,--output", train_args.checkpoint, "Checkpoint path");
  train_cmd->add_option("--set", train_args.overrides, "Override a config key (key=value)");
  train_cmd->add_option("--seed", train_args.seed, "Random seed (falls back to G2GT_SEED)");
  train_cmd->add_option("--t-max", train_args.t_max, "Refinement iteration cap at inference")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train_args.epochs, "Number of epochs")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("-q,--quiet", train_args.quiet, "Suppress the epoch log");
  train_args.ablation.add_to(*train_cmd);

  ParseArgs parse_args;
  auto* parse_cmd = app.add_subcommand("parse", "Parse a CoNLL-U file with a checkpoint");
  parse_cmd->add_option("-m,--checkpoint", parse_args.checkpoint, "Checkpoint")->required();
  parse_cmd->add_option("-i,--input", parse_args.input, "Input CoNLL-U")->required();
  parse_cmd->add_option("-o,--output", parse_args.output, "Output CoNLL-U ('-' for stdout)");
  parse_cmd->add_option("--t-max", parse_args.t_max, "Refinement iteration cap")
      ->check(CLI::PositiveNumber);
  parse_args.ablation.add_to(*parse_cmd);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold trees");
  eval_cmd->add_option("pred", eval_args.pred, "Predicted CoNLL-U")->required();
  eval_cmd->add_option("gold", eval_args.gold, "Gold CoNLL-U")->required();
  eval_cmd->add_flag("--per-sentence", eval_args.per_sentence, "Also report every sentence");
  eval_cmd->add_flag("--json", eval_args.as_json, "Print JSON");

  GradCheckArgs gc_args;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Check refinement-loss gradients numerically");
  gc_cmd->add_option("--d", gc_args.d, "Model width")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--heads", gc_args.heads, "Attention heads")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--layers", gc_args.layers, "Encoder layers")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--edge-dim", gc_args.edge_dim, "Edge projection width")
      ->check(CLI::PositiveNumber);
  gc_cmd->add_option("--tokens", gc_args.tokens, "Nodes including the root")
      ->check(CLI::PositiveNumber);
  gc_cmd->add_option("--t-train", gc_args.t_train, "Training iterations")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--seed", gc_args.seed, "Random seed");
  gc_cmd->add_option("--eps", gc_args.eps, "Finite-difference step");
  gc_cmd->add_option("--threshold", gc_args.threshold, "Relative error threshold");
  gc_args.ablation.add_to(*gc_cmd);

  DemoArgs demo_args;
  auto* demo_cmd = app.add_subcommand("refine-demo", "Print the refinement trace of a sentence");
  demo_cmd->add_option("-m,--checkpoint", demo_args.checkpoint, "Checkpoint")->required();
  demo_cmd->add_option("-i,--input", demo_args.input, "Input CoNLL-U");
  demo_cmd->add_option("-s,--sentence", demo_args.sentence, "Whitespace-separated words");
  demo_cmd->add_option("-n,--limit", demo_args.limit, "Sentences to show from --input");
  demo_cmd->add_option("--t-max", demo_args.t_max, "Refinement iteration cap")
      ->check(CLI::PositiveNumber);
  demo_cmd->add_flag("--json", demo_args.as_json, "Print JSON");
  demo_args.ablation.add_to(*demo_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return run_train(train_args);
    if (*parse_cmd) return run_parse(parse_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*gc_cmd) return run_gradcheck(gc_args);
    if (*demo_cmd) return run_refine_demo(demo_args);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const ValueError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
