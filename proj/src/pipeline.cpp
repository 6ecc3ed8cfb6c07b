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

#include "g2gt/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace g2gt {

// ---- vocabulary -----------------------------------------------------------

Vocab::Vocab() : Vocab(from_tables({"<unk>", "<pad>", "<root>"}, {})) {}

Vocab Vocab::from_tables(std::vector<std::string> tokens, std::vector<std::string> deprels) {
  if (tokens.size() < 3 || tokens[kUnk] != "<unk>" || tokens[kPad] != "<pad>" ||
      tokens[kRoot] != "<root>") {
    throw DataError("token table must start with <unk>, <pad>, <root>");
  }
  Vocab v(std::move(tokens), std::move(deprels), 0);
  return v;
}

Vocab::Vocab(std::vector<std::string> tokens, std::vector<std::string> deprels, int)
    : tokens_(std::move(tokens)),
      deprels_(std::move(deprels)),
      relations_(RelationVocab::dependency(deprels_)) {
  for (Index k = 0; k < static_cast<Index>(tokens_.size()); ++k) {
    if (!index_.emplace(tokens_[k], k).second) {
      throw DataError("duplicate token '" + tokens_[k] + "' in vocabulary");
    }
  }
}

Vocab Vocab::build(const Corpus& corpus, int min_count) {
  std::map<std::string, int> counts;
  std::set<std::string> deprels;
  for (const auto& s : corpus.sentences) {
    for (const auto& f : s.forms) ++counts[f];
    for (const auto& d : s.tree.deprel) deprels.insert(d);
  }
  std::vector<std::string> tokens = {"<unk>", "<pad>", "<root>"};
  for (const auto& [form, c] : counts) {
    if (c >= min_count && form != "<unk>" && form != "<pad>" && form != "<root>") {
      tokens.push_back(form);
    }
  }
  return from_tables(std::move(tokens), {deprels.begin(), deprels.end()});
}

Index Vocab::token_id(const std::string& form) const {
  auto it = index_.find(form);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<Index> Vocab::encode(const Sentence& sentence) const {
  std::vector<Index> ids;
  ids.reserve(sentence.size() + 1);
  ids.push_back(kRoot);
  for (const auto& f : sentence.forms) ids.push_back(token_id(f));
  return ids;
}

// ---- evaluation -----------------------------------------------------------

EvalReport evaluate(const std::vector<DepTree>& pred, const std::vector<DepTree>& gold) {
  if (pred.size() != gold.size()) {
    throw ValueError("evaluate: " + std::to_string(pred.size()) + " predicted vs " +
                     std::to_string(gold.size()) + " gold sentences");
  }
  EvalReport report;
  std::size_t heads = 0, labeled = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    if (pred[s].size() != gold[s].size()) {
      throw ValueError("evaluate: sentence " + std::to_string(s + 1) +
                       " has mismatched token counts");
    }
    SentenceScore score;
    score.tokens = gold[s].size();
    for (std::size_t k = 0; k < gold[s].size(); ++k) {
      if (pred[s].head[k] == gold[s].head[k]) {
        ++score.correct_heads;
        if (pred[s].deprel[k] == gold[s].deprel[k]) ++score.correct_labeled;
      }
    }
    report.tokens += score.tokens;
    heads += score.correct_heads;
    labeled += score.correct_labeled;
    report.sentences.push_back(score);
  }
  if (report.tokens > 0) {
    report.uas = 100.0 * static_cast<double>(heads) / static_cast<double>(report.tokens);
    report.las = 100.0 * static_cast<double>(labeled) / static_cast<double>(report.tokens);
  }
  return report;
}

// ---- configuration --------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  is >> v;
  if (!is || !is.eof()) throw ValueError("config '" + key + "': malformed number '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ValueError("config '" + key + "': expected a boolean, got '" + value + "'");
}

}  // namespace

std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValueError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "train_file") train_file = value;
  else if (key == "dev_file") dev_file = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "d") d = parse_number<Index>(key, value);
  else if (key == "heads") heads = parse_number<Index>(key, value);
  else if (key == "d_ff") d_ff = parse_number<Index>(key, value);
  else if (key == "layers") layers = parse_number<Index>(key, value);
  else if (key == "edge_dim") edge_dim = parse_number<Index>(key, value);
  else if (key == "max_positions") max_positions = parse_number<Index>(key, value);
  else if (key == "init_std") init_std = parse_number<Scalar>(key, value);
  else if (key == "use_key_term") use_key_term = parse_bool(key, value);
  else if (key == "use_value_term") use_value_term = parse_bool(key, value);
  else if (key == "freeze_none_relation") freeze_none_relation = parse_bool(key, value);
  else if (key == "input_mode") {
    if (value == "labeled") input_mode = GraphInputMode::kLabeled;
    else if (value == "unlabeled") input_mode = GraphInputMode::kUnlabeled;
    else throw ValueError("config 'input_mode': expected labeled or unlabeled");
  }
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "lr") lr = parse_number<Scalar>(key, value);
  else if (key == "beta1") beta1 = parse_number<Scalar>(key, value);
  else if (key == "beta2") beta2 = parse_number<Scalar>(key, value);
  else if (key == "adam_eps") adam_eps = parse_number<Scalar>(key, value);
  else if (key == "min_count") min_count = parse_number<int>(key, value);
  else if (key == "t_train") t_train = parse_number<int>(key, value);
  else if (key == "t_max") t_max = parse_number<int>(key, value);
  else if (key == "eval_every") eval_every = parse_number<int>(key, value);
  else if (key == "stop_at_dev_las") stop_at_dev_las = parse_number<double>(key, value);
  else throw ValueError("unknown config key '" + key + "'");
}

void TrainConfig::validate() const {
  if (train_file.empty()) throw ValueError("config: train_file is required");
  if (d <= 0 || heads <= 0 || d % heads != 0) {
    throw ValueError("config: d must be a positive multiple of heads");
  }
  if (d_ff <= 0 || layers < 0 || edge_dim <= 0 || edge_dim > d || max_positions <= 1) {
    throw ValueError("config: invalid model dimensions");
  }
  if (!(init_std > 0)) throw ValueError("config: init_std must be positive");
  if (epochs < 0 || batch_size <= 0 || eval_every <= 0) {
    throw ValueError("config: epochs >= 0, batch_size > 0 and eval_every > 0 are required");
  }
  if (!(lr > 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(adam_eps > 0)) {
    throw ValueError("config: invalid optimizer settings");
  }
  if (t_train < 1 || t_max < 1) throw ValueError("config: t_train and t_max must be >= 1");
  if (min_count < 1) throw ValueError("config: min_count must be >= 1");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  auto num = [](auto v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {
      {"train_file", train_file},
      {"dev_file", dev_file},
      {"checkpoint", checkpoint},
      {"d", num(d)},
      {"heads", num(heads)},
      {"d_ff", num(d_ff)},
      {"layers", num(layers)},
      {"edge_dim", num(edge_dim)},
      {"max_positions", num(max_positions)},
      {"init_std", num(init_std)},
      {"use_key_term", use_key_term ? "true" : "false"},
      {"use_value_term", use_value_term ? "true" : "false"},
      {"freeze_none_relation", freeze_none_relation ? "true" : "false"},
      {"input_mode", input_mode == GraphInputMode::kLabeled ? "labeled" : "unlabeled"},
      {"seed", num(seed)},
      {"epochs", num(epochs)},
      {"batch_size", num(batch_size)},
      {"lr", num(lr)},
      {"beta1", num(beta1)},
      {"beta2", num(beta2)},
      {"adam_eps", num(adam_eps)},
      {"min_count", num(min_count)},
      {"t_train", num(t_train)},
      {"t_max", num(t_max)},
      {"eval_every", num(eval_every)},
      {"stop_at_dev_las", num(stop_at_dev_las)},
  };
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  TrainConfig cfg;
  for (const auto& [k, v] : read_key_values(in, path.string())) cfg.set(k, v);
  return cfg;
}

// ---- training and parsing -------------------------------------------------

std::vector<TrainingExample> make_examples(const Corpus& corpus, const Vocab& vocab) {
  std::vector<TrainingExample> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus.sentences) {
    if (!is_well_formed(s.tree, false)) {
      throw DataError("training sentence is not a well-formed tree");
    }
    TrainingExample ex;
    ex.tokens = vocab.encode(s);
    ex.gold = dep_tree_to_graph(s.tree, vocab.relations());
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

ModelConfig model_config(const TrainConfig& c, const Vocab& vocab) {
  ModelConfig m;
  m.encoder.d = c.d;
  m.encoder.heads = c.heads;
  m.encoder.d_ff = c.d_ff;
  m.encoder.layers = c.layers;
  m.encoder.use_key_term = c.use_key_term;
  m.encoder.use_value_term = c.use_value_term;
  m.encoder.freeze_none_relation = c.freeze_none_relation;
  m.edge_dim = c.edge_dim;
  m.vocab_size = vocab.size();
  m.max_positions = c.max_positions;
  m.task = TaskKind::kDependency;
  m.input_mode = c.input_mode;
  m.init_std = c.init_std;
  return m;
}

std::vector<Matrix> snapshot(const ParameterSet& params) {
  std::vector<Matrix> out;
  for (const auto& p : params) out.push_back(p.tensor.value());
  return out;
}

void restore(ParameterSet& params, const std::vector<Matrix>& values) {
  std::size_t k = 0;
  for (auto& p : params) p.tensor.mutable_value() = values[k++];
}

// Sentences sorted by length and cut into batches; the batch order is
// reshuffled each epoch.
std::vector<std::vector<std::size_t>> length_buckets(const std::vector<TrainingExample>& examples,
                                                     std::size_t batch_size) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return examples[a].tokens.size() < examples[b].tokens.size();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t k = 0; k < order.size(); k += batch_size) {
    batches.emplace_back(order.begin() + k,
                         order.begin() + std::min(order.size(), k + batch_size));
  }
  return batches;
}

}  // namespace

TrainResult train(const TrainConfig& config, std::ostream* log) {
  config.validate();
  const Corpus train_corpus = load_conllu(config.train_file);
  std::optional<Corpus> dev;
  if (!config.dev_file.empty()) dev = load_conllu(config.dev_file);
  return train(config, train_corpus, dev ? &*dev : nullptr, log);
}

TrainResult train(const TrainConfig& config, const Corpus& train_corpus, const Corpus* dev_corpus,
                  std::ostream* log) {
  if (train_corpus.size() == 0) throw DataError("training corpus is empty");
  TrainConfig checked = config;
  if (checked.train_file.empty()) checked.train_file = "<memory>";
  checked.validate();

  Vocab vocab = Vocab::build(train_corpus, config.min_count);
  RefinementConfig refinement;
  refinement.t_max = config.t_max;
  refinement.t_train = config.t_train;
  G2GTModel model(model_config(config, vocab), vocab.relations(), config.seed);
  std::size_t longest = 0;
  for (const auto& s : train_corpus.sentences) longest = std::max(longest, s.size() + 1);
  if (static_cast<Index>(longest) > config.max_positions) {
    throw ValueError("training sentence longer than max_positions");
  }

  const std::vector<TrainingExample> examples = make_examples(train_corpus, vocab);
  auto batches = length_buckets(examples, static_cast<std::size_t>(config.batch_size));
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const AdamOptions adam{config.lr, config.beta1, config.beta2, config.adam_eps};

  TrainResult result{Checkpoint{vocab, refinement, std::move(model)}, {}, 0};
  Checkpoint& ckpt = result.checkpoint;
  std::vector<Matrix> best = snapshot(ckpt.model.params());
  double best_las = -1;

  auto dev_eval = [&]() -> std::optional<EvalReport> {
    if (dev_corpus == nullptr) return std::nullopt;
    return evaluate(parse(ckpt, *dev_corpus).trees(), dev_corpus->trees());
  };

  if (dev_corpus != nullptr && config.epochs == 0) {
    result.epochs.push_back({0, 0.0, dev_eval()});
  }
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(batches.begin(), batches.end(), shuffle_rng);
    Scalar epoch_loss = 0;
    for (const auto& batch : batches) {
      std::vector<TrainingExample> items;
      items.reserve(batch.size());
      for (std::size_t k : batch) items.push_back(examples[k]);
      epoch_loss += train_refinement_step(ckpt.model, items, refinement, adam);
    }
    EpochLog entry{epoch, epoch_loss / static_cast<Scalar>(examples.size()), std::nullopt};
    if (dev_corpus != nullptr && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      entry.dev = dev_eval();
    }
    if (log != nullptr) {
      *log << "epoch " << epoch << " loss " << entry.loss;
      if (entry.dev) *log << " dev UAS " << entry.dev->uas << " LAS " << entry.dev->las;
      *log << '\n';
    }
    const bool stop = entry.dev && config.stop_at_dev_las >= 0 &&
                      entry.dev->las >= config.stop_at_dev_las;
    if (entry.dev && entry.dev->las > best_las) {
      best_las = entry.dev->las;
      best = snapshot(ckpt.model.params());
      result.best_epoch = epoch;
    }
    result.epochs.push_back(std::move(entry));
    if (stop) break;
  }
  if (dev_corpus != nullptr) {
    if (best_las >= 0) restore(ckpt.model.params(), best);
  } else {
    result.best_epoch = static_cast<int>(result.epochs.size());
  }
  if (!config.checkpoint.empty()) save_checkpoint(ckpt, config.checkpoint);
  return result;
}

DepTree parse_sentence(const Checkpoint& checkpoint, const Sentence& sentence,
                       const ParseOptions& options, RefinementTrace* trace) {
  if (sentence.size() == 0) throw ValueError("cannot parse an empty sentence");
  RefinementConfig cfg = checkpoint.refinement;
  if (options.t_max) cfg.t_max = *options.t_max;
  cfg.init = InitMode::kEmpty;
  cfg.schedule = StageSchedule::kFullGraph;
  const std::vector<Index> ids = checkpoint.vocab.encode(sentence);
  RefinementResult r = refine(checkpoint.model, ids, cfg);
  if (trace != nullptr) *trace = r.trace;
  return graph_to_dep_tree(r.graph, checkpoint.vocab.relations());
}

Corpus parse(const Checkpoint& checkpoint, const Corpus& input, const ParseOptions& options) {
  Corpus out;
  out.sentences.reserve(input.size());
  for (const auto& s : input.sentences) {
    Sentence p;
    p.forms = s.forms;
    p.tree = parse_sentence(checkpoint, s, options);
    out.sentences.push_back(std::move(p));
  }
  return out;
}

}  // namespace g2gt
