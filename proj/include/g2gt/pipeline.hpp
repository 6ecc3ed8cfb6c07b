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

#ifndef G2GT_PIPELINE_HPP_
#define G2GT_PIPELINE_HPP_

// Dependency-parsing application layer: CoNLL-U corpora, vocabularies,
// attachment-score evaluation, configuration, checkpoints, training and
// parsing.

#include "g2gt/graph.hpp"
#include "g2gt/rngt.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace g2gt {

struct Sentence {
  std::vector<std::string> forms;
  DepTree tree;

  std::size_t size() const { return forms.size(); }
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Corpus {
  std::vector<Sentence> sentences;

  std::size_t size() const { return sentences.size(); }
  std::size_t token_count() const;
  std::vector<DepTree> trees() const;
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// 10 tab-separated columns; '#' lines are comments; multiword ranges ("1-2")
// and empty nodes ("1.1") are skipped. Raises DataError with the line number.
Corpus read_conllu(std::istream& in, const std::string& source = "<stream>");
Corpus load_conllu(const std::filesystem::path& path);
// Writes FORM, HEAD and DEPREL; every other column is "_".
void write_conllu(std::ostream& out, const Corpus& corpus);
void write_conllu(const Corpus& corpus, const std::filesystem::path& path);

class Vocab {
 public:
  static constexpr Index kUnk = 0;
  static constexpr Index kPad = 1;
  static constexpr Index kRoot = 2;

  Vocab();
  static Vocab build(const Corpus& corpus, int min_count = 1);
  static Vocab from_tables(std::vector<std::string> tokens, std::vector<std::string> deprels);

  Index size() const { return static_cast<Index>(tokens_.size()); }
  Index token_id(const std::string& form) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::string>& deprels() const { return deprels_; }
  const RelationVocab& relations() const { return relations_; }

  // ROOT followed by the ids of the sentence's forms.
  std::vector<Index> encode(const Sentence& sentence) const;

 private:
  Vocab(std::vector<std::string> tokens, std::vector<std::string> deprels, int);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, Index> index_;
  std::vector<std::string> deprels_;
  RelationVocab relations_;
};

struct SentenceScore {
  std::size_t tokens = 0;
  std::size_t correct_heads = 0;
  std::size_t correct_labeled = 0;
};

struct EvalReport {
  double uas = 0;  // percent
  double las = 0;  // percent
  std::size_t tokens = 0;
  std::vector<SentenceScore> sentences;
};

// All tokens count, punctuation included.
EvalReport evaluate(const std::vector<DepTree>& pred, const std::vector<DepTree>& gold);

// Declarative training configuration. See docs/config.md for the schema.
struct TrainConfig {
  std::string train_file;
  std::string dev_file;
  std::string checkpoint;

  Index d = 64;
  Index heads = 4;
  Index d_ff = 128;
  Index layers = 2;
  Index edge_dim = 32;
  Index max_positions = 128;
  Scalar init_std = 0.02;
  bool use_key_term = true;
  bool use_value_term = true;
  bool freeze_none_relation = false;
  GraphInputMode input_mode = GraphInputMode::kLabeled;

  std::uint64_t seed = 1;
  int epochs = 100;
  int batch_size = 8;
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar adam_eps = 1e-8;
  int min_count = 1;
  int t_train = 2;
  int t_max = 3;
  int eval_every = 1;
  // Stop once dev LAS reaches this value (percent); negative disables.
  double stop_at_dev_las = -1;

  // Applies one "key = value" setting; raises ValueError on unknown keys or
  // malformed values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  std::map<std::string, std::string> to_map() const;
};

// "key = value" lines, '#' comments, blank lines ignored.
std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& source);
TrainConfig load_train_config(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Vocab vocab;
  RefinementConfig refinement;
  G2GTModel model;
};

// Layout documented in docs/checkpoint_format.md.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<stream>");

std::vector<TrainingExample> make_examples(const Corpus& corpus, const Vocab& vocab);

struct EpochLog {
  int epoch = 0;
  Scalar loss = 0;
  std::optional<EvalReport> dev;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
};

// Deterministic given config.seed. When a dev corpus is configured the
// best-dev parameters are kept. Writes config.checkpoint when non-empty.
TrainResult train(const TrainConfig& config, std::ostream* log = nullptr);
TrainResult train(const TrainConfig& config, const Corpus& train_corpus,
                  const Corpus* dev_corpus, std::ostream* log = nullptr);

struct ParseOptions {
  std::optional<int> t_max;
};

DepTree parse_sentence(const Checkpoint& checkpoint, const Sentence& sentence,
                       const ParseOptions& options = {}, RefinementTrace* trace = nullptr);
Corpus parse(const Checkpoint& checkpoint, const Corpus& input, const ParseOptions& options = {});

}  // namespace g2gt

#endif  // G2GT_PIPELINE_HPP_
