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

#include "doctest.h"

#include "g2gt/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace g2gt;
namespace fs = std::filesystem;

namespace {

const fs::path kData = G2GT_TEST_DATA;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "g2gt_test_pipeline";
  fs::create_directories(dir);
  return dir;
}

TrainConfig small_config() {
  TrainConfig c;
  c.d = 16;
  c.heads = 2;
  c.d_ff = 32;
  c.layers = 1;
  c.edge_dim = 8;
  c.epochs = 3;
  c.batch_size = 4;
  c.lr = 3e-3;
  return c;
}

DepTree tree(std::vector<int> heads, std::vector<std::string> rels) {
  return DepTree{std::move(heads), std::move(rels)};
}

}  // namespace

TEST_SUITE("conllu") {
  TEST_CASE("two-token sentence") {
    const Corpus c = load_conllu(kData / "two_tokens.conllu");
    REQUIRE(c.size() == 1);
    CHECK(c.token_count() == 2);
    CHECK(c.sentences[0].forms == std::vector<std::string>{"Hello", "world"});
    CHECK(c.sentences[0].tree == tree({0, 1}, {"root", "obj"}));
  }

  TEST_CASE("comments, multiword ranges and empty nodes") {
    const Corpus c = load_conllu(kData / "ranges.conllu");
    REQUIRE(c.size() == 2);
    CHECK(c.sentences[0].forms == std::vector<std::string>{"Vamos", "nos", "a", "el", "mar", "."});
    CHECK(c.sentences[0].tree.head == std::vector<int>{0, 1, 5, 5, 1, 1});
    CHECK(c.sentences[1].forms == std::vector<std::string>{"Sí"});
  }

  TEST_CASE("empty file") {
    CHECK(load_conllu(kData / "empty.conllu").size() == 0);
  }

  TEST_CASE("wrong column count names the line") {
    try {
      load_conllu(kData / "bad_columns.conllu");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("bad_columns.conllu:2:") != std::string::npos);
    }
  }

  TEST_CASE("non-integer head names the line") {
    try {
      load_conllu(kData / "bad_head.conllu");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string what = e.what();
      CHECK(what.find("bad_head.conllu:3:") != std::string::npos);
      CHECK(what.find("HEAD") != std::string::npos);
    }
  }

  TEST_CASE("head outside the sentence") {
    std::istringstream in("1\ta\t_\t_\t_\t_\t4\troot\t_\t_\n");
    CHECK_THROWS_AS(read_conllu(in), DataError);
  }

  TEST_CASE("missing file") {
    CHECK_THROWS_AS(load_conllu(kData / "does_not_exist.conllu"), DataError);
  }

  TEST_CASE("writer fills FORM, HEAD and DEPREL only") {
    const Corpus c = load_conllu(kData / "two_tokens_full.conllu");
    std::ostringstream out;
    write_conllu(out, c);
    CHECK(out.str() == slurp(kData / "two_tokens.conllu"));
  }

  TEST_CASE("load, write, load is the identity") {
    for (const char* name : {"two_tokens.conllu", "ranges.conllu", "toy.conllu", "empty.conllu"}) {
      const Corpus c = load_conllu(kData / name);
      const fs::path out = scratch_dir() / name;
      write_conllu(c, out);
      CHECK(load_conllu(out) == c);
    }
  }

  TEST_CASE("empty corpus writes an empty file") {
    std::ostringstream out;
    write_conllu(out, Corpus{});
    CHECK(out.str().empty());
  }

  TEST_CASE("missing predictions are rejected") {
    Corpus c;
    c.sentences.push_back({{"a", "b"}, tree({0, kNoHead}, {"root", ""})});
    std::ostringstream out;
    CHECK_THROWS_AS(write_conllu(out, c), ValueError);
    CHECK_THROWS_AS(write_conllu(c, fs::path("/nonexistent-dir/x.conllu")), DataError);
  }
}

TEST_SUITE("evaluate") {
  TEST_CASE("perfect prediction") {
    const auto gold = load_conllu(kData / "toy.conllu").trees();
    const EvalReport r = evaluate(gold, gold);
    CHECK(r.uas == 100.0);
    CHECK(r.las == 100.0);
    CHECK(r.tokens == 58);
  }

  TEST_CASE("one wrong head out of ten") {
    const DepTree gold = tree({2, 0, 2, 5, 3, 5, 8, 6, 2, 2}, std::vector<std::string>(10, "x"));
    DepTree pred = gold;
    pred.head[6] = 6;
    const EvalReport r = evaluate({pred}, {gold});
    CHECK(r.uas == doctest::Approx(90.0));
    CHECK(r.las == doctest::Approx(90.0));
  }

  TEST_CASE("two wrong labels out of ten") {
    const DepTree gold = tree({2, 0, 2, 5, 3, 5, 8, 6, 2, 2}, std::vector<std::string>(10, "x"));
    DepTree pred = gold;
    pred.deprel[0] = "y";
    pred.deprel[9] = "y";
    const EvalReport r = evaluate({pred}, {gold});
    CHECK(r.uas == 100.0);
    CHECK(r.las == doctest::Approx(80.0));
  }

  TEST_CASE("labeled score never exceeds unlabeled") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> head(0, 6), rel(0, 2);
    for (int trial = 0; trial < 200; ++trial) {
      DepTree gold, pred;
      for (int k = 0; k < 6; ++k) {
        gold.head.push_back(head(rng));
        pred.head.push_back(head(rng));
        gold.deprel.push_back(std::to_string(rel(rng)));
        pred.deprel.push_back(std::to_string(rel(rng)));
      }
      const EvalReport r = evaluate({pred}, {gold});
      REQUIRE(r.las <= r.uas);
    }
  }

  TEST_CASE("misaligned corpora") {
    CHECK_THROWS_AS(evaluate({tree({0}, {"a"})}, {}), ValueError);
    CHECK_THROWS_AS(evaluate({tree({0}, {"a"})}, {tree({0, 1}, {"a", "b"})}), ValueError);
  }
}

TEST_SUITE("config") {
  TEST_CASE("key-value parsing") {
    std::istringstream in("# model\nd = 32\n\nheads=4   # per layer\nuse_key_term = false\n"
                          "train_file = data/train.conllu\n");
    TrainConfig c;
    for (const auto& [k, v] : read_key_values(in, "cfg")) c.set(k, v);
    CHECK(c.d == 32);
    CHECK(c.heads == 4);
    CHECK_FALSE(c.use_key_term);
    CHECK(c.train_file == "data/train.conllu");
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("to_map round trips through set") {
    TrainConfig a = small_config();
    a.train_file = "x";
    a.lr = 0.0123;
    a.input_mode = GraphInputMode::kUnlabeled;
    TrainConfig b;
    for (const auto& [k, v] : a.to_map()) b.set(k, v);
    CHECK(b.to_map() == a.to_map());
  }

  TEST_CASE("errors") {
    TrainConfig c;
    CHECK_THROWS_AS(c.set("depth", "3"), ValueError);
    CHECK_THROWS_AS(c.set("d", "3.5"), ValueError);
    CHECK_THROWS_AS(c.set("use_key_term", "maybe"), ValueError);
    CHECK_THROWS_AS(c.set("input_mode", "sideways"), ValueError);
    std::istringstream bad("d 32\n");
    CHECK_THROWS_AS(read_key_values(bad, "cfg"), ValueError);
    CHECK_THROWS_AS(c.validate(), ValueError);  // no train_file
    c.train_file = "x";
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), ValueError);
    CHECK_THROWS_AS(load_train_config(kData / "missing.cfg"), DataError);
  }
}

TEST_SUITE("vocab") {
  TEST_CASE("reserved ids and unknown words") {
    const Corpus c = load_conllu(kData / "two_tokens.conllu");
    const Vocab v = Vocab::build(c);
    CHECK(v.token_id("Hello") >= 3);
    CHECK(v.token_id("nowhere") == Vocab::kUnk);
    const Sentence s{{"world", "nowhere"}, {}};
    CHECK(v.encode(s) == std::vector<Index>{Vocab::kRoot, v.token_id("world"), Vocab::kUnk});
    CHECK(v.deprels() == std::vector<std::string>{"obj", "root"});
  }

  TEST_CASE("min_count drops rare words") {
    const Corpus c = load_conllu(kData / "toy.conllu");
    const Vocab v = Vocab::build(c, 2);
    CHECK(v.token_id(".") != Vocab::kUnk);
    CHECK(v.token_id("cat") == Vocab::kUnk);
  }

  TEST_CASE("malformed tables") {
    CHECK_THROWS_AS(Vocab::from_tables({"a", "b"}, {}), DataError);
    CHECK_THROWS_AS(Vocab::from_tables({"<unk>", "<pad>", "<root>", "x", "x"}, {}), DataError);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("save and load keep forward outputs bit-identical") {
    const Corpus c = load_conllu(kData / "toy.conllu");
    TrainConfig cfg = small_config();
    cfg.epochs = 2;
    const TrainResult r = train(cfg, c, nullptr);
    const fs::path path = scratch_dir() / "model.ckpt";
    save_checkpoint(r.checkpoint, path);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.vocab.tokens() == r.checkpoint.vocab.tokens());
    CHECK(loaded.refinement.t_max == r.checkpoint.refinement.t_max);
    for (const auto& s : c.sentences) {
      const auto ids = r.checkpoint.vocab.encode(s);
      const LabeledGraph g = dep_tree_to_graph(s.tree, r.checkpoint.vocab.relations());
      const Matrix a = r.checkpoint.model.forward(ids, g).scores.value();
      const Matrix b = loaded.model.forward(ids, g).scores.value();
      REQUIRE(a == b);
    }
    // A second save of the loaded checkpoint is byte-identical.
    std::ostringstream first, second;
    write_checkpoint(first, r.checkpoint);
    write_checkpoint(second, loaded);
    CHECK(first.str() == second.str());
  }

  std::string saved_bytes() {
    TrainConfig cfg = small_config();
    cfg.epochs = 0;
    const TrainResult r = train(cfg, load_conllu(kData / "two_tokens.conllu"), nullptr);
    std::ostringstream out;
    write_checkpoint(out, r.checkpoint);
    return out.str();
  }

  TEST_CASE("truncated file") {
    const std::string bytes = saved_bytes();
    for (std::size_t keep : {std::size_t{0}, std::size_t{5}, std::size_t{14}, bytes.size() / 2,
                             bytes.size() - 1}) {
      std::istringstream in(bytes.substr(0, keep));
      CHECK_THROWS_AS(read_checkpoint(in), DataError);
    }
  }

  TEST_CASE("bumped version") {
    std::string bytes = saved_bytes();
    bytes[8] = static_cast<char>(kCheckpointVersion + 1);
    std::istringstream in(bytes);
    try {
      read_checkpoint(in);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }

  TEST_CASE("corrupted payload") {
    std::string bytes = saved_bytes();
    bytes[bytes.size() / 2] ^= 0x5a;
    std::istringstream in(bytes);
    CHECK_THROWS_AS(read_checkpoint(in), DataError);
  }

  TEST_CASE("not a checkpoint") {
    CHECK_THROWS_AS(load_checkpoint(kData / "toy.conllu"), DataError);
    CHECK_THROWS_AS(load_checkpoint(kData / "missing.ckpt"), DataError);
  }
}

TEST_SUITE("train and parse") {
  TEST_CASE("zero epochs still produce a usable checkpoint") {
    const Corpus c = load_conllu(kData / "toy.conllu");
    TrainConfig cfg = small_config();
    cfg.epochs = 0;
    const TrainResult r = train(cfg, c, &c);
    REQUIRE(r.epochs.size() == 1);
    REQUIRE(r.epochs[0].dev.has_value());
    CHECK(r.epochs[0].dev->tokens == 58);
    const Corpus parsed = parse(r.checkpoint, c);
    for (const auto& s : parsed.sentences) CHECK(is_well_formed(s.tree, true));
  }

  TEST_CASE("same seed gives identical runs") {
    const Corpus c = load_conllu(kData / "toy.conllu");
    const TrainConfig cfg = small_config();
    const TrainResult a = train(cfg, c, &c);
    const TrainResult b = train(cfg, c, &c);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t k = 0; k < a.epochs.size(); ++k) CHECK(a.epochs[k].loss == b.epochs[k].loss);
    std::ostringstream ca, cb;
    write_checkpoint(ca, a.checkpoint);
    write_checkpoint(cb, b.checkpoint);
    CHECK(ca.str() == cb.str());
    CHECK(parse(a.checkpoint, c) == parse(b.checkpoint, c));

    TrainConfig other = cfg;
    other.seed = cfg.seed + 1;
    CHECK(train(other, c, &c).epochs[0].loss != a.epochs[0].loss);
  }

  TEST_CASE("loss goes down") {
    const Corpus c = load_conllu(kData / "toy.conllu");
    TrainConfig cfg = small_config();
    cfg.epochs = 15;
    const TrainResult r = train(cfg, c, nullptr);
    CHECK(r.epochs.back().loss < r.epochs.front().loss);
  }

  TEST_CASE("single-token sentence attaches to the root") {
    const Corpus c = load_conllu(kData / "toy.conllu");
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    const TrainResult r = train(cfg, c, nullptr);
    const DepTree t = parse_sentence(r.checkpoint, Sentence{{"cat"}, {}});
    CHECK(t.head == std::vector<int>{0});
    CHECK(t.deprel.size() == 1);
    CHECK_FALSE(t.deprel[0].empty());
  }

  TEST_CASE("unknown words still receive a tree") {
    const Corpus c = load_conllu(kData / "toy.conllu");
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    const TrainResult r = train(cfg, c, nullptr);
    const Sentence s{{"zyx", "wvu", "tsr", "qpo", "nml"}, {}};
    RefinementTrace trace;
    const DepTree t = parse_sentence(r.checkpoint, s, ParseOptions{2}, &trace);
    CHECK(is_well_formed(t, true));
    CHECK(trace.steps.size() <= 3);
  }

  TEST_CASE("configuration errors surface before training") {
    TrainConfig cfg = small_config();
    CHECK_THROWS_AS(train(cfg), ValueError);
    cfg.train_file = (kData / "missing.conllu").string();
    CHECK_THROWS_AS(train(cfg), DataError);
    cfg.train_file = (kData / "toy.conllu").string();
    cfg.dev_file = (kData / "missing.conllu").string();
    CHECK_THROWS_AS(train(cfg), DataError);
    CHECK_THROWS_AS(train(small_config(), Corpus{}, nullptr), DataError);
  }

  TEST_CASE("train writes the configured checkpoint") {
    TrainConfig cfg = small_config();
    cfg.epochs = 1;
    cfg.train_file = (kData / "toy.conllu").string();
    cfg.checkpoint = (scratch_dir() / "from_config.ckpt").string();
    fs::remove(cfg.checkpoint);
    std::ostringstream log;
    train(cfg, &log);
    CHECK(fs::exists(cfg.checkpoint));
    CHECK(log.str().find("epoch 1 loss") != std::string::npos);
  }
}
