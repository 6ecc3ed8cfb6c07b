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

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace g2gt {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::optional<int> parse_int(const std::string& s) {
  int v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

DataError data_error(const std::string& source, std::size_t line, const std::string& what) {
  return DataError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::vector<DepTree> Corpus::trees() const {
  std::vector<DepTree> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(s.tree);
  return out;
}

Corpus read_conllu(std::istream& in, const std::string& source) {
  Corpus corpus;
  Sentence current;
  std::size_t sentence_start = 0;
  std::size_t line_no = 0;
  std::string line;

  auto finish = [&]() {
    if (current.forms.empty()) return;
    const int n = static_cast<int>(current.size());
    for (int k = 0; k < n; ++k) {
      const int h = current.tree.head[k];
      if (h < 0 || h > n) {
        throw data_error(source, sentence_start,
                         "token " + std::to_string(k + 1) + " has head " + std::to_string(h) +
                             " outside the sentence");
      }
    }
    corpus.sentences.push_back(std::move(current));
    current = Sentence{};
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      finish();
      continue;
    }
    if (line.front() == '#') continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 10) {
      throw data_error(source, line_no,
                       "expected 10 tab-separated columns, found " + std::to_string(cols.size()));
    }
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    const auto token_id = parse_int(id);
    if (!token_id) throw data_error(source, line_no, "malformed token id '" + id + "'");
    if (current.forms.empty()) sentence_start = line_no;
    if (*token_id != static_cast<int>(current.size()) + 1) {
      throw data_error(source, line_no,
                       "token id " + id + " out of sequence (expected " +
                           std::to_string(current.size() + 1) + ")");
    }
    const auto head = parse_int(cols[6]);
    if (!head) throw data_error(source, line_no, "non-integer HEAD '" + cols[6] + "'");
    current.forms.push_back(cols[1]);
    current.tree.head.push_back(*head);
    current.tree.deprel.push_back(cols[7]);
  }
  finish();
  return corpus;
}

Corpus load_conllu(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_conllu(in, path.string());
}

void write_conllu(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.sentences) {
    if (s.tree.head.size() != s.size() || s.tree.deprel.size() != s.size()) {
      throw ValueError("write_conllu: sentence without a prediction for every token");
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s.tree.head[k] == kNoHead) {
        throw ValueError("write_conllu: token " + std::to_string(k + 1) + " has no head");
      }
      out << (k + 1) << '\t' << s.forms[k] << "\t_\t_\t_\t_\t" << s.tree.head[k] << '\t'
          << s.tree.deprel[k] << "\t_\t_\n";
    }
    out << '\n';
  }
}

void write_conllu(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_conllu(out, corpus);
  out.flush();
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace g2gt
