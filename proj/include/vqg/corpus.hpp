#pragma once

// Vocabulary construction, token encoding, JSONL dataset loading and
// padded batching.

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqg/common.hpp"
#include "vqg/synthworld.hpp"
#include "vqg/tensor.hpp"

namespace vqg::corpus {

using nlohmann::json;

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;

// ====================================================================
//  Vocabulary
// ====================================================================

class Vocabulary {
 public:
  Vocabulary() {
    for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(s);
  }

  // every token with corpus frequency >= min_count, ordered by
  // frequency desc then lexicographic, after the four specials
  static Vocabulary build(const std::vector<std::string>& texts, int min_count) {
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    if (texts.empty()) throw DataError("empty corpus");
    std::map<std::string, long> counts;
    for (const auto& t : texts)
      for (const auto& tok : tokenize(t)) ++counts[tok];
    std::vector<std::pair<std::string, long>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [tok, n] : items)
      if (n >= min_count) v.add(tok);
    return v;
  }

  int size() const { return static_cast<int>(id_to_token_.size()); }

  int id(const std::string& tok) const {
    auto it = token_to_id_.find(tok);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  const std::string& token(int i) const {
    if (i < 0 || i >= size()) throw DataError("token id out of range");
    return id_to_token_[static_cast<std::size_t>(i)];
  }

  bool contains(const std::string& tok) const { return token_to_id_.count(tok) > 0; }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> ids{kBos};
    for (const auto& tok : tokenize(text)) ids.push_back(id(tok));
    ids.push_back(kEos);
    return ids;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::vector<std::string> toks;
    for (int i : ids) {
      if (i == kBos || i == kPad) continue;
      if (i == kEos) break;
      toks.push_back(token(i));
    }
    return join_tokens(toks);
  }

  json to_json() const { return json(id_to_token_); }

  static Vocabulary from_json(const json& j) {
    const auto toks = j.get<std::vector<std::string>>();
    if (toks.size() < 4 || toks[0] != "<pad>" || toks[1] != "<bos>" || toks[2] != "<eos>" ||
        toks[3] != "<unk>")
      throw FormatError("vocabulary json missing special tokens");
    Vocabulary v;
    for (std::size_t i = 4; i < toks.size(); ++i) v.add(toks[i]);
    return v;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary: " + path);
    out << to_json().dump(2) << "\n";
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read vocabulary: " + path);
    json j;
    in >> j;
    return from_json(j);
  }

  std::string hash() const {
    std::string joined;
    for (const auto& t : id_to_token_) {
      joined += t;
      joined += '\n';
    }
    return to_hex(fnv1a64(joined));
  }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, int> token_to_id_;

  void add(const std::string& tok) {
    if (token_to_id_.count(tok)) return;
    token_to_id_[tok] = size();
    id_to_token_.push_back(tok);
  }
};

// ====================================================================
//  Records and examples
// ====================================================================

// raw JSONL record as written by synthworld::emit_dataset
struct Record {
  std::string id;
  std::vector<double> features;
  std::string question;
  std::string answer;
  std::string category;
  synthworld::Scene scene;
};

inline std::vector<Record> load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::vector<Record> recs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("bad JSONL line " + std::to_string(recs.size() + 1) + ": " + e.what());
    }
    Record r;
    r.id = j.at("id").get<std::string>();
    r.features = j.at("features").get<std::vector<double>>();
    r.question = j.at("question").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.category = j.at("category").get<std::string>();
    if (j.contains("scene")) r.scene = synthworld::Scene::from_json(j.at("scene"));
    recs.push_back(std::move(r));
  }
  if (recs.empty()) throw DataError("dataset is empty: " + path);
  return recs;
}

// one training triple: image features, question ids, answer ids, category
struct QAExample {
  std::vector<double> features;
  std::vector<int> question;  // BOS ... EOS
  std::vector<int> answer;    // BOS ... EOS
  int category = 0;
};

inline QAExample encode_record(const Record& r, const Vocabulary& vocab,
                               const std::vector<std::string>& categories) {
  QAExample e;
  e.features = r.features;
  e.question = vocab.encode(r.question);
  e.answer = vocab.encode(r.answer);
  auto it = std::find(categories.begin(), categories.end(), r.category);
  if (it == categories.end()) throw DataError("record category not in category list: " + r.category);
  e.category = static_cast<int>(it - categories.begin());
  if (e.question.size() < 3) throw DataError("question too short: " + r.question);
  if (e.answer.size() < 3) throw DataError("answer too short: " + r.answer);
  return e;
}

// ====================================================================
//  Batching
// ====================================================================

struct Batch {
  Tensor features;                       // B x D
  std::vector<std::vector<int>> questions;  // B rows, padded right to Lq
  std::vector<int> question_lengths;
  std::vector<std::vector<int>> answers;    // B rows, padded right to La
  std::vector<int> answer_lengths;
  Tensor category_onehot;                // B x C

  int size() const { return features.rows; }
};

inline Batch make_batch(const std::vector<QAExample>& examples, const std::vector<std::size_t>& idx,
                        int num_categories) {
  if (idx.empty()) throw DataError("empty batch");
  const int b = static_cast<int>(idx.size());
  const int d = static_cast<int>(examples[idx[0]].features.size());
  Batch out;
  out.features = Tensor(b, d);
  out.category_onehot = Tensor(b, num_categories);
  std::size_t lq = 0, la = 0;
  for (auto i : idx) {
    lq = std::max(lq, examples[i].question.size());
    la = std::max(la, examples[i].answer.size());
  }
  out.questions.assign(static_cast<std::size_t>(b), std::vector<int>(lq, kPad));
  out.answers.assign(static_cast<std::size_t>(b), std::vector<int>(la, kPad));
  for (int r = 0; r < b; ++r) {
    const QAExample& e = examples[idx[static_cast<std::size_t>(r)]];
    if (static_cast<int>(e.features.size()) != d) throw ShapeError("feature dim varies in batch");
    for (int j = 0; j < d; ++j) out.features.at(r, j) = e.features[static_cast<std::size_t>(j)];
    std::copy(e.question.begin(), e.question.end(), out.questions[static_cast<std::size_t>(r)].begin());
    std::copy(e.answer.begin(), e.answer.end(), out.answers[static_cast<std::size_t>(r)].begin());
    out.question_lengths.push_back(static_cast<int>(e.question.size()));
    out.answer_lengths.push_back(static_cast<int>(e.answer.size()));
    if (e.category < 0 || e.category >= num_categories) throw DataError("category index out of range");
    out.category_onehot.at(r, e.category) = 1.0;
  }
  return out;
}

// deterministic shuffle into batches; the final partial batch is kept
inline std::vector<Batch> make_batches(const std::vector<QAExample>& examples, int batch_size,
                                       int num_categories, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    batches.push_back(make_batch(examples, idx, num_categories));
  }
  return batches;
}

}  // namespace vqg::corpus
