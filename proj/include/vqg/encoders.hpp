#pragma once

// Input encoders producing the dense vectors h_i, h_a, h_c. The image
// features act as the frozen backbone representation; the 2-layer map
// here is the trainable adapter on top of it. Answers run through a
// single LSTM layer, categories through an embedding row lookup.

#include <string>
#include <vector>

#include "vqg/nn.hpp"

namespace vqg::encoders {

using ad::Graph;
using ad::Var;
using nn::Linear;
using nn::LstmCell;
using nn::ParamStore;

struct ImageEncoder {
  Linear l1;
  Linear l2;

  ImageEncoder() = default;
  ImageEncoder(ParamStore& ps, int feature_dim, int hidden) {
    l1 = Linear(ps, "enc_image.l1", feature_dim, hidden);
    l2 = Linear(ps, "enc_image.l2", hidden, hidden);
  }

  void init(Rng& rng) {
    l1.init(rng);
    l2.init(rng);
  }

  Var apply(Graph& g, Var features) const {
    return g.tanh(l2.apply(g, g.tanh(l1.apply(g, features))));
  }
};

struct AnswerEncoder {
  ad::Parameter* embedding = nullptr;  // V x H
  LstmCell cell;

  AnswerEncoder() = default;
  AnswerEncoder(ParamStore& ps, int vocab, int hidden) {
    embedding = &ps.create("enc_answer.embedding", vocab, hidden);
    cell = LstmCell(ps, "enc_answer.lstm", hidden, hidden);
  }

  void init(Rng& rng) {
    nn::init_normal(*embedding, rng, 0.08);
    cell.init(rng);
  }

  // h_a = recurrent state at each row's last real token; masked steps
  // carry state through so trailing PAD cannot change the result
  Var apply(Graph& g, const std::vector<std::vector<int>>& answers,
            const std::vector<int>& lengths) const {
    const int b = static_cast<int>(answers.size());
    if (b == 0 || answers[0].empty()) throw ShapeError("encode_answer: empty sequence");
    const int steps = static_cast<int>(answers[0].size());
    LstmCell::State state{g.input(Tensor(b, cell.hidden)), g.input(Tensor(b, cell.hidden))};
    for (int t = 0; t < steps; ++t) {
      std::vector<int> ids(static_cast<std::size_t>(b));
      Tensor mask(b, 1), inv(b, 1);
      for (int r = 0; r < b; ++r) {
        ids[static_cast<std::size_t>(r)] = answers[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)];
        const bool live = t < lengths[static_cast<std::size_t>(r)];
        mask.at(r, 0) = live ? 1.0 : 0.0;
        inv.at(r, 0) = live ? 0.0 : 1.0;
      }
      Var x = g.embed(g.param(*embedding), ids);
      state = cell.step_masked(g, x, state, g.input(mask), g.input(inv));
    }
    return state.h;
  }

  // single-sequence convenience used by the value-level API
  Var apply_one(Graph& g, const std::vector<int>& answer) const {
    return apply(g, {answer}, {static_cast<int>(answer.size())});
  }
};

struct CategoryEncoder {
  ad::Parameter* table = nullptr;  // C x H

  CategoryEncoder() = default;
  CategoryEncoder(ParamStore& ps, int num_categories, int hidden) {
    table = &ps.create("enc_category.table", num_categories, hidden);
  }

  void init(Rng& rng) { nn::init_normal(*table, rng, 0.08); }

  // h_c is the embedding row of the active category: onehot * table
  Var apply(Graph& g, const Tensor& onehot) const {
    validate_onehot(onehot);
    return g.matmul(g.input(onehot), g.param(*table));
  }

  static void validate_onehot(const Tensor& onehot) {
    for (int r = 0; r < onehot.rows; ++r) {
      int ones = 0;
      for (int c = 0; c < onehot.cols; ++c) {
        const double v = onehot.at(r, c);
        if (v == 1.0)
          ++ones;
        else if (v != 0.0)
          throw ValidationError("encode_category: input is not one-hot");
      }
      if (ones != 1) throw ValidationError("encode_category: row does not sum to one");
    }
  }
};

}  // namespace vqg::encoders
