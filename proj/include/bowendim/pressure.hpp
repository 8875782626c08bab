#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "bowendim/common.hpp"
#include "bowendim/model.hpp"
#include "bowendim/perron.hpp"
#include "bowendim/potentials.hpp"
#include "bowendim/subshift.hpp"

namespace bowendim {

// Transfer matrix of a locally constant potential. States are the admissible
// (depth-1)-words (symbols when depth is 1); the edge from w to w' carries
// exp of the potential on the depth-word spanned by the transition.
struct TransferAssembly {
  std::vector<Word> states;
  std::vector<std::uint32_t> row_ptr, col;
  std::vector<double> logw;

  static TransferAssembly build(const Subshift& s, const LocallyConstantPotential& pot,
                                const Caps& caps = {}) {
    if (pot.depth == 0) throw std::invalid_argument("potential depth must be >= 1");
    TransferAssembly a;
    const std::size_t state_len = pot.depth > 1 ? pot.depth - 1 : 1;
    a.states = admissible_words(s, state_len, caps);
    a.row_ptr.assign(a.states.size() + 1, 0);
    for (std::size_t i = 0; i < a.states.size(); ++i) {
      const Word& w = a.states[i];
      for (Symbol b : s.successors(w.back())) {
        Word next(w.begin() + (pot.depth > 1 ? 1 : 0), w.end());
        if (pot.depth > 1) next.push_back(b);
        else next = Word{b};
        a.col.push_back(static_cast<std::uint32_t>(word_rank(a.states, next)));
        if (pot.depth > 1) {
          Word edge = w;
          edge.push_back(b);
          a.logw.push_back(pot.value(edge));
        } else {
          a.logw.push_back(pot.value(Word{b}));
        }
      }
      a.row_ptr[i + 1] = static_cast<std::uint32_t>(a.col.size());
    }
    return a;
  }

  SparseTransfer op() const {
    return SparseTransfer(states.size(), row_ptr, col, logw);
  }
};

struct PressureResult {
  double value = 0.0;   // per base step, in nats
  PerronData meta;
};

// Exact topological pressure of a locally constant potential: log of the
// Perron root of its transfer matrix.
inline PressureResult pressure_exact(const Subshift& s, const LocallyConstantPotential& pot,
                                     const Caps& caps = {}, bool need_left = false,
                                     TransferAssembly* keep = nullptr) {
  s.require_irreducible("pressure_exact");
  TransferAssembly a = TransferAssembly::build(s, pot, caps);
  SparseTransfer op = a.op();
  PressureResult r;
  r.meta = perron(op, need_left);
  r.value = r.meta.log_rho;
  if (keep) *keep = std::move(a);
  return r;
}

// Finite-n partition sum over cylinders: (1/n) log sum over admissible n-words
// of exp(sup of the n-step Birkhoff sum on the cylinder). For locally constant
// potentials the sup splits into the part the word determines plus an exact
// maximization over the depth-1 remaining steps.
inline double pressure_cylinder_sum(const Subshift& s, const LocallyConstantPotential& pot,
                                    std::size_t n, const Caps& caps = {}) {
  if (n < pot.depth)
    throw std::invalid_argument("pressure_cylinder_sum: n must be >= potential depth");
  const std::size_t k = pot.depth;
  // tail[m][state]: max over admissible continuations of length m of the sum of
  // the potential over the windows that straddle the word boundary.
  std::vector<Word> states;
  std::vector<std::vector<double>> tail;
  if (k > 1) {
    states = admissible_words(s, k - 1, caps);
    tail.assign(k, std::vector<double>(states.size(), 0.0));
    for (std::size_t m = 1; m < k; ++m) {
      for (std::size_t i = 0; i < states.size(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (Symbol b : s.successors(states[i].back())) {
          Word edge = states[i];
          edge.push_back(b);
          Word next(edge.begin() + 1, edge.end());
          const double v = pot.value(edge) + tail[m - 1][word_rank(states, next)];
          best = std::max(best, v);
        }
        tail[m][i] = best;
      }
    }
  }
  const auto words = admissible_words(s, n, caps);
  std::vector<double> terms(words.size());
  parallel_for(words.size(), [&](std::size_t wi) {
    const Word& w = words[wi];
    double acc = 0.0;
    for (std::size_t t = 0; t + k <= n; ++t) {
      Word window(w.begin() + t, w.begin() + t + k);
      acc += pot.value(window);
    }
    if (k > 1) {
      Word last(w.end() - (k - 1), w.end());
      acc += tail[k - 1][word_rank(states, last)];
    }
    terms[wi] = acc;
  });
  return log_sum_exp(terms) / static_cast<double>(n);
}

// Pressure evaluator for one power level N: the admissible N-words and their
// band data are computed once, then any singular-value family parameter is a
// cheap reweighting of the junction transfer operator.
class LevelPressure {
 public:
  LevelPressure(const HorseshoeModel& model, std::size_t level, const Caps& caps = {})
      : model_(model), level_(level) {
    model.shift().require_irreducible("pressure at a power level");
    if (level == 0) throw std::invalid_argument("level must be >= 1");
    words_ = admissible_words(model.shift(), level, caps);
    data_.resize(words_.size());
    parallel_for(words_.size(), [&](std::size_t k) {
      data_[k] = word_band_data(model_, words_[k]);
    });
    first_.resize(words_.size());
    last_.resize(words_.size());
    for (std::size_t k = 0; k < words_.size(); ++k) {
      first_[k] = words_[k].front();
      last_[k] = words_[k].back();
    }
  }

  std::size_t level() const { return level_; }
  std::size_t word_count() const { return words_.size(); }
  const std::vector<Word>& words() const { return words_; }
  const std::vector<WordBandData>& data() const { return data_; }

  // (1/N) P(sigma^N, family at horizon N), per base step.
  double value(const FamilySpec& spec) const {
    std::vector<double> logw(words_.size());
    parallel_for(words_.size(), [&](std::size_t k) {
      logw[k] = family_value(model_, data_[k], spec);
    });
    JunctionTransfer op(model_.shift(), first_, last_, logw);
    return perron(op).log_rho / static_cast<double>(level_);
  }

 private:
  const HorseshoeModel& model_;
  std::size_t level_;
  std::vector<Word> words_;
  std::vector<WordBandData> data_;
  std::vector<Symbol> first_, last_;
};

// (1/N) P(f^N, family(., f^N)), reported per base step.
inline double pressure_power(const HorseshoeModel& model, const FamilySpec& spec,
                             std::size_t level, const Caps& caps = {}) {
  return LevelPressure(model, level, caps).value(spec);
}

struct PressureTrace {
  std::vector<std::size_t> levels;  // N = 2^k, k = 0..K
  std::vector<double> values;       // per base step
  double estimate = 0.0;            // last value
  double min_step = 0.0;            // min consecutive difference (monotonicity certificate)
};

// Levelwise pressure sequence p_k = (1/2^k) P(f^{2^k}, family) for k = 0..K.
// For the negated norm families the sequence is nondecreasing and its limit is
// the variationally defined pressure of the super-additive family; for additive
// families it is constant.
inline PressureTrace superadditive_pressure(const HorseshoeModel& model,
                                            const FamilySpec& spec, std::size_t max_level_k,
                                            const Caps& caps = {}) {
  PressureTrace t;
  double prev = 0.0;
  t.min_step = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= max_level_k; ++k) {
    const std::size_t n = static_cast<std::size_t>(1) << k;
    const double p = pressure_power(model, spec, n, caps);
    if (k > 0) t.min_step = std::min(t.min_step, p - prev);
    t.levels.push_back(n);
    t.values.push_back(p);
    prev = p;
  }
  if (t.values.size() == 1) t.min_step = 0.0;
  t.estimate = t.values.back();
  return t;
}

}  // namespace bowendim
