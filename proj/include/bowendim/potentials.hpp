#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bowendim/common.hpp"
#include "bowendim/model.hpp"
#include "bowendim/subshift.hpp"

namespace bowendim {

// Potential that depends on finitely many coordinates: one value per
// admissible depth-word, stored in lexicographic word order.
struct LocallyConstantPotential {
  std::size_t depth = 1;
  std::vector<Word> words;    // admissible depth-words, lex sorted
  std::vector<double> values; // values[k] on cylinder words[k]

  double value(const Word& w) const { return values[word_rank(words, w)]; }

  static LocallyConstantPotential zero(const Subshift& s, const Caps& caps = {}) {
    LocallyConstantPotential p;
    p.depth = 1;
    p.words = admissible_words(s, 1, caps);
    p.values.assign(p.words.size(), 0.0);
    return p;
  }

  static LocallyConstantPotential constant(const Subshift& s, double c,
                                           const Caps& caps = {}) {
    auto p = zero(s, caps);
    p.values.assign(p.words.size(), c);
    return p;
  }

  template <typename Fn>
  static LocallyConstantPotential from_function(const Subshift& s, std::size_t depth,
                                                Fn&& fn, const Caps& caps = {}) {
    LocallyConstantPotential p;
    p.depth = depth;
    p.words = admissible_words(s, depth, caps);
    p.values.resize(p.words.size());
    for (std::size_t k = 0; k < p.words.size(); ++k) p.values[k] = fn(p.words[k]);
    return p;
  }
};

// Singular-value potential on a word of length n, charging s unstable
// directions from the strongest band down. Piecewise linear and strictly
// increasing in s, with breakpoints at the partial sums r_j; value 0 at s = 0.
inline double psi(const HorseshoeModel& model, const WordBandData& data, double s) {
  const BandStructure& b = model.bands();
  const double u = static_cast<double>(b.unstable_dim());
  if (s < 0.0 || s > u) throw std::invalid_argument("psi: s outside [0,u]");
  double acc = 0.0;
  std::size_t d = 0;
  while (d + 1 < b.r.size() && static_cast<double>(b.r[d + 1]) <= s) {
    acc += static_cast<double>(b.m[d]) * data.log_norm[d];
    ++d;
  }
  if (d < b.band_count())
    acc += (s - static_cast<double>(b.r[d])) * data.log_norm[d];
  return acc;
}

// Conorm version: charges t directions from the weakest band up, using the
// smallest singular values and the reversed partial sums r'_j.
inline double psi_hat(const HorseshoeModel& model, const WordBandData& data, double t) {
  const BandStructure& b = model.bands();
  const std::size_t ell = b.band_count();
  const double u = static_cast<double>(b.unstable_dim());
  if (t < 0.0 || t > u) throw std::invalid_argument("psi_hat: t outside [0,u]");
  double acc = 0.0;
  std::size_t d = 0;
  while (d + 1 < b.r_rev.size() && static_cast<double>(b.r_rev[d + 1]) <= t) {
    acc += static_cast<double>(b.m[ell - 1 - d]) * data.log_conorm[ell - 1 - d];
    ++d;
  }
  if (d < ell)
    acc += (t - static_cast<double>(b.r_rev[d])) * data.log_conorm[ell - 1 - d];
  return acc;
}

// Stable potential t' * log of the one-dimensional stable contraction over the
// word; nonpositive, additive in the word.
inline double phi(const HorseshoeModel&, const WordBandData& data, double t_prime) {
  if (t_prime < 0.0 || t_prime > 1.0)
    throw std::invalid_argument("phi: t' outside [0,1]");
  return t_prime * data.stable_log;
}

inline double psi(const HorseshoeModel& model, const Word& w, double s) {
  return psi(model, word_band_data(model, w), s);
}
inline double psi_hat(const HorseshoeModel& model, const Word& w, double t) {
  return psi_hat(model, word_band_data(model, w), t);
}
inline double phi(const HorseshoeModel& model, const Word& w, double t_prime) {
  return phi(model, word_band_data(model, w), t_prime);
}

enum class FamilyKind { UnstableNorm, UnstableConorm, Stable };

inline const char* family_name(FamilyKind k) {
  switch (k) {
    case FamilyKind::UnstableNorm: return "psi";
    case FamilyKind::UnstableConorm: return "psihat";
    case FamilyKind::Stable: return "phi";
  }
  return "?";
}

// A singular-value family pinned to one parameter value; negate = true gives
// the -psi^s / -psihat^t potentials that enter Bowen's equation.
struct FamilySpec {
  FamilyKind kind = FamilyKind::UnstableNorm;
  double parameter = 0.0;
  bool negate = false;

  double upper_range(const HorseshoeModel& model) const {
    return kind == FamilyKind::Stable ? 1.0
                                      : static_cast<double>(model.unstable_dim());
  }
};

inline double family_value(const HorseshoeModel& model, const WordBandData& data,
                           const FamilySpec& spec) {
  double v;
  switch (spec.kind) {
    case FamilyKind::UnstableNorm: v = psi(model, data, spec.parameter); break;
    case FamilyKind::UnstableConorm: v = psi_hat(model, data, spec.parameter); break;
    case FamilyKind::Stable: v = phi(model, data, spec.parameter); break;
    default: throw std::invalid_argument("unknown family kind");
  }
  return spec.negate ? -v : v;
}

inline double family_value(const HorseshoeModel& model, const Word& w,
                           const FamilySpec& spec) {
  return family_value(model, word_band_data(model, w), spec);
}

// Table of the family over all admissible horizon-words: the depth-N locally
// constant potential that the transfer-matrix pressure consumes.
inline LocallyConstantPotential as_locally_constant(const HorseshoeModel& model,
                                                    const FamilySpec& spec,
                                                    std::size_t horizon,
                                                    const Caps& caps = {}) {
  LocallyConstantPotential p;
  p.depth = horizon;
  p.words = admissible_words(model.shift(), horizon, caps);
  p.values.resize(p.words.size());
  parallel_for(p.words.size(), [&](std::size_t k) {
    p.values[k] = family_value(model, word_band_data(model, p.words[k]), spec);
  });
  return p;
}

}  // namespace bowendim
