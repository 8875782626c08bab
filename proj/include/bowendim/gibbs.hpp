#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bowendim/common.hpp"
#include "bowendim/model.hpp"
#include "bowendim/potentials.hpp"
#include "bowendim/pressure.hpp"
#include "bowendim/subshift.hpp"

namespace bowendim {

// Equilibrium state of a locally constant potential, realized as an explicit
// Markov chain on the transfer-matrix states: stochastic matrix Q from the
// Ruelle-normalized transfer weights, stationary vector p from the left and
// right Perron vectors. Cylinder masses are exact products.
struct MarkovMeasure {
  std::size_t state_len = 1;          // states are admissible words of this length
  std::vector<Word> states;           // lex sorted
  std::vector<std::uint32_t> row_ptr, col;
  std::vector<double> q;              // transition probabilities along CSR edges
  std::vector<double> p;              // stationary vector over states
  double pressure = 0.0;              // pressure of the generating potential
  std::size_t potential_depth = 1;
  std::string provenance;

  std::size_t state_of(const Word& w) const { return word_rank(states, w); }

  // Probability of the edge from state i to state j, zero if absent.
  double step(std::size_t i, std::size_t j) const {
    for (std::uint32_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e)
      if (col[e] == j) return q[e];
    return 0.0;
  }
};

inline MarkovMeasure equilibrium_measure(const Subshift& s,
                                         const LocallyConstantPotential& pot,
                                         const Caps& caps = {}) {
  s.require_irreducible("equilibrium_measure");
  TransferAssembly a;
  PressureResult pr = pressure_exact(s, pot, caps, /*need_left=*/true, &a);
  MarkovMeasure mu;
  mu.state_len = pot.depth > 1 ? pot.depth - 1 : 1;
  mu.states = std::move(a.states);
  mu.row_ptr = a.row_ptr;
  mu.col = a.col;
  mu.pressure = pr.value;
  mu.potential_depth = pot.depth;
  mu.provenance = std::string("equilibrium, depth ") + std::to_string(pot.depth) +
                  ", method " + pr.meta.method;
  const auto& h = pr.meta.right;
  const auto& u = pr.meta.left;
  mu.q.resize(a.logw.size());
  for (std::size_t i = 0; i < mu.states.size(); ++i) {
    double row = 0.0;
    for (std::uint32_t e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e) {
      mu.q[e] = std::exp(a.logw[e] - pr.value) * h[a.col[e]] / h[i];
      row += mu.q[e];
    }
    if (std::abs(row - 1.0) > 1e-12)
      for (std::uint32_t e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e) mu.q[e] /= row;
  }
  mu.p.resize(mu.states.size());
  double tot = 0.0;
  for (std::size_t i = 0; i < mu.states.size(); ++i) {
    mu.p[i] = u[i] * h[i];
    tot += mu.p[i];
  }
  for (double& v : mu.p) v /= tot;
  return mu;
}

// Exact mass of the cylinder of a word; zero on inadmissible words, prefix
// marginalization for words shorter than the state length.
inline double cylinder_mass(const Subshift& s, const MarkovMeasure& mu, const Word& w) {
  if (!s.admissible(w)) return 0.0;
  const std::size_t sl = mu.state_len;
  if (w.size() < sl) {
    // p summed over the lex range of states extending w
    Word lo = w, hi = w;
    auto it_lo = std::lower_bound(mu.states.begin(), mu.states.end(), lo);
    hi.push_back(std::numeric_limits<Symbol>::max());
    auto it_hi = std::upper_bound(mu.states.begin(), mu.states.end(), hi);
    double m = 0.0;
    for (auto it = it_lo; it != it_hi; ++it)
      if (std::equal(w.begin(), w.end(), it->begin()))
        m += mu.p[static_cast<std::size_t>(it - mu.states.begin())];
    return m;
  }
  std::size_t cur = mu.state_of(Word(w.begin(), w.begin() + sl));
  double m = mu.p[cur];
  for (std::size_t t = 0; t + sl < w.size(); ++t) {
    const std::size_t nxt = mu.state_of(Word(w.begin() + t + 1, w.begin() + t + 1 + sl));
    const double step = mu.step(cur, nxt);
    if (step == 0.0) return 0.0;
    m *= step;
    cur = nxt;
  }
  return m;
}

// Entropy rate of the chain, in nats per step.
inline double entropy(const MarkovMeasure& mu) {
  double h = 0.0;
  for (std::size_t i = 0; i < mu.states.size(); ++i)
    for (std::uint32_t e = mu.row_ptr[i]; e < mu.row_ptr[i + 1]; ++e)
      if (mu.q[e] > 0.0) h -= mu.p[i] * mu.q[e] * std::log(mu.q[e]);
  return h < 0.0 && h > -1e-15 ? 0.0 : h;
}

// Expected per-step value of a locally constant potential.
inline double expected_potential(const Subshift& s, const MarkovMeasure& mu,
                                 const LocallyConstantPotential& pot) {
  double acc = 0.0;
  for (std::size_t k = 0; k < pot.words.size(); ++k)
    acc += cylinder_mass(s, mu, pot.words[k]) * pot.values[k];
  return acc;
}

// Stationary marginal of single symbols.
inline std::vector<double> symbol_marginal(const Subshift& s, const MarkovMeasure& mu) {
  std::vector<double> m(s.alphabet_size(), 0.0);
  for (std::size_t i = 0; i < mu.states.size(); ++i) m[mu.states[i].front()] += mu.p[i];
  return m;
}

// Deterministically tilted copy of the chain: multiply the row weights by
// exp(eps * pattern) and renormalize, then recompute the stationary vector.
// Used to exhibit strict variational inequality off the equilibrium.
inline MarkovMeasure tilt_measure(const MarkovMeasure& mu, double eps, std::size_t index) {
  MarkovMeasure out = mu;
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    double row = 0.0;
    for (std::uint32_t e = out.row_ptr[i]; e < out.row_ptr[i + 1]; ++e) {
      const double pattern =
          std::sin(static_cast<double>((e + 1) * (index + 2)) * 0.7310588);
      out.q[e] = mu.q[e] * std::exp(eps * pattern);
      row += out.q[e];
    }
    for (std::uint32_t e = out.row_ptr[i]; e < out.row_ptr[i + 1]; ++e) out.q[e] /= row;
  }
  // stationary vector of the tilted chain by certified power iteration on Q^T
  SparseTransfer qt(out.states.size(), out.row_ptr, out.col,
                    [&] {
                      std::vector<double> logw(out.q.size());
                      for (std::size_t e = 0; e < out.q.size(); ++e)
                        logw[e] = std::log(out.q[e]);
                      return logw;
                    }());
  PerronData pd = perron(qt, /*need_left=*/true);
  out.p = pd.left;
  double tot = 0.0;
  for (double v : out.p) tot += v;
  for (double& v : out.p) v /= tot;
  out.provenance = mu.provenance + ", tilted";
  return out;
}

struct CertificateRow {
  std::size_t n = 0;
  double c_min = 0.0, c_max = 0.0;
};

struct GibbsCertificate {
  std::vector<CertificateRow> rows;
  double drift_per_step = 0.0;  // growth rate of the ratio band; ~0 when P is right
  bool stable = true;
};

namespace detail {

inline double determined_birkhoff(const LocallyConstantPotential& pot, const Word& w) {
  double acc = 0.0;
  for (std::size_t t = 0; t + pot.depth <= w.size(); ++t)
    acc += pot.value(Word(w.begin() + t, w.begin() + t + pot.depth));
  return acc;
}

inline GibbsCertificate finish_certificate(std::vector<CertificateRow> rows) {
  GibbsCertificate cert;
  cert.rows = std::move(rows);
  if (cert.rows.size() >= 2) {
    const auto& a = cert.rows.front();
    const auto& b = cert.rows.back();
    cert.drift_per_step = (std::log(b.c_max / b.c_min) - std::log(a.c_max / a.c_min)) /
                          static_cast<double>(b.n - a.n);
    const double band_growth =
        std::log(b.c_max) - std::log(a.c_max);  // ~ n * dP when P is off
    cert.stable = std::abs(band_growth / static_cast<double>(b.n - a.n)) < 1e-6 &&
                  std::abs(cert.drift_per_step) < 1e-6;
  }
  return cert;
}

}  // namespace detail

// Extremes over all n-words, n in [n_min, n_max], of
//   mass([w]) / exp(-(n-k+1) P + S_n pot(w)),
// with S_n the part of the Birkhoff sum the word determines (k = depth).
// For the equilibrium at the correct pressure the band [C_min, C_max] is
// n-stable; a wrong P makes it drift like exp(n dP), which flips `stable`.
inline GibbsCertificate gibbs_certificate(const Subshift& s, const MarkovMeasure& mu,
                                          const LocallyConstantPotential& pot, double P,
                                          std::size_t n_max, const Caps& caps = {}) {
  const std::size_t n_min = std::max<std::size_t>(pot.depth, mu.state_len);
  if (n_max < n_min) throw std::invalid_argument("gibbs_certificate: n_max too small");
  std::vector<CertificateRow> rows;
  for (std::size_t n = n_min; n <= n_max; ++n) {
    const auto words = admissible_words(s, n, caps);
    std::vector<double> ratios(words.size());
    parallel_for(words.size(), [&](std::size_t k) {
      const double m = cylinder_mass(s, mu, words[k]);
      const double weight = std::exp(-static_cast<double>(n - pot.depth + 1) * P +
                                     detail::determined_birkhoff(pot, words[k]));
      ratios[k] = m / weight;
    });
    CertificateRow row;
    row.n = n;
    row.c_min = *std::min_element(ratios.begin(), ratios.end());
    row.c_max = *std::max_element(ratios.begin(), ratios.end());
    rows.push_back(row);
  }
  return detail::finish_certificate(std::move(rows));
}

// Same comparison for the conditional measure on forward (unstable) cylinders:
// the chain started at a conditioning state. On product models the conditional
// is exactly the forward chain, so the certificate starts at mass 1 and the
// Birkhoff sum skips the windows the conditioning state already fixes.
inline GibbsCertificate u_gibbs_certificate(const Subshift& s, const MarkovMeasure& mu,
                                            const LocallyConstantPotential& pot, double P,
                                            std::size_t n_max, const Caps& caps = {}) {
  const std::size_t sl = mu.state_len;
  const std::size_t n_min = std::max<std::size_t>(sl + 1, pot.depth);
  if (n_max < n_min) throw std::invalid_argument("u_gibbs_certificate: n_max too small");
  std::vector<CertificateRow> rows;
  for (std::size_t n = n_min; n <= n_max; ++n) {
    const auto words = admissible_words(s, n, caps);
    std::vector<double> ratios(words.size());
    parallel_for(words.size(), [&](std::size_t k) {
      const Word& w = words[k];
      // conditional mass of the forward word given its leading state
      std::size_t cur = mu.state_of(Word(w.begin(), w.begin() + sl));
      double m = 1.0;
      for (std::size_t t = 0; t + sl < w.size(); ++t) {
        const std::size_t nxt = mu.state_of(Word(w.begin() + t + 1, w.begin() + t + 1 + sl));
        m *= mu.step(cur, nxt);
        cur = nxt;
      }
      // windows consumed by the conditional steps: one per step
      double birkhoff = 0.0;
      for (std::size_t t = sl + 1; t <= w.size(); ++t)
        if (t >= pot.depth)
          birkhoff += pot.value(Word(w.begin() + t - pot.depth, w.begin() + t));
      const std::size_t steps = w.size() - sl;
      ratios[k] = m / std::exp(-static_cast<double>(steps) * P + birkhoff);
    });
    CertificateRow row;
    row.n = n;
    row.c_min = *std::min_element(ratios.begin(), ratios.end());
    row.c_max = *std::max_element(ratios.begin(), ratios.end());
    rows.push_back(row);
  }
  return detail::finish_certificate(std::move(rows));
}

struct LyapunovReport {
  std::vector<std::size_t> levels;                // 1, 2, 4, ..., <= n_max
  std::vector<std::vector<double>> upper_trace;   // per band: (1/n) E[log norm]
  std::vector<std::vector<double>> lower_trace;   // per band: (1/n) E[log conorm]
  std::vector<double> band_exponents;             // last upper value per band
  double stable_exponent = 0.0;                   // E[log c] < 0
  bool kingman_monotone = true;                   // upper trace nonincreasing
};

// Band exponents of a Markov measure on the model. Diagonal models are exact
// at every level; cocycle models report the subadditive upper sequence
// (1/n) E[log norm] along doubling levels plus the conorm lower sequence.
inline LyapunovReport lyapunov_exponents(const HorseshoeModel& model, const MarkovMeasure& mu,
                                         std::size_t n_max = 8, const Caps& caps = {}) {
  const Subshift& s = model.shift();
  const std::size_t nb = model.bands().band_count();
  LyapunovReport rep;
  rep.upper_trace.assign(nb, {});
  rep.lower_trace.assign(nb, {});
  const auto marginal = symbol_marginal(s, mu);
  for (std::size_t i = 0; i < marginal.size(); ++i)
    rep.stable_exponent += marginal[i] * model.log_stable_rate(static_cast<Symbol>(i));
  if (model.diagonal()) {
    rep.levels = {1};
    for (std::size_t j = 0; j < nb; ++j) {
      double lam = 0.0;
      for (std::size_t i = 0; i < marginal.size(); ++i)
        lam += marginal[i] * model.log_rate(static_cast<Symbol>(i), j);
      rep.upper_trace[j] = {lam};
      rep.lower_trace[j] = {lam};
      rep.band_exponents.push_back(lam);
    }
    return rep;
  }
  for (std::size_t n = 1; n <= n_max; n *= 2) rep.levels.push_back(n);
  for (std::size_t n : rep.levels) {
    const auto words = admissible_words(s, n, caps);
    std::vector<WordBandData> data(words.size());
    std::vector<double> mass(words.size());
    parallel_for(words.size(), [&](std::size_t k) {
      data[k] = word_band_data(model, words[k]);
      mass[k] = cylinder_mass(s, mu, words[k]);
    });
    for (std::size_t j = 0; j < nb; ++j) {
      double up = 0.0, lo = 0.0;
      for (std::size_t k = 0; k < words.size(); ++k) {
        up += mass[k] * data[k].log_norm[j];
        lo += mass[k] * data[k].log_conorm[j];
      }
      rep.upper_trace[j].push_back(up / static_cast<double>(n));
      rep.lower_trace[j].push_back(lo / static_cast<double>(n));
    }
  }
  for (std::size_t j = 0; j < nb; ++j) {
    for (std::size_t t = 0; t + 1 < rep.upper_trace[j].size(); ++t)
      if (rep.upper_trace[j][t + 1] > rep.upper_trace[j][t] + 1e-10)
        rep.kingman_monotone = false;
    rep.band_exponents.push_back(rep.upper_trace[j].back());
  }
  return rep;
}

// The negated unstable log-Jacobian -psi^u: its equilibrium is the natural
// volume-weighted measure of the model.
inline LocallyConstantPotential srb_potential(const HorseshoeModel& model,
                                              const Caps& caps = {}) {
  return as_locally_constant(
      model, FamilySpec{FamilyKind::UnstableNorm,
                        static_cast<double>(model.unstable_dim()), true},
      1, caps);
}

struct PesinReport {
  double entropy = 0.0;
  double exponent_sum = 0.0;       // sum of m_j * lambda_j over unstable bands
  double pressure = 0.0;           // P(-psi^u): the escape-rate defect
  double variational_residual = 0.0;  // |entropy - exponent_sum - pressure|
  double formula_defect = 0.0;        // |entropy - exponent_sum|
};

// Entropy-vs-exponents balance for the equilibrium of -psi^u. The variational
// residual vanishes for every correctly computed equilibrium; the formula
// defect equals |P(-psi^u)| and vanishes exactly on volume-balanced models
// (unstable cell volumes summing to one), where the measure is the SRB
// analogue and the entropy formula h = sum m_j lambda_j holds on the nose.
inline PesinReport pesin_check(const HorseshoeModel& model, const Caps& caps = {}) {
  if (!model.diagonal())
    throw std::invalid_argument("pesin_check expects a diagonal model");
  const auto pot = srb_potential(model, caps);
  const MarkovMeasure mu = equilibrium_measure(model.shift(), pot, caps);
  const auto lyap = lyapunov_exponents(model, mu, 1, caps);
  PesinReport rep;
  rep.entropy = entropy(mu);
  for (std::size_t j = 0; j < model.bands().band_count(); ++j)
    rep.exponent_sum += static_cast<double>(model.bands().m[j]) * lyap.band_exponents[j];
  rep.pressure = mu.pressure;
  rep.variational_residual = std::abs(rep.entropy - rep.exponent_sum - rep.pressure);
  rep.formula_defect = std::abs(rep.entropy - rep.exponent_sum);
  return rep;
}

}  // namespace bowendim
