#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bowendim/common.hpp"
#include "bowendim/subshift.hpp"

namespace bowendim {

// Unstable band bookkeeping: multiplicities m_1..m_ell, partial sums
// r_j = m_1+...+m_j and reversed partial sums r'_j = m_ell+...+m_{ell-j+1}.
// u = r_ell is the unstable dimension.
struct BandStructure {
  explicit BandStructure(std::vector<std::size_t> multiplicities)
      : m(std::move(multiplicities)) {
    if (m.empty()) throw SchemaError("band structure needs at least one band");
    for (auto v : m)
      if (v == 0) throw SchemaError("band multiplicities must be >= 1");
    r.assign(m.size() + 1, 0);
    r_rev.assign(m.size() + 1, 0);
    for (std::size_t j = 0; j < m.size(); ++j) {
      r[j + 1] = r[j] + m[j];
      r_rev[j + 1] = r_rev[j] + m[m.size() - 1 - j];
    }
  }

  std::size_t band_count() const { return m.size(); }
  std::size_t unstable_dim() const { return r.back(); }

  std::vector<std::size_t> m;
  std::vector<std::size_t> r;
  std::vector<std::size_t> r_rev;
};

// Linear horseshoe data over a subshift: per symbol either one expansion rate
// per band (diagonal model) or one invertible matrix per band (cocycle model),
// plus a one-dimensional stable contraction rate per symbol. Bands are ordered
// strongest first and must be uniformly dominated; every band expands and the
// stable rate contracts. Immutable after construction.
class HorseshoeModel {
 public:
  static HorseshoeModel diagonal_model(Subshift shift, BandStructure bands,
                                       std::vector<std::vector<double>> unstable_rates,
                                       std::vector<double> stable_rates) {
    return HorseshoeModel(std::move(shift), std::move(bands), std::move(unstable_rates),
                          std::move(stable_rates));
  }

  static HorseshoeModel cocycle_model(Subshift shift, BandStructure bands,
                                      std::vector<std::vector<Eigen::MatrixXd>> band_matrices,
                                      std::vector<double> stable_rates) {
    return HorseshoeModel(std::move(shift), std::move(bands), std::move(band_matrices),
                          std::move(stable_rates));
  }

 private:
  // Diagonal model.
  HorseshoeModel(Subshift shift, BandStructure bands,
                 std::vector<std::vector<double>> unstable_rates,
                 std::vector<double> stable_rates)
      : shift_(std::move(shift)), bands_(std::move(bands)), diagonal_(true) {
    const std::size_t l = shift_.alphabet_size();
    const std::size_t nb = bands_.band_count();
    if (unstable_rates.size() != l)
      throw SchemaError("unstable_rates: need one row per symbol");
    log_rates_.assign(l, std::vector<double>(nb));
    for (std::size_t i = 0; i < l; ++i) {
      if (unstable_rates[i].size() != nb)
        throw SchemaError("unstable_rates: need one rate per band");
      for (std::size_t j = 0; j < nb; ++j) {
        if (!(unstable_rates[i][j] > 1.0))
          throw SchemaError("unstable rate must be > 1 (symbol " + std::to_string(i) +
                            ", band " + std::to_string(j) + ")");
        log_rates_[i][j] = std::log(unstable_rates[i][j]);
      }
    }
    for (std::size_t j = 0; j + 1 < nb; ++j) {
      double weakest_upper = -1.0, strongest_lower = std::numeric_limits<double>::max();
      for (std::size_t i = 0; i < l; ++i) {
        weakest_upper = std::max(weakest_upper, unstable_rates[i][j + 1]);
        strongest_lower = std::min(strongest_lower, unstable_rates[i][j]);
      }
      if (!(weakest_upper < strongest_lower))
        throw SchemaError("domination gap violated between bands " + std::to_string(j) +
                          " and " + std::to_string(j + 1));
    }
    init_stable(std::move(stable_rates));
  }

  // Cocycle model.
  HorseshoeModel(Subshift shift, BandStructure bands,
                 std::vector<std::vector<Eigen::MatrixXd>> band_matrices,
                 std::vector<double> stable_rates)
      : shift_(std::move(shift)), bands_(std::move(bands)), diagonal_(false),
        mats_(std::move(band_matrices)) {
    const std::size_t l = shift_.alphabet_size();
    const std::size_t nb = bands_.band_count();
    if (mats_.size() != l) throw SchemaError("band_matrices: need one row per symbol");
    std::vector<double> sv_min(nb, std::numeric_limits<double>::max());
    std::vector<double> sv_max(nb, 0.0);
    for (std::size_t i = 0; i < l; ++i) {
      if (mats_[i].size() != nb)
        throw SchemaError("band_matrices: need one matrix per band");
      for (std::size_t j = 0; j < nb; ++j) {
        const auto& b = mats_[i][j];
        const auto mj = static_cast<Eigen::Index>(bands_.m[j]);
        if (b.rows() != mj || b.cols() != mj)
          throw SchemaError("band matrix must be m_j x m_j (symbol " + std::to_string(i) +
                            ", band " + std::to_string(j) + ")");
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
        const double smin = svd.singularValues().minCoeff();
        const double smax = svd.singularValues().maxCoeff();
        if (!(smin > 0.0))
          throw SchemaError("band matrix must be invertible (symbol " + std::to_string(i) +
                            ", band " + std::to_string(j) + ")");
        sv_min[j] = std::min(sv_min[j], smin);
        sv_max[j] = std::max(sv_max[j], smax);
      }
    }
    for (std::size_t j = 0; j + 1 < nb; ++j)
      if (!(sv_max[j + 1] < sv_min[j]))
        throw SchemaError("domination gap violated between bands " + std::to_string(j) +
                          " and " + std::to_string(j + 1));
    if (!(sv_min[nb - 1] > 1.0))
      throw SchemaError("weakest band must expand: smallest singular value <= 1");
    init_stable(std::move(stable_rates));
  }

 public:
  const Subshift& shift() const { return shift_; }
  const BandStructure& bands() const { return bands_; }
  bool diagonal() const { return diagonal_; }
  std::size_t unstable_dim() const { return bands_.unstable_dim(); }
  double log_rate(Symbol i, std::size_t band) const { return log_rates_[i][band]; }
  double log_stable_rate(Symbol i) const { return log_stable_[i]; }
  const Eigen::MatrixXd& band_matrix(Symbol i, std::size_t band) const {
    return mats_[i][band];
  }

  // log ||D f^n restricted to band j|| along the word: diagonal models sum the
  // per-symbol log rates, cocycle models take the largest singular value of
  // the ordered product B_{w_{n-1}} ... B_{w_0}.
  double log_band_norm(const Word& w, std::size_t band) const {
    check_word(w, band);
    if (diagonal_) {
      double s = 0.0;
      for (Symbol i : w) s += log_rates_[i][band];
      return s;
    }
    return product_sv(w, band).log_max;
  }

  // log m(D f^n restricted to band j): smallest singular value of the product.
  double log_band_conorm(const Word& w, std::size_t band) const {
    check_word(w, band);
    if (diagonal_) {
      double s = 0.0;
      for (Symbol i : w) s += log_rates_[i][band];
      return s;
    }
    return product_sv(w, band).log_min;
  }

  // log of the stable contraction over the word; strictly negative.
  double stable_log(const Word& w) const {
    check_word(w, 0);
    double s = 0.0;
    for (Symbol i : w) s += log_stable_[i];
    return s;
  }

  double band_norm(const Word& w, std::size_t band) const {
    return std::exp(log_band_norm(w, band));
  }
  double band_conorm(const Word& w, std::size_t band) const {
    return std::exp(log_band_conorm(w, band));
  }

  // Ordered product of the band matrices along the word, with the running
  // rescale that keeps entries bounded. product = exp(log_scale) * matrix.
  struct ScaledProduct {
    Eigen::MatrixXd matrix;
    double log_scale;
  };
  ScaledProduct band_product(const Word& w, std::size_t band) const {
    if (diagonal_)
      throw std::invalid_argument("band_product: diagonal models have no matrices");
    check_word(w, band);
    const auto mj = static_cast<Eigen::Index>(bands_.m[band]);
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(mj, mj);
    double log_scale = 0.0;
    for (Symbol i : w) {
      p = mats_[i][band] * p;
      const double mx = p.cwiseAbs().maxCoeff();
      p /= mx;
      log_scale += std::log(mx);
    }
    return {std::move(p), log_scale};
  }

 private:
  void init_stable(std::vector<double> stable_rates) {
    const std::size_t l = shift_.alphabet_size();
    if (stable_rates.size() != l)
      throw SchemaError("stable_rates: need one rate per symbol");
    log_stable_.resize(l);
    for (std::size_t i = 0; i < l; ++i) {
      if (!(stable_rates[i] > 0.0 && stable_rates[i] < 1.0))
        throw SchemaError("stable rate must lie in (0,1) (symbol " + std::to_string(i) + ")");
      log_stable_[i] = std::log(stable_rates[i]);
    }
  }

  void check_word(const Word& w, std::size_t band) const {
    if (band >= bands_.band_count()) throw std::invalid_argument("band index out of range");
    if (!shift_.admissible(w))
      throw std::invalid_argument("word is not admissible: " + word_to_string(w));
  }

  struct SV {
    double log_max, log_min;
  };
  SV product_sv(const Word& w, std::size_t band) const {
    const ScaledProduct p = band_product(w, band);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.matrix);
    return {std::log(svd.singularValues().maxCoeff()) + p.log_scale,
            std::log(svd.singularValues().minCoeff()) + p.log_scale};
  }

  Subshift shift_;
  BandStructure bands_;
  bool diagonal_;
  std::vector<std::vector<double>> log_rates_;
  std::vector<std::vector<Eigen::MatrixXd>> mats_;
  std::vector<double> log_stable_;
};

// Per-band log norms/conorms and the stable log of one word, computed once and
// reused across parameter sweeps.
struct WordBandData {
  std::vector<double> log_norm;
  std::vector<double> log_conorm;
  double stable_log = 0.0;
};

inline WordBandData word_band_data(const HorseshoeModel& model, const Word& w) {
  WordBandData d;
  const std::size_t nb = model.bands().band_count();
  d.log_norm.resize(nb);
  d.log_conorm.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    if (model.diagonal()) {
      d.log_norm[j] = model.log_band_norm(w, j);
      d.log_conorm[j] = d.log_norm[j];
    } else {
      const auto p = model.band_product(w, j);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.matrix);
      d.log_norm[j] = std::log(svd.singularValues().maxCoeff()) + p.log_scale;
      d.log_conorm[j] = std::log(svd.singularValues().minCoeff()) + p.log_scale;
    }
  }
  d.stable_log = model.stable_log(w);
  return d;
}

}  // namespace bowendim
