#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "bowendim/common.hpp"
#include "bowendim/model.hpp"

namespace bowendim {

// Axis-aligned box: min corner and side lengths.
struct Box {
  std::vector<double> lo, size;

  std::size_t dim() const { return lo.size(); }
  double max_side() const { return *std::max_element(size.begin(), size.end()); }

  bool contains(const Box& other, double slack = 1e-12) const {
    for (std::size_t c = 0; c < lo.size(); ++c)
      if (other.lo[c] < lo[c] - slack ||
          other.lo[c] + other.size[c] > lo[c] + size[c] + slack)
        return false;
    return true;
  }

  // open-interior overlap in every coordinate
  bool interior_overlaps(const Box& other) const {
    for (std::size_t c = 0; c < lo.size(); ++c) {
      const double a0 = lo[c], a1 = lo[c] + size[c];
      const double b0 = other.lo[c], b1 = other.lo[c] + other.size[c];
      if (std::min(a1, b1) - std::max(a0, b0) <= 1e-12) return false;
    }
    return true;
  }

  // distance from the box to a point, sup metric
  double sup_distance(const std::vector<double>& x) const {
    double d = 0.0;
    for (std::size_t c = 0; c < lo.size(); ++c) {
      double dc = 0.0;
      if (x[c] < lo[c]) dc = lo[c] - x[c];
      else if (x[c] > lo[c] + size[c]) dc = x[c] - (lo[c] + size[c]);
      d = std::max(d, dc);
    }
    return d;
  }
};

struct CylinderBoxes {
  Box inner;  // contained in the realized cylinder (sides ~ 1/band_norm)
  Box outer;  // contains it (diagonal models: inner == outer exactly)
};

// Affine placement of the model in the unit cube: per symbol an unstable cell
// (the image of [0,1]^u under the symbol's contraction) and a stable interval
// of length c_i. Unstable cells and stable intervals must stay inside the cube
// with pairwise disjoint interiors. gamma1/gamma2 are the stored ball-product
// comparison constants.
class GeometricRealization {
 public:
  GeometricRealization(const HorseshoeModel& model,
                       std::vector<std::vector<double>> unstable_offsets,
                       std::vector<double> stable_offsets, double gamma1 = std::sqrt(2.0),
                       double gamma2 = 1.0 / std::sqrt(2.0))
      : model_(&model), uoff_(std::move(unstable_offsets)), soff_(std::move(stable_offsets)),
        gamma1_(gamma1), gamma2_(gamma2) {
    const std::size_t l = model.shift().alphabet_size();
    const std::size_t u = model.unstable_dim();
    if (uoff_.size() != l) throw SchemaError("placement: one unstable offset row per symbol");
    if (soff_.size() != l) throw SchemaError("placement: one stable offset per symbol");
    if (!(gamma1_ > 1.0) || !(gamma2_ > 0.0 && gamma2_ < 1.0))
      throw SchemaError("placement: need gamma1 > 1 > gamma2 > 0");
    for (std::size_t i = 0; i < l; ++i)
      if (uoff_[i].size() != u)
        throw SchemaError("placement: unstable offset needs one coordinate per dimension");
    std::vector<Box> cells(l);
    for (std::size_t i = 0; i < l; ++i) {
      cells[i] = symbol_cell(static_cast<Symbol>(i));
      for (std::size_t c = 0; c < u; ++c)
        if (cells[i].lo[c] < -1e-12 || cells[i].lo[c] + cells[i].size[c] > 1.0 + 1e-12)
          throw SchemaError("placement: unstable cell of symbol " + std::to_string(i) +
                            " leaves the unit cube");
      if (soff_[i] < -1e-12 ||
          soff_[i] + std::exp(model.log_stable_rate(static_cast<Symbol>(i))) > 1.0 + 1e-12)
        throw SchemaError("placement: stable interval of symbol " + std::to_string(i) +
                          " leaves the unit interval");
    }
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = i + 1; j < l; ++j) {
        if (cells[i].interior_overlaps(cells[j]))
          throw SchemaError("placement: unstable cells of symbols " + std::to_string(i) +
                            " and " + std::to_string(j) + " overlap");
        const double a0 = soff_[i], a1 = soff_[i] + std::exp(model.log_stable_rate(i));
        const double b0 = soff_[j], b1 = soff_[j] + std::exp(model.log_stable_rate(j));
        if (std::min(a1, b1) - std::max(a0, b0) > 1e-12)
          throw SchemaError("placement: stable intervals of symbols " + std::to_string(i) +
                            " and " + std::to_string(j) + " overlap");
      }
  }

  const HorseshoeModel& model() const { return *model_; }
  double gamma1() const { return gamma1_; }
  double gamma2() const { return gamma2_; }
  // affine translation of the symbol's contraction
  double placement_offset(Symbol i, std::size_t coord) const { return uoff_[i][coord]; }
  double stable_placement_offset(Symbol i) const { return soff_[i]; }

  // band of an unstable coordinate
  std::size_t band_of(std::size_t coord) const {
    const auto& r = model_->bands().r;
    for (std::size_t j = 0; j + 1 < r.size(); ++j)
      if (coord >= r[j] && coord < r[j + 1]) return j;
    throw std::invalid_argument("coordinate out of range");
  }

  // image of the whole unstable cube under one symbol's contraction (its cell)
  Box symbol_cell(Symbol i) const {
    const std::size_t u = model_->unstable_dim();
    Box b;
    b.lo = uoff_[i];
    b.size.resize(u);
    if (model_->diagonal()) {
      for (std::size_t c = 0; c < u; ++c)
        b.size[c] = std::exp(-model_->log_rate(i, band_of(c)));
    } else {
      // bounding box of the affine image of the cube
      std::size_t c0 = 0;
      for (std::size_t j = 0; j < model_->bands().band_count(); ++j) {
        const Eigen::MatrixXd a = model_->band_matrix(i, j).inverse();
        for (Eigen::Index row = 0; row < a.rows(); ++row) {
          double span = 0.0, shift = 0.0;
          for (Eigen::Index cc = 0; cc < a.cols(); ++cc) {
            span += std::abs(a(row, cc));
            shift += std::min(a(row, cc), 0.0);
          }
          b.lo[c0 + static_cast<std::size_t>(row)] += shift;
          b.size[c0 + static_cast<std::size_t>(row)] = span;
        }
        c0 += static_cast<std::size_t>(a.rows());
      }
    }
    return b;
  }

  // Realized unstable cylinder of an admissible word: inner and outer boxes.
  // Diagonal models give the exact nested box with sides 1/band_norm per band
  // coordinate; cocycle models return the bounding box of the affine image
  // (sides at most sqrt(m_j)/band_conorm) and an inscribed inner box with
  // sides (1/band_norm)/sqrt(m_j).
  CylinderBoxes realize_cylinder(const Word& w) const {
    if (!model_->shift().admissible(w))
      throw std::invalid_argument("realize_cylinder: inadmissible word");
    const std::size_t u = model_->unstable_dim();
    if (model_->diagonal()) {
      Box b;
      b.lo.assign(u, 0.0);
      b.size.assign(u, 1.0);
      for (std::size_t t = w.size(); t-- > 0;) apply_symbol(w[t], b);
      return {b, b};
    }
    // exact affine composition g_{w_0} o ... o g_{w_{n-1}} per band block
    const auto& bands = model_->bands();
    CylinderBoxes out;
    out.inner.lo.assign(u, 0.0);
    out.inner.size.assign(u, 0.0);
    out.outer.lo.assign(u, 0.0);
    out.outer.size.assign(u, 0.0);
    std::size_t c0 = 0;
    for (std::size_t j = 0; j < bands.band_count(); ++j) {
      const auto mj = static_cast<Eigen::Index>(bands.m[j]);
      Eigen::MatrixXd a = Eigen::MatrixXd::Identity(mj, mj);
      Eigen::VectorXd off = Eigen::VectorXd::Zero(mj);
      for (std::size_t t = w.size(); t-- > 0;) {
        const Eigen::MatrixXd gi = model_->band_matrix(w[t], j).inverse();
        Eigen::VectorXd gi_off(mj);
        for (Eigen::Index c = 0; c < mj; ++c)
          gi_off[c] = uoff_[w[t]][c0 + static_cast<std::size_t>(c)];
        off = gi_off + gi * off;
        a = gi * a;
      }
      // outer: exact bounding box of a*[0,1]^m + off
      for (Eigen::Index row = 0; row < mj; ++row) {
        double span = 0.0, shift = 0.0;
        for (Eigen::Index cc = 0; cc < mj; ++cc) {
          span += std::abs(a(row, cc));
          shift += std::min(a(row, cc), 0.0);
        }
        out.outer.lo[c0 + static_cast<std::size_t>(row)] = off[row] + shift;
        out.outer.size[c0 + static_cast<std::size_t>(row)] = span;
      }
      // inner: box inscribed in the image ball around the center image
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
      const double smin = svd.singularValues().minCoeff();
      const double side = smin / std::sqrt(static_cast<double>(mj));
      const Eigen::VectorXd center = off + a * Eigen::VectorXd::Constant(mj, 0.5);
      for (Eigen::Index row = 0; row < mj; ++row) {
        out.inner.lo[c0 + static_cast<std::size_t>(row)] = center[row] - 0.5 * side;
        out.inner.size[c0 + static_cast<std::size_t>(row)] = side;
      }
      c0 += static_cast<std::size_t>(mj);
    }
    return out;
  }

  // Realized stable cylinder of a word read backwards into the past: the
  // composition h_{v_0} o h_{v_1} o ... of the interval contractions, defined
  // when v is admissible for the transposed shift (v_{t+1} -> v_t allowed).
  Box realize_stable_cylinder(const Word& v) const {
    for (std::size_t t = 0; t + 1 < v.size(); ++t)
      if (!model_->shift().allowed(v[t + 1], v[t]))
        throw std::invalid_argument("stable cylinder: word not reverse-admissible");
    Box b;
    b.lo.assign(1, 0.0);
    b.size.assign(1, 1.0);
    for (std::size_t t = v.size(); t-- > 0;) {
      const double c = std::exp(model_->log_stable_rate(v[t]));
      b.lo[0] = soff_[v[t]] + c * b.lo[0];
      b.size[0] *= c;
    }
    return b;
  }

  // One contraction applied to a box (diagonal models).
  void apply_symbol(Symbol i, Box& b) const {
    for (std::size_t c = 0; c < b.lo.size(); ++c) {
      const double s = std::exp(-model_->log_rate(i, band_of(c)));
      b.lo[c] = uoff_[i][c] + s * b.lo[c];
      b.size[c] *= s;
    }
  }

  void apply_stable_symbol(Symbol i, Box& b) const {
    const double c = std::exp(model_->log_stable_rate(i));
    b.lo[0] = soff_[i] + c * b.lo[0];
    b.size[0] *= c;
  }

  // The realized point of the itinerary that follows the prefix and then
  // always the smallest allowed symbol.
  std::vector<double> unstable_point(const Word& prefix) const {
    Word w = prefix;
    while (w.size() < prefix.size() + 200) {
      const auto& succ = model_->shift().successors(w.back());
      w.push_back(succ.front());
      if (w.size() > 8) {
        // enough depth once the cylinder is tiny
        Box b = realize_cylinder(w).outer;
        if (b.max_side() < 1e-14) break;
      }
    }
    Box b = realize_cylinder(w).outer;
    std::vector<double> x(b.dim());
    for (std::size_t c = 0; c < x.size(); ++c) x[c] = b.lo[c] + 0.5 * b.size[c];
    return x;
  }

  std::vector<double> stable_point(const Word& prefix) const {
    Word v = prefix;
    while (v.size() < prefix.size() + 200) {
      Symbol prev = 0;
      bool found = false;
      for (Symbol a = 0; a < model_->shift().alphabet_size(); ++a)
        if (model_->shift().allowed(a, v.back())) {
          prev = a;
          found = true;
          break;
        }
      if (!found) throw std::logic_error("stable_point: no predecessor");
      v.push_back(prev);
      if (v.size() > 8 && realize_stable_cylinder(v).size[0] < 1e-14) break;
    }
    Box b = realize_stable_cylinder(v);
    return {b.lo[0] + 0.5 * b.size[0]};
  }

  // Uniform-grid placement over the unit cube for a diagonal model: symbols
  // fill grid cells row-major, stable intervals laid left to right.
  static GeometricRealization grid_placement(const HorseshoeModel& model);

 private:
  const HorseshoeModel* model_;
  std::vector<std::vector<double>> uoff_;
  std::vector<double> soff_;
  double gamma1_, gamma2_;
};

inline GeometricRealization GeometricRealization::grid_placement(const HorseshoeModel& model) {
  const std::size_t l = model.shift().alphabet_size();
  const std::size_t u = model.unstable_dim();
  if (!model.diagonal())
    throw std::invalid_argument("grid_placement expects a diagonal model");
  // per coordinate, the number of cells that fit at the weakest rate
  std::vector<std::size_t> capacity(u);
  std::vector<double> pitch(u);
  BandStructure bands = model.bands();
  std::size_t total = 1;
  for (std::size_t c = 0; c < u; ++c) {
    std::size_t j = 0;
    for (; j + 1 < bands.r.size(); ++j)
      if (c >= bands.r[j] && c < bands.r[j + 1]) break;
    double weakest = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < l; ++i) weakest = std::min(weakest, std::exp(model.log_rate(i, j)));
    capacity[c] = static_cast<std::size_t>(std::floor(weakest + 1e-9));
    pitch[c] = 1.0 / static_cast<double>(capacity[c]);
    total *= capacity[c];
  }
  if (total < l)
    throw SchemaError("grid_placement: alphabet does not fit the unit cube grid");
  std::vector<std::vector<double>> uoff(l, std::vector<double>(u, 0.0));
  for (std::size_t i = 0; i < l; ++i) {
    std::size_t rem = i;
    for (std::size_t c = u; c-- > 0;) {
      uoff[i][c] = static_cast<double>(rem % capacity[c]) * pitch[c];
      rem /= capacity[c];
    }
  }
  std::vector<double> soff(l, 0.0);
  double cursor = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    soff[i] = cursor;
    cursor += std::exp(model.log_stable_rate(static_cast<Symbol>(i)));
  }
  if (cursor > 1.0 + 1e-12)
    throw SchemaError("grid_placement: stable intervals exceed the unit interval");
  return GeometricRealization(model, std::move(uoff), std::move(soff));
}

}  // namespace bowendim
