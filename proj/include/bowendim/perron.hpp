#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "bowendim/common.hpp"
#include "bowendim/subshift.hpp"

namespace bowendim {

// Topological entropy of an irreducible subshift: log of the spectral radius
// of the 0/1 transition matrix.
double topological_entropy(const Subshift& s);

// Nonnegative transfer operator, exposed as matrix-vector products so that
// large structured operators never get materialized.
class TransferLinOp {
 public:
  virtual ~TransferLinOp() = default;
  virtual std::size_t size() const = 0;
  // out = M * in and out = M^T * in. Entries of M are exp(logw - log_scale).
  virtual void apply(const std::vector<double>& in, std::vector<double>& out) const = 0;
  virtual void apply_transpose(const std::vector<double>& in,
                               std::vector<double>& out) const = 0;
  double log_scale() const { return log_scale_; }

 protected:
  double log_scale_ = 0.0;  // subtracted from all log-weights before exp
};

// Sparse CSR transfer matrix: entry (i -> col) with weight exp(logw - scale).
class SparseTransfer final : public TransferLinOp {
 public:
  SparseTransfer(std::size_t n, std::vector<std::uint32_t> row_ptr,
                 std::vector<std::uint32_t> col, const std::vector<double>& logw)
      : n_(n), row_ptr_(std::move(row_ptr)), col_(std::move(col)) {
    log_scale_ = logw.empty() ? 0.0 : *std::max_element(logw.begin(), logw.end());
    w_.resize(logw.size());
    for (std::size_t e = 0; e < logw.size(); ++e) w_[e] = std::exp(logw[e] - log_scale_);
  }

  std::size_t size() const override { return n_; }

  void apply(const std::vector<double>& in, std::vector<double>& out) const override {
    out.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e)
        acc += w_[e] * in[col_[e]];
      out[i] = acc;
    }
  }

  void apply_transpose(const std::vector<double>& in, std::vector<double>& out) const override {
    out.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::uint32_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e)
        out[col_[e]] += w_[e] * in[i];
  }

  const std::vector<std::uint32_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::uint32_t>& col() const { return col_; }
  double weight(std::size_t e) const { return w_[e]; }

 private:
  std::size_t n_;
  std::vector<std::uint32_t> row_ptr_, col_;
  std::vector<double> w_;
};

// Transfer operator of a power system without materializing its edges.
// States are words; state v maps to all states w with allowed(last[v], first[w]),
// weighted by the target state's potential. Application factors through
// per-first-symbol bucket sums, costing O(#states * alphabet).
class JunctionTransfer final : public TransferLinOp {
 public:
  JunctionTransfer(const Subshift& base, std::vector<Symbol> first, std::vector<Symbol> last,
                   const std::vector<double>& logw)
      : base_(base), first_(std::move(first)), last_(std::move(last)) {
    log_scale_ = logw.empty() ? 0.0 : *std::max_element(logw.begin(), logw.end());
    w_.resize(logw.size());
    for (std::size_t i = 0; i < logw.size(); ++i) w_[i] = std::exp(logw[i] - log_scale_);
  }

  std::size_t size() const override { return w_.size(); }

  void apply(const std::vector<double>& in, std::vector<double>& out) const override {
    const std::size_t l = base_.alphabet_size();
    std::vector<double> bucket(l, 0.0);
    for (std::size_t k = 0; k < w_.size(); ++k) bucket[first_[k]] += w_[k] * in[k];
    std::vector<double> row(l, 0.0);
    for (std::size_t a = 0; a < l; ++a) {
      double acc = 0.0;
      for (Symbol b : base_.successors(static_cast<Symbol>(a))) acc += bucket[b];
      row[a] = acc;
    }
    out.resize(w_.size());
    for (std::size_t k = 0; k < w_.size(); ++k) out[k] = row[last_[k]];
  }

  void apply_transpose(const std::vector<double>& in, std::vector<double>& out) const override {
    const std::size_t l = base_.alphabet_size();
    std::vector<double> bucket(l, 0.0);
    for (std::size_t k = 0; k < w_.size(); ++k) bucket[last_[k]] += in[k];
    std::vector<double> col(l, 0.0);
    for (std::size_t a = 0; a < l; ++a)
      for (Symbol b : base_.successors(static_cast<Symbol>(a))) col[b] += bucket[a];
    out.resize(w_.size());
    for (std::size_t k = 0; k < w_.size(); ++k) out[k] = w_[k] * col[first_[k]];
  }

 private:
  const Subshift& base_;
  std::vector<Symbol> first_, last_;
  std::vector<double> w_;
};

struct PerronData {
  double log_rho = 0.0;              // log of the Perron root of the *unscaled* operator
  std::vector<double> right, left;   // strictly positive eigenvectors, L1-normalized
  std::uint32_t iterations = 0;
  const char* method = "power-iteration";
};

namespace detail {

constexpr std::size_t kDenseFallbackSize = 512;

// One Collatz-Wielandt certified power iteration of (M + I). The +I shift
// keeps periodic chains converging and preserves the eigenvectors.
inline bool power_iterate(const TransferLinOp& op, bool transpose, double tol,
                          double& rho_shifted, std::vector<double>& v,
                          std::uint32_t& iters) {
  const std::size_t n = op.size();
  const std::uint32_t kPerronMaxIter = n <= kDenseFallbackSize ? 5000 : 200000;
  v.assign(n, 1.0 / static_cast<double>(n));
  std::vector<double> w(n);
  for (std::uint32_t it = 1; it <= kPerronMaxIter; ++it) {
    if (transpose)
      op.apply_transpose(v, w);
    else
      op.apply(v, w);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] += v[i];
      const double r = w[i] / v[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      sum += w[i];
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / sum;
    iters = it;
    if (hi - lo <= tol * hi) {
      rho_shifted = 0.5 * (hi + lo);
      return true;
    }
  }
  return false;
}

inline Eigen::MatrixXd densify(const TransferLinOp& op) {
  const std::size_t n = op.size();
  Eigen::MatrixXd m(n, n);
  std::vector<double> e(n, 0.0), out(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    op.apply(e, out);
    for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i),
                                          static_cast<Eigen::Index>(j)) = out[i];
    e[j] = 0.0;
  }
  return m;
}

inline void dense_perron(const TransferLinOp& op, PerronData& out, bool need_left) {
  const Eigen::MatrixXd m = densify(op);
  auto extract = [](const Eigen::MatrixXd& a, double& rho, std::vector<double>& vec) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(a);
    Eigen::Index best = 0;
    double best_re = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const double re = es.eigenvalues()[i].real();
      if (re > best_re) {
        best_re = re;
        best = i;
      }
    }
    rho = best_re;
    vec.resize(static_cast<std::size_t>(a.rows()));
    Eigen::VectorXd v = es.eigenvectors().col(best).real();
    if (v.sum() < 0) v = -v;
    const double s = v.sum();
    for (Eigen::Index i = 0; i < v.size(); ++i) vec[static_cast<std::size_t>(i)] = v[i] / s;
  };
  double rho;
  extract(m, rho, out.right);
  if (need_left) {
    double rho_l;
    extract(Eigen::MatrixXd(m.transpose()), rho_l, out.left);
  }
  out.log_rho = std::log(rho) + op.log_scale();
  out.method = "dense-eigensolver";
}

}  // namespace detail

// Perron root and eigenvectors of a nonnegative irreducible transfer operator.
// Deterministic: all-ones start vector, Collatz-Wielandt bounds certified to
// tol, dense eigensolver fallback for small stalled systems.
inline PerronData perron(const TransferLinOp& op, bool need_left = false,
                         double tol = 1e-14) {
  PerronData out;
  double rho_shifted;
  if (detail::power_iterate(op, false, tol, rho_shifted, out.right, out.iterations)) {
    out.log_rho = std::log(rho_shifted - 1.0) + op.log_scale();
    if (need_left) {
      std::uint32_t it_l = 0;
      double rho_l;
      if (!detail::power_iterate(op, true, tol, rho_l, out.left, it_l)) {
        detail::dense_perron(op, out, true);
        return out;
      }
      out.iterations += it_l;
    }
    return out;
  }
  if (op.size() <= detail::kDenseFallbackSize) {
    detail::dense_perron(op, out, need_left);
    return out;
  }
  throw std::runtime_error("perron: power iteration stalled on a system too large "
                           "for the dense fallback");
}

inline double topological_entropy(const Subshift& s) {
  s.require_irreducible("topological_entropy");
  const std::size_t l = s.alphabet_size();
  std::vector<std::uint32_t> row_ptr(l + 1, 0);
  std::vector<std::uint32_t> col;
  std::vector<double> logw;
  for (std::size_t a = 0; a < l; ++a) {
    for (Symbol b : s.successors(static_cast<Symbol>(a))) {
      col.push_back(b);
      logw.push_back(0.0);
    }
    row_ptr[a + 1] = static_cast<std::uint32_t>(col.size());
  }
  SparseTransfer op(l, std::move(row_ptr), std::move(col), logw);
  const double h = perron(op).log_rho;
  return h < 0.0 && h > -1e-15 ? 0.0 : h;
}

}  // namespace bowendim

