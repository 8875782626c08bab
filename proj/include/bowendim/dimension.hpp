#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "bowendim/bowen.hpp"
#include "bowendim/common.hpp"
#include "bowendim/gibbs.hpp"
#include "bowendim/model.hpp"
#include "bowendim/realization.hpp"

namespace bowendim {

// ---------------------------------------------------------------------------
// ball masses along the two foliations

// Chain reversal: the stationary Markov chain read backwards, which drives the
// stable foliation. Lives on the transposed adjacency.
inline MarkovMeasure reverse_chain(const MarkovMeasure& mu) {
  if (mu.state_len != 1)
    throw std::invalid_argument("reverse_chain expects a depth-1 chain");
  const std::size_t m = mu.states.size();
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::uint32_t e = mu.row_ptr[i]; e < mu.row_ptr[i + 1]; ++e)
      rows[mu.col[e]].push_back({static_cast<std::uint32_t>(i),
                                 mu.p[mu.col[e]] > 0.0
                                     ? mu.p[i] * mu.q[e] / mu.p[mu.col[e]]
                                     : 0.0});
  MarkovMeasure rev;
  rev.state_len = 1;
  rev.states = mu.states;
  rev.p = mu.p;
  rev.pressure = mu.pressure;
  rev.potential_depth = mu.potential_depth;
  rev.provenance = mu.provenance + ", reversed";
  rev.row_ptr.assign(m + 1, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (auto& [j, q] : rows[i]) {
      rev.col.push_back(j);
      rev.q.push_back(q);
    }
    rev.row_ptr[i + 1] = static_cast<std::uint32_t>(rev.col.size());
  }
  return rev;
}

namespace detail {

// DFS node for the unstable cover: exact affine image of the cube per band.
struct UnstableNode {
  std::vector<Eigen::MatrixXd> a;  // per band, m_j x m_j
  Eigen::VectorXd off;             // full u offsets
  double mass;
  Symbol last;
  std::size_t depth;
};

inline Box unstable_node_box(const GeometricRealization& real, const UnstableNode& n) {
  const auto& bands = real.model().bands();
  Box b;
  const std::size_t u = real.model().unstable_dim();
  b.lo.assign(u, 0.0);
  b.size.assign(u, 0.0);
  std::size_t c0 = 0;
  for (std::size_t j = 0; j < bands.band_count(); ++j) {
    const auto& a = n.a[j];
    for (Eigen::Index row = 0; row < a.rows(); ++row) {
      double span = 0.0, shift = 0.0;
      for (Eigen::Index cc = 0; cc < a.cols(); ++cc) {
        span += std::abs(a(row, cc));
        shift += std::min(a(row, cc), 0.0);
      }
      b.lo[c0 + static_cast<std::size_t>(row)] =
          n.off[static_cast<Eigen::Index>(c0) + row] + shift;
      b.size[c0 + static_cast<std::size_t>(row)] = span;
    }
    c0 += static_cast<std::size_t>(a.rows());
  }
  return b;
}

inline UnstableNode unstable_root_node(const GeometricRealization& real, Symbol i,
                                       double mass) {
  const auto& model = real.model();
  const auto& bands = model.bands();
  UnstableNode n;
  const std::size_t u = model.unstable_dim();
  n.off.resize(static_cast<Eigen::Index>(u));
  for (std::size_t c = 0; c < u; ++c)
    n.off[static_cast<Eigen::Index>(c)] = real.placement_offset(i, c);
  n.a.resize(bands.band_count());
  for (std::size_t j = 0; j < bands.band_count(); ++j) {
    const auto mj = static_cast<Eigen::Index>(bands.m[j]);
    if (model.diagonal())
      n.a[j] = Eigen::MatrixXd::Identity(mj, mj) * std::exp(-model.log_rate(i, j));
    else
      n.a[j] = model.band_matrix(i, j).inverse();
  }
  n.mass = mass;
  n.last = i;
  n.depth = 1;
  return n;
}

// child = parent composed with g_a on the right
inline UnstableNode unstable_child(const GeometricRealization& real, const UnstableNode& p,
                                   Symbol a, double step_prob) {
  const auto& model = real.model();
  const auto& bands = model.bands();
  UnstableNode n;
  n.a.resize(bands.band_count());
  n.off = p.off;
  std::size_t c0 = 0;
  for (std::size_t j = 0; j < bands.band_count(); ++j) {
    const auto mj = static_cast<Eigen::Index>(bands.m[j]);
    Eigen::MatrixXd ga;
    if (model.diagonal())
      ga = Eigen::MatrixXd::Identity(mj, mj) * std::exp(-model.log_rate(a, j));
    else
      ga = model.band_matrix(a, j).inverse();
    Eigen::VectorXd ga_off(mj);
    for (Eigen::Index row = 0; row < mj; ++row)
      ga_off[row] = real.placement_offset(a, c0 + static_cast<std::size_t>(row));
    n.off.segment(static_cast<Eigen::Index>(c0), mj) += p.a[j] * ga_off;
    n.a[j] = p.a[j] * ga;
    c0 += static_cast<std::size_t>(mj);
  }
  n.mass = p.mass * step_prob;
  n.last = a;
  n.depth = p.depth + 1;
  return n;
}

}  // namespace detail

// Mass the chain gives to the stopping-time cover of the ball B(x, r) in the
// unstable leaf: words are refined until their realized cylinder has all sides
// <= r, cylinders missing the closed ball are pruned, and the retained
// cylinder masses are summed. Monotone in r by cover nesting.
double unstable_ball_mass(const GeometricRealization& real, const MarkovMeasure& mu,
                          const std::vector<double>& x, double r);

// Same along the stable foliation; the chain must be the reversed one and the
// cylinders compose through the transposed shift.
double stable_ball_mass(const GeometricRealization& real, const MarkovMeasure& rev,
                        const std::vector<double>& x, double r);

struct SlopeBracket {
  double lower = 0.0, upper = 0.0;     // min and max regression slope
  std::vector<double> slopes;          // per sample point
  std::vector<double> r_grid;
};

// Regression slopes of log ball mass against log r across sample prefixes.
SlopeBracket pointwise_dimension_bracket(const GeometricRealization& real,
                                         const MarkovMeasure& mu,
                                         const std::vector<Word>& prefixes,
                                         const std::vector<double>& r_grid);

// ---------------------------------------------------------------------------
// box counting

enum class RealizedSet { UnstableSlice, StableSlice, Full };

struct BoxCountPoint {
  double delta = 0.0;
  std::uint64_t boxes = 0;
};

struct BoxCountResult {
  std::vector<BoxCountPoint> table;
  LineFit fit;  // log N(delta) against log(1/delta)
};

BoxCountResult box_counting(const GeometricRealization& real, RealizedSet set,
                            std::size_t max_depth, const std::vector<double>& deltas,
                            const Caps& caps = {});

// ---------------------------------------------------------------------------
// root brackets and identity checks

struct BracketRow {
  std::size_t level = 1;       // N = 2^k
  double eps_slack = 0.0;
  double t = 0.0;              // unstable root at the level
  double t_prime = 0.0;        // stable root
  double lower = 0.0;          // t + t'
  double upper = 0.0;          // u + t'
  double lower_slack = 0.0;    // lower - 2 eps
  double upper_slack = 0.0;    // upper + 2 eps
  double slope_min = 0.0, slope_max = 0.0;  // empirical product-ball slopes
  bool slopes_inside = true;
};

// The level-indexed dimension bracket [t_n + t'_n, u + t'_n] with the paper's
// +-2 eps slack, plus empirical pointwise slopes of the product measure
// mu-hat = (equilibrium at t_n) x (reversed equilibrium at t'_n) which must
// land inside the slacked bracket.
BracketRow product_bracket(const HorseshoeModel& model, const GeometricRealization& real,
                           std::size_t level_k, double eps_slack, double tol = 1e-10,
                           const Caps& caps = {}, bool sample_slopes = true);

struct YoungReport {
  double empirical = 0.0;   // mean product-ball slope
  double target = 0.0;      // h/lambda_u + h/(-lambda_s)
  double residual = 0.0;
  double entropy = 0.0;
  double lambda_u = 0.0, lambda_s = 0.0;
};

// Dimension of a measure on a conformal 2-d model: empirical product-ball
// slope against the entropy-over-exponents closed form.
YoungReport young_formula_check(const GeometricRealization& real, const MarkovMeasure& mu,
                                const Caps& caps = {});

struct McmReport {
  double t_u = 0.0, t_s = 0.0;         // pressure-equation roots
  double box_u = 0.0, box_s = 0.0;     // box-counting estimates of the slices
  double box_residual_u = 0.0, box_residual_s = 0.0;
  double r2_u = 1.0, r2_s = 1.0;
};

// Unstable/stable slice dimensions of a 2-d model: Bowen roots against
// box-counting of the realized slices.
McmReport mcm_roots_check(const HorseshoeModel& model, const GeometricRealization& real,
                          std::size_t depth = 40, const Caps& caps = {});

// ---------------------------------------------------------------------------
// entropy/exponent-typical block families

struct KatokOptions {
  double eps = 0.05;
  std::size_t block_len = 8;
  bool use_exponent_filter = true;
  Caps caps{};
};

struct BlockFamily {
  std::size_t block_len = 1;
  bool trivial = false;            // every block provably typical; family == base system
  std::vector<Word> blocks;        // retained dominant component, lex sorted
  std::vector<std::uint32_t> row_ptr, col;  // overlap transitions on `blocks`
  double retained_fraction = 1.0;
  double h_top = 0.0;              // per base step
  double target_entropy = 0.0;     // h_mu of the target measure
  double entropy_gap_below = 0.0;  // max(0, h_mu - h_top), the delta_n certificate
  double entropy_gap_above = 0.0;
  std::vector<double> target_band_exponents;
  double max_sampled_exponent_dev = 0.0;  // certificate over sampled chain measures
};

// Sub-system spanned by the n-blocks that are entropy-typical and (optionally)
// band-exponent-typical for the target measure, chained by (n-1)-overlap and
// restricted to the dominant strongly connected component. Constant-rate full
// shifts under their uniform equilibrium retain every block; that case is
// recognized exactly and returned without enumeration.
BlockFamily katok_family(const HorseshoeModel& model, const MarkovMeasure& target,
                         const KatokOptions& opts);

// Bowen roots over a block family at level 1 (the additive case; diagonal
// models make every level agree with level 1).
RootResult family_unstable_root(const HorseshoeModel& model, const BlockFamily& family,
                                FamilyKind kind, double tol = 1e-10, const Caps& caps = {});
RootResult family_stable_root(const HorseshoeModel& model, const BlockFamily& family,
                              double tol = 1e-10, const Caps& caps = {});

// ---------------------------------------------------------------------------
// the dimension-limit experiment

struct LimitExperimentRow {
  std::size_t block_len = 0;
  double eps = 0.0;
  double t = 0.0, t_prime = 0.0;
  double lower = 0.0, upper = 0.0;          // [t + t', u + t']
  double lower_slack = 0.0, upper_slack = 0.0;
  double family_entropy = 0.0;
  double retained_fraction = 1.0;
  double gap = 0.0;  // distance from the closed-form target to the core bracket
};

struct LimitExperimentReport {
  double target = 0.0;       // u + h/(-lambda_s)
  double bps_unstable = 0.0; // u
  double bps_stable = 0.0;   // h/(-lambda_s)
  double entropy = 0.0;
  double stable_exponent = 0.0;
  std::vector<LimitExperimentRow> rows;
};

// For the volume-balanced equilibrium of -psi^u, sweep block families over the
// (n, eps) grid, solve both roots on each family, and report the dimension
// brackets against the closed-form product target.
LimitExperimentReport dimension_limit_experiment(const HorseshoeModel& model,
                                                 const std::vector<std::size_t>& n_grid,
                                                 const std::vector<double>& eps_grid,
                                                 double eps_slack = 0.05, double tol = 1e-10,
                                                 const Caps& caps = {});

// ===========================================================================
// implementation

inline double unstable_ball_mass(const GeometricRealization& real, const MarkovMeasure& mu,
                                 const std::vector<double>& x, double r) {
  if (mu.state_len != 1)
    throw std::invalid_argument("unstable_ball_mass expects a depth-1 chain");
  if (!(r > 0.0) || r >= 0.5)
    throw std::invalid_argument("unstable_ball_mass: r must lie in (0, 0.5)");
  const auto& model = real.model();
  double total = 0.0;
  std::vector<detail::UnstableNode> stack;
  for (Symbol i = 0; i < model.shift().alphabet_size(); ++i)
    stack.push_back(detail::unstable_root_node(real, i, mu.p[i]));
  while (!stack.empty()) {
    detail::UnstableNode node = std::move(stack.back());
    stack.pop_back();
    if (node.mass <= 0.0) continue;
    const Box b = detail::unstable_node_box(real, node);
    if (b.sup_distance(x) > r) continue;
    if (b.max_side() <= r || node.depth >= 500) {
      total += node.mass;
      continue;
    }
    const std::size_t i = node.last;
    for (std::uint32_t e = mu.row_ptr[i]; e < mu.row_ptr[i + 1]; ++e)
      stack.push_back(detail::unstable_child(real, node, static_cast<Symbol>(mu.col[e]),
                                             mu.q[e]));
  }
  return total;
}

inline double stable_ball_mass(const GeometricRealization& real, const MarkovMeasure& rev,
                               const std::vector<double>& x, double r) {
  if (rev.state_len != 1)
    throw std::invalid_argument("stable_ball_mass expects a depth-1 chain");
  struct Node {
    double lo, size, mass;
    Symbol last;
    std::size_t depth;
  };
  const auto& model = real.model();
  double total = 0.0;
  std::vector<Node> stack;
  for (Symbol i = 0; i < model.shift().alphabet_size(); ++i) {
    Box cell = real.realize_stable_cylinder({i});
    stack.push_back({cell.lo[0], cell.size[0], rev.p[i], i, 1});
  }
  while (!stack.empty()) {
    Node node = stack.back();
    stack.pop_back();
    if (node.mass <= 0.0) continue;
    double d = 0.0;
    if (x[0] < node.lo) d = node.lo - x[0];
    else if (x[0] > node.lo + node.size) d = x[0] - (node.lo + node.size);
    if (d > r) continue;
    if (node.size <= r || node.depth >= 500) {
      total += node.mass;
      continue;
    }
    for (std::uint32_t e = rev.row_ptr[node.last]; e < rev.row_ptr[node.last + 1]; ++e) {
      const Symbol a = static_cast<Symbol>(rev.col[e]);
      const double c = std::exp(model.log_stable_rate(a));
      // append a to the past: previous composed map applied to h_a([0,1])
      Node child{node.lo + node.size * real.stable_placement_offset(a), node.size * c,
                 node.mass * rev.q[e], a, node.depth + 1};
      stack.push_back(child);
    }
  }
  return total;
}

// Deterministic mu-typical point: the prefix is extended by digits sampled
// from the chain's conditional law along a golden-ratio Weyl sequence, so the
// tail equidistributes under the measure.
inline std::vector<double> typical_unstable_point(const GeometricRealization& real,
                                                  const MarkovMeasure& mu, const Word& prefix,
                                                  double phase = 0.0) {
  constexpr double kAlpha = 0.6180339887498949;
  Word w = prefix;
  double t = phase;
  while (w.size() < prefix.size() + 64) {
    t += kAlpha;
    t -= std::floor(t);
    const std::size_t i = w.back();
    double acc = 0.0;
    Symbol chosen = static_cast<Symbol>(mu.col[mu.row_ptr[i + 1] - 1]);
    for (std::uint32_t e = mu.row_ptr[i]; e < mu.row_ptr[i + 1]; ++e) {
      acc += mu.q[e];
      if (t <= acc) {
        chosen = static_cast<Symbol>(mu.col[e]);
        break;
      }
    }
    w.push_back(chosen);
  }
  const Box b = real.realize_cylinder(w).outer;
  std::vector<double> x(b.dim());
  for (std::size_t c = 0; c < x.size(); ++c) x[c] = b.lo[c] + 0.5 * b.size[c];
  return x;
}

inline std::vector<double> typical_stable_point(const GeometricRealization& real,
                                                const MarkovMeasure& rev, const Word& prefix,
                                                double phase = 0.0) {
  constexpr double kAlpha = 0.6180339887498949;
  Word v = prefix;
  double t = phase;
  while (v.size() < prefix.size() + 64) {
    t += kAlpha;
    t -= std::floor(t);
    const std::size_t i = v.back();
    double acc = 0.0;
    Symbol chosen = static_cast<Symbol>(rev.col[rev.row_ptr[i + 1] - 1]);
    for (std::uint32_t e = rev.row_ptr[i]; e < rev.row_ptr[i + 1]; ++e) {
      acc += rev.q[e];
      if (t <= acc) {
        chosen = static_cast<Symbol>(rev.col[e]);
        break;
      }
    }
    v.push_back(chosen);
  }
  const Box b = real.realize_stable_cylinder(v);
  return {b.lo[0] + 0.5 * b.size[0]};
}

inline SlopeBracket pointwise_dimension_bracket(const GeometricRealization& real,
                                                const MarkovMeasure& mu,
                                                const std::vector<Word>& prefixes,
                                                const std::vector<double>& r_grid) {
  SlopeBracket out;
  out.r_grid = r_grid;
  std::vector<double> logr(r_grid.size());
  for (std::size_t k = 0; k < r_grid.size(); ++k) logr[k] = std::log(r_grid[k]);
  for (const Word& prefix : prefixes) {
    const auto x = real.unstable_point(prefix);
    std::vector<double> logm(r_grid.size());
    for (std::size_t k = 0; k < r_grid.size(); ++k) {
      const double m = unstable_ball_mass(real, mu, x, r_grid[k]);
      logm[k] = std::log(std::max(m, 1e-300));
    }
    out.slopes.push_back(fit_line(logr, logm).slope);
  }
  out.lower = *std::min_element(out.slopes.begin(), out.slopes.end());
  out.upper = *std::max_element(out.slopes.begin(), out.slopes.end());
  return out;
}

namespace detail {

constexpr std::uint64_t kCellHashCap = 40'000'000;

inline std::uint64_t pack_cells(const std::vector<std::int64_t>& c) {
  std::uint64_t h = 1469598103934665603ull;
  for (auto v : c) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull;
    h *= 1099511628211ull;
  }
  return h;
}

inline void mark_box_cells(const Box& b, double delta,
                           std::unordered_set<std::uint64_t>& cells,
                           std::vector<std::uint64_t>* out_list = nullptr) {
  const std::size_t dim = b.dim();
  std::vector<std::int64_t> lo(dim), hi(dim), cur(dim);
  for (std::size_t c = 0; c < dim; ++c) {
    lo[c] = static_cast<std::int64_t>(std::floor((b.lo[c] + 1e-15) / delta));
    hi[c] = static_cast<std::int64_t>(std::floor((b.lo[c] + b.size[c] - 1e-15) / delta));
    if (hi[c] < lo[c]) hi[c] = lo[c];
    cur[c] = lo[c];
  }
  while (true) {
    const std::uint64_t key = pack_cells(cur);
    if (cells.insert(key).second && out_list) out_list->push_back(key);
    std::size_t c = 0;
    for (; c < dim; ++c) {
      if (cur[c] < hi[c]) {
        ++cur[c];
        break;
      }
      cur[c] = lo[c];
    }
    if (c == dim) break;
  }
}

// stopping-time cover of one foliation at scale delta, cells marked into `cells`
inline void cover_unstable(const GeometricRealization& real, double delta,
                           std::size_t max_depth,
                           std::vector<std::unordered_set<std::uint64_t>>& per_first_symbol) {
  const auto& model = real.model();
  struct Item {
    UnstableNode node;
    Symbol first;
  };
  std::vector<Item> stack;
  for (Symbol i = 0; i < model.shift().alphabet_size(); ++i)
    stack.push_back({unstable_root_node(real, i, 1.0), i});
  while (!stack.empty()) {
    Item it = std::move(stack.back());
    stack.pop_back();
    const Box b = unstable_node_box(real, it.node);
    if (b.max_side() <= delta || it.node.depth >= max_depth) {
      mark_box_cells(b, delta, per_first_symbol[it.first]);
      if (per_first_symbol[it.first].size() > kCellHashCap)
        throw CapExceeded("box_counting: cell count exceeds the internal cap");
      continue;
    }
    for (Symbol a : model.shift().successors(it.node.last))
      stack.push_back({unstable_child(real, it.node, a, 1.0), it.first});
  }
}

inline void cover_stable(const GeometricRealization& real, double delta,
                         std::size_t max_depth,
                         std::vector<std::unordered_set<std::uint64_t>>& per_first_symbol) {
  const auto& model = real.model();
  struct Node {
    double lo, size;
    Symbol last, first;
    std::size_t depth;
  };
  std::vector<Node> stack;
  for (Symbol i = 0; i < model.shift().alphabet_size(); ++i) {
    Box cell = real.realize_stable_cylinder({i});
    stack.push_back({cell.lo[0], cell.size[0], i, i, 1});
  }
  while (!stack.empty()) {
    Node node = stack.back();
    stack.pop_back();
    if (node.size <= delta || node.depth >= max_depth) {
      Box b;
      b.lo = {node.lo};
      b.size = {node.size};
      mark_box_cells(b, delta, per_first_symbol[node.first]);
      continue;
    }
    for (Symbol a = 0; a < model.shift().alphabet_size(); ++a) {
      if (!model.shift().allowed(a, node.last)) continue;
      const double c = std::exp(model.log_stable_rate(a));
      Box ha = real.realize_stable_cylinder({a});
      stack.push_back({node.lo + node.size * ha.lo[0], node.size * c, a, node.first,
                       node.depth + 1});
    }
  }
}

}  // namespace detail

inline BoxCountResult box_counting(const GeometricRealization& real, RealizedSet set,
                                   std::size_t max_depth, const std::vector<double>& deltas,
                                   const Caps& caps) {
  (void)caps;
  const auto& model = real.model();
  const std::size_t l = model.shift().alphabet_size();
  BoxCountResult out;
  std::vector<double> xs, ys;
  for (double delta : deltas) {
    std::uint64_t count = 0;
    if (set == RealizedSet::UnstableSlice || set == RealizedSet::StableSlice) {
      std::vector<std::unordered_set<std::uint64_t>> per(l);
      if (set == RealizedSet::UnstableSlice)
        detail::cover_unstable(real, delta, max_depth, per);
      else
        detail::cover_stable(real, delta, max_depth, per);
      std::unordered_set<std::uint64_t> all;
      for (auto& s : per) all.insert(s.begin(), s.end());
      count = all.size();
    } else {
      std::vector<std::unordered_set<std::uint64_t>> ucells(l), scells(l);
      detail::cover_unstable(real, delta, max_depth, ucells);
      detail::cover_stable(real, delta, max_depth, scells);
      // pair stable pasts with unstable futures across admissible junctions
      std::unordered_set<std::uint64_t> pairs;
      for (Symbol a = 0; a < l; ++a) {
        std::unordered_set<std::uint64_t> stable_union;
        for (Symbol b = 0; b < l; ++b)
          if (model.shift().allowed(b, a))
            stable_union.insert(scells[b].begin(), scells[b].end());
        for (std::uint64_t uc : ucells[a])
          for (std::uint64_t sc : stable_union) {
            pairs.insert(uc * 0x9e3779b97f4a7c15ull ^ sc);
            if (pairs.size() > detail::kCellHashCap)
              throw CapExceeded("box_counting: product cell count exceeds the internal cap");
          }
      }
      count = pairs.size();
    }
    out.table.push_back({delta, count});
    xs.push_back(std::log(1.0 / delta));
    ys.push_back(std::log(static_cast<double>(std::max<std::uint64_t>(count, 1))));
  }
  out.fit = fit_line(xs, ys);
  return out;
}

inline BracketRow product_bracket(const HorseshoeModel& model,
                                  const GeometricRealization& real, std::size_t level_k,
                                  double eps_slack, double tol, const Caps& caps,
                                  bool sample_slopes) {
  BracketRow row;
  row.level = static_cast<std::size_t>(1) << level_k;
  row.eps_slack = eps_slack;
  const RootResult tu = bowen_root_unstable(model, row.level, FamilyKind::UnstableNorm, tol, caps);
  const RootResult ts = bowen_root_stable(model, row.level, tol, caps);
  row.t = tu.root;
  row.t_prime = ts.root;
  const double u = static_cast<double>(model.unstable_dim());
  row.lower = row.t + row.t_prime;
  row.upper = u + row.t_prime;
  row.lower_slack = row.lower - 2.0 * eps_slack;
  row.upper_slack = row.upper + 2.0 * eps_slack;
  if (sample_slopes) {
    // product measure at the roots, sampled through level-1 equilibria
    const auto mu_u = equilibrium_measure(
        model.shift(),
        as_locally_constant(model, FamilySpec{FamilyKind::UnstableNorm, row.t, true}, 1, caps),
        caps);
    const auto mu_s_fwd = equilibrium_measure(
        model.shift(),
        as_locally_constant(model, FamilySpec{FamilyKind::Stable, row.t_prime, false}, 1, caps),
        caps);
    const auto mu_s = reverse_chain(mu_s_fwd);
    std::vector<double> r_grid;
    for (int k = 4; k <= 11; ++k) r_grid.push_back(std::pow(2.0, -k));
    std::size_t plen = 1;
    while (count_words(model.shift(), plen) < 8 && plen < 6) ++plen;
    auto prefixes = admissible_words(model.shift(), plen, caps);
    if (prefixes.size() > 16) prefixes.resize(16);
    std::vector<double> slopes;
    for (const Word& prefix : prefixes) {
      const auto xu = real.unstable_point(prefix);
      const auto xs = real.stable_point({prefix.front()});
      std::vector<double> lr, lm;
      for (double r : r_grid) {
        const double m =
            unstable_ball_mass(real, mu_u, xu, r) * stable_ball_mass(real, mu_s, xs, r);
        lr.push_back(std::log(r));
        lm.push_back(std::log(std::max(m, 1e-300)));
      }
      slopes.push_back(fit_line(lr, lm).slope);
    }
    row.slope_min = *std::min_element(slopes.begin(), slopes.end());
    row.slope_max = *std::max_element(slopes.begin(), slopes.end());
    row.slopes_inside =
        row.slope_min >= row.lower_slack - 0.05 && row.slope_max <= row.upper_slack + 0.05;
  }
  return row;
}

inline YoungReport young_formula_check(const GeometricRealization& real,
                                       const MarkovMeasure& mu, const Caps& caps) {
  const auto& model = real.model();
  if (model.bands().band_count() != 1 || model.unstable_dim() != 1)
    throw std::invalid_argument("young_formula_check expects a conformal 2-d model");
  YoungReport rep;
  const auto lyap = lyapunov_exponents(model, mu, 1, caps);
  rep.entropy = entropy(mu);
  rep.lambda_u = lyap.band_exponents[0];
  rep.lambda_s = lyap.stable_exponent;
  rep.target = rep.entropy / rep.lambda_u + rep.entropy / (-rep.lambda_s);
  const auto rev = reverse_chain(mu);
  std::vector<double> r_grid;
  for (int k = 4; k <= 14; ++k) r_grid.push_back(std::pow(2.0, -k));
  std::size_t plen = 4;
  auto prefixes = admissible_words(model.shift(), plen, caps);
  if (prefixes.size() > 16) prefixes.resize(16);
  // the measure-typical value is a mass-weighted average over prefix cylinders
  double mean = 0.0, total_weight = 0.0;
  for (std::size_t pi = 0; pi < prefixes.size(); ++pi) {
    const auto xu = typical_unstable_point(real, mu, prefixes[pi], 0.37 * static_cast<double>(pi));
    const auto xs = typical_stable_point(real, rev, {prefixes[pi].front()},
                                         0.59 * static_cast<double>(pi) + 0.11);
    std::vector<double> lr, lm;
    for (double r : r_grid) {
      const double m =
          unstable_ball_mass(real, mu, xu, r) * stable_ball_mass(real, rev, xs, r);
      lr.push_back(std::log(r));
      lm.push_back(std::log(std::max(m, 1e-300)));
    }
    const double weight = cylinder_mass(model.shift(), mu, prefixes[pi]);
    mean += weight * fit_line(lr, lm).slope;
    total_weight += weight;
  }
  rep.empirical = mean / total_weight;
  rep.residual = std::abs(rep.empirical - rep.target);
  return rep;
}

inline McmReport mcm_roots_check(const HorseshoeModel& model,
                                 const GeometricRealization& real, std::size_t depth,
                                 const Caps& caps) {
  if (model.unstable_dim() != 1)
    throw std::invalid_argument("mcm_roots_check expects a 2-d model");
  McmReport rep;
  rep.t_u = bowen_root_unstable(model, 1, FamilyKind::UnstableNorm, 1e-10, caps).root;
  rep.t_s = bowen_root_stable(model, 1, 1e-10, caps).root;
  std::vector<double> deltas;
  for (int k = 4; k <= 10; ++k) deltas.push_back(std::pow(2.0, -k));
  const auto bu = box_counting(real, RealizedSet::UnstableSlice, depth, deltas, caps);
  const auto bs = box_counting(real, RealizedSet::StableSlice, depth, deltas, caps);
  rep.box_u = bu.fit.slope;
  rep.box_s = bs.fit.slope;
  rep.r2_u = bu.fit.r2;
  rep.r2_s = bs.fit.r2;
  rep.box_residual_u = std::abs(rep.t_u - rep.box_u);
  rep.box_residual_s = std::abs(rep.t_s - rep.box_s);
  return rep;
}

namespace detail {

// iterative Tarjan SCC over the block graph
inline std::vector<std::vector<std::uint32_t>> strongly_connected_components(
    std::size_t n, const std::vector<std::uint32_t>& row_ptr,
    const std::vector<std::uint32_t>& col) {
  std::vector<std::uint32_t> index(n, UINT32_MAX), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::uint32_t> stack;
  std::vector<std::vector<std::uint32_t>> sccs;
  std::uint32_t counter = 0;
  struct Frame {
    std::uint32_t v;
    std::uint32_t edge;
  };
  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != UINT32_MAX) continue;
    std::vector<Frame> call{{root, row_ptr[root]}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.edge < row_ptr[f.v + 1]) {
        const std::uint32_t w = col[f.edge++];
        if (index[w] == UINT32_MAX) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, row_ptr[w]});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        if (low[f.v] == index[f.v]) {
          std::vector<std::uint32_t> scc;
          while (true) {
            const std::uint32_t w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            scc.push_back(w);
            if (w == f.v) break;
          }
          sccs.push_back(std::move(scc));
        }
        const std::uint32_t v = f.v;
        call.pop_back();
        if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      }
    }
  }
  return sccs;
}

}  // namespace detail

inline BlockFamily katok_family(const HorseshoeModel& model, const MarkovMeasure& target,
                                const KatokOptions& opts) {
  const Subshift& s = model.shift();
  const std::size_t l = s.alphabet_size();
  const std::size_t n = opts.block_len;
  if (n < 1) throw std::invalid_argument("katok_family: block length must be >= 1");
  BlockFamily fam;
  fam.block_len = n;
  fam.target_entropy = entropy(target);
  const auto lyap = lyapunov_exponents(model, target, std::min<std::size_t>(n, 8), opts.caps);
  fam.target_band_exponents = lyap.band_exponents;

  // exact trivial case: full shift, constant band rates, uniform chain
  bool full = true;
  for (Symbol a = 0; a < l && full; ++a)
    for (Symbol b = 0; b < l && full; ++b) full = s.allowed(a, b);
  bool constant_rates = model.diagonal();
  if (constant_rates)
    for (std::size_t j = 0; j < model.bands().band_count() && constant_rates; ++j)
      for (Symbol i = 1; i < l && constant_rates; ++i)
        constant_rates = std::abs(model.log_rate(i, j) - model.log_rate(0, j)) < 1e-15;
  bool uniform = target.state_len == 1;
  if (uniform)
    for (std::size_t i = 0; i < target.p.size() && uniform; ++i)
      uniform = std::abs(target.p[i] - 1.0 / static_cast<double>(l)) < 1e-12;
  if (uniform)
    for (double q : target.q)
      if (std::abs(q - 1.0 / static_cast<double>(l)) > 1e-12) uniform = false;
  if (full && constant_rates && uniform) {
    fam.trivial = true;
    fam.retained_fraction = 1.0;
    fam.h_top = std::log(static_cast<double>(l));
    fam.entropy_gap_below = std::max(0.0, fam.target_entropy - fam.h_top);
    fam.entropy_gap_above = std::max(0.0, fam.h_top - fam.target_entropy);
    fam.max_sampled_exponent_dev = 0.0;
    return fam;
  }

  // exhaustive block scan
  const auto blocks = admissible_words(s, n, opts.caps);
  const double h_mu = fam.target_entropy;
  std::vector<char> keep(blocks.size(), 0);
  std::vector<double> ent_dev(blocks.size()), exp_dev(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t k) {
    const double mass = cylinder_mass(s, target, blocks[k]);
    const double e = mass > 0.0
                         ? std::abs(-std::log(mass) / static_cast<double>(n) - h_mu)
                         : std::numeric_limits<double>::infinity();
    double x = 0.0;
    if (opts.use_exponent_filter) {
      const auto data = word_band_data(model, blocks[k]);
      for (std::size_t j = 0; j < model.bands().band_count(); ++j)
        x = std::max(x, std::abs(data.log_norm[j] / static_cast<double>(n) -
                                 fam.target_band_exponents[j]));
    }
    ent_dev[k] = e;
    exp_dev[k] = x;
    keep[k] = e <= opts.eps && x <= opts.eps ? 1 : 0;
  });
  std::vector<std::uint32_t> retained;
  for (std::size_t k = 0; k < blocks.size(); ++k)
    if (keep[k]) retained.push_back(static_cast<std::uint32_t>(k));
  if (retained.empty()) {
    const double best_e = *std::min_element(ent_dev.begin(), ent_dev.end());
    const double best_x = *std::min_element(exp_dev.begin(), exp_dev.end());
    throw std::invalid_argument(
        "katok_family: no block is typical at eps " + std::to_string(opts.eps) +
        "; smallest entropy deviation " + std::to_string(best_e) +
        ", smallest exponent deviation " + std::to_string(best_x));
  }
  fam.retained_fraction =
      static_cast<double>(retained.size()) / static_cast<double>(blocks.size());

  // overlap graph on retained blocks, trimmed to bi-extendable states
  std::vector<Word> kept_words(retained.size());
  for (std::size_t k = 0; k < retained.size(); ++k) kept_words[k] = blocks[retained[k]];
  std::vector<char> alive(kept_words.size(), 1);
  auto successors_of = [&](std::size_t k, std::vector<std::uint32_t>& out) {
    out.clear();
    const Word& w = kept_words[k];
    Word next(w.begin() + 1, w.end());
    next.push_back(0);
    for (Symbol a : s.successors(w.back())) {
      next.back() = a;
      auto it = std::lower_bound(kept_words.begin(), kept_words.end(), next);
      const auto idx = static_cast<std::size_t>(it - kept_words.begin());
      if (it != kept_words.end() && *it == next && alive[idx])
        out.push_back(static_cast<std::uint32_t>(idx));
    }
  };
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::uint32_t> succ;
    std::vector<std::uint32_t> indeg(kept_words.size(), 0);
    for (std::size_t k = 0; k < kept_words.size(); ++k) {
      if (!alive[k]) continue;
      successors_of(k, succ);
      if (succ.empty()) {
        alive[k] = 0;
        changed = true;
        continue;
      }
      for (auto j : succ) ++indeg[j];
    }
    for (std::size_t k = 0; k < kept_words.size(); ++k)
      if (alive[k] && indeg[k] == 0) {
        alive[k] = 0;
        changed = true;
      }
  }
  std::vector<Word> core;
  for (std::size_t k = 0; k < kept_words.size(); ++k)
    if (alive[k]) core.push_back(kept_words[k]);
  if (core.empty())
    throw std::invalid_argument(
        "katok_family: retained blocks do not chain into a subshift at eps " +
        std::to_string(opts.eps));
  // rebuild CSR on the trimmed set, then keep the dominant SCC
  auto build_csr = [&](const std::vector<Word>& words, std::vector<std::uint32_t>& row_ptr,
                       std::vector<std::uint32_t>& col) {
    row_ptr.assign(words.size() + 1, 0);
    col.clear();
    for (std::size_t k = 0; k < words.size(); ++k) {
      const Word& w = words[k];
      Word next(w.begin() + 1, w.end());
      next.push_back(0);
      for (Symbol a : s.successors(w.back())) {
        next.back() = a;
        auto it = std::lower_bound(words.begin(), words.end(), next);
        if (it != words.end() && *it == next)
          col.push_back(static_cast<std::uint32_t>(it - words.begin()));
      }
      row_ptr[k + 1] = static_cast<std::uint32_t>(col.size());
    }
  };
  std::vector<std::uint32_t> row_ptr, col;
  build_csr(core, row_ptr, col);
  auto sccs = detail::strongly_connected_components(core.size(), row_ptr, col);
  double best_h = -std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t>* best = nullptr;
  for (auto& scc : sccs) {
    if (scc.size() == 1) {
      // keep only if it has a self loop
      bool loop = false;
      for (std::uint32_t e = row_ptr[scc[0]]; e < row_ptr[scc[0] + 1]; ++e)
        if (col[e] == scc[0]) loop = true;
      if (!loop) continue;
    }
    std::sort(scc.begin(), scc.end());
    std::vector<Word> words;
    for (auto k : scc) words.push_back(core[k]);
    std::vector<std::uint32_t> rp, cc;
    build_csr(words, rp, cc);
    std::vector<double> logw(cc.size(), 0.0);
    SparseTransfer op(words.size(), rp, cc, logw);
    const double h = perron(op).log_rho;
    if (h > best_h) {
      best_h = h;
      best = &scc;
    }
  }
  if (!best)
    throw std::invalid_argument("katok_family: retained blocks carry no recurrent chain");
  std::sort(best->begin(), best->end());
  for (auto k : *best) fam.blocks.push_back(core[k]);
  build_csr(fam.blocks, fam.row_ptr, fam.col);
  fam.h_top = best_h;
  fam.entropy_gap_below = std::max(0.0, h_mu - fam.h_top);
  fam.entropy_gap_above = std::max(0.0, fam.h_top - h_mu);

  // exponent certificate over sampled chain measures on the family
  if (model.diagonal()) {
    std::vector<double> logw(fam.col.size(), 0.0);
    for (double tilt : {0.0, 0.5, -0.5}) {
      for (std::size_t k = 0; k < fam.blocks.size(); ++k)
        for (std::uint32_t e = fam.row_ptr[k]; e < fam.row_ptr[k + 1]; ++e)
          logw[e] = tilt * model.log_rate(fam.blocks[fam.col[e]].front(), 0);
      SparseTransfer op(fam.blocks.size(), fam.row_ptr, fam.col, logw);
      PerronData pd = perron(op, true);
      std::vector<double> station(fam.blocks.size());
      double tot = 0.0;
      for (std::size_t k = 0; k < fam.blocks.size(); ++k) {
        station[k] = pd.left[k] * pd.right[k];
        tot += station[k];
      }
      for (std::size_t j = 0; j < model.bands().band_count(); ++j) {
        double lam = 0.0;
        for (std::size_t k = 0; k < fam.blocks.size(); ++k)
          lam += station[k] / tot * model.log_rate(fam.blocks[k].front(), j);
        fam.max_sampled_exponent_dev =
            std::max(fam.max_sampled_exponent_dev,
                     std::abs(lam - fam.target_band_exponents[j]));
      }
    }
  }
  return fam;
}

namespace detail {

inline RootResult family_root_impl(const HorseshoeModel& model, const BlockFamily& family,
                                   FamilyKind kind, double top, double tol,
                                   const Caps& caps) {
  if (family.trivial) {
    RootResult r = kind == FamilyKind::Stable
                       ? bowen_root_stable(model, 1, tol, caps)
                       : bowen_root_unstable(model, 1, kind, tol, caps);
    return r;
  }
  // depth-1 potential over the block SFT: the value of the one-step family on
  // the leading symbol of each block
  std::vector<WordBandData> head(family.blocks.size());
  for (std::size_t k = 0; k < family.blocks.size(); ++k)
    head[k] = word_band_data(model, {family.blocks[k].front()});
  auto pressure = [&](double param) {
    FamilySpec spec{kind, param, kind != FamilyKind::Stable};
    std::vector<double> logw(family.col.size());
    for (std::size_t k = 0; k < family.blocks.size(); ++k)
      for (std::uint32_t e = family.row_ptr[k]; e < family.row_ptr[k + 1]; ++e)
        logw[e] = family_value(model, head[family.col[e]], spec);
    SparseTransfer op(family.blocks.size(), family.row_ptr, family.col, logw);
    return perron(op).log_rho;
  };
  RootResult r = bisect_root(pressure, top, tol, 0.5);
  r.level = 1;
  r.kind = kind;
  return r;
}

}  // namespace detail

inline RootResult family_unstable_root(const HorseshoeModel& model, const BlockFamily& family,
                                       FamilyKind kind, double tol, const Caps& caps) {
  if (kind == FamilyKind::Stable)
    throw std::invalid_argument("family_unstable_root: wrong kind");
  return detail::family_root_impl(model, family, kind,
                                  static_cast<double>(model.unstable_dim()), tol, caps);
}

inline RootResult family_stable_root(const HorseshoeModel& model, const BlockFamily& family,
                                     double tol, const Caps& caps) {
  return detail::family_root_impl(model, family, FamilyKind::Stable, 1.0, tol, caps);
}

inline LimitExperimentReport dimension_limit_experiment(
    const HorseshoeModel& model, const std::vector<std::size_t>& n_grid,
    const std::vector<double>& eps_grid, double eps_slack, double tol, const Caps& caps) {
  if (!model.diagonal())
    throw std::invalid_argument("dimension_limit_experiment expects a diagonal model");
  LimitExperimentReport rep;
  const auto mu = equilibrium_measure(model.shift(), srb_potential(model, caps), caps);
  const auto lyap = lyapunov_exponents(model, mu, 1, caps);
  rep.entropy = entropy(mu);
  rep.stable_exponent = lyap.stable_exponent;
  rep.bps_unstable = static_cast<double>(model.unstable_dim());
  rep.bps_stable = rep.entropy / (-rep.stable_exponent);
  rep.target = rep.bps_unstable + rep.bps_stable;
  for (double eps : eps_grid) {
    for (std::size_t n : n_grid) {
      KatokOptions opts;
      opts.eps = eps;
      opts.block_len = n;
      opts.caps = caps;
      const BlockFamily fam = katok_family(model, mu, opts);
      const RootResult t = family_unstable_root(model, fam, FamilyKind::UnstableNorm, tol, caps);
      const RootResult tp = family_stable_root(model, fam, tol, caps);
      LimitExperimentRow row;
      row.block_len = n;
      row.eps = eps;
      row.t = t.root;
      row.t_prime = tp.root;
      row.lower = t.root + tp.root;
      row.upper = static_cast<double>(model.unstable_dim()) + tp.root;
      row.lower_slack = row.lower - 2.0 * eps_slack;
      row.upper_slack = row.upper + 2.0 * eps_slack;
      row.family_entropy = fam.h_top;
      row.retained_fraction = fam.retained_fraction;
      row.gap = 0.0;
      if (rep.target < row.lower) row.gap = row.lower - rep.target;
      if (rep.target > row.upper) row.gap = rep.target - row.upper;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

}  // namespace bowendim
