#include <catch2/catch_amalgamated.hpp>

#include <Eigen/SVD>

#include "bowendim/model.hpp"

using namespace bowendim;
using Catch::Matchers::WithinAbs;

namespace {

Eigen::MatrixXd rot(double theta) {
  Eigen::MatrixXd r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

HorseshoeModel ternary_like() {
  return HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                        {{3.0}, {3.0}}, {1.0 / 3.0, 1.0 / 3.0});
}

HorseshoeModel two_band() {
  return HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1, 1}),
                        {{8.0, 2.0}, {8.0, 2.0}}, {0.5, 0.5});
}

HorseshoeModel rotation_cocycle() {
  Eigen::MatrixXd b0 = Eigen::Vector2d(4.0, 2.0).asDiagonal();
  Eigen::MatrixXd b1 = rot(M_PI / 4.0) * b0;
  return HorseshoeModel::cocycle_model(Subshift::full(2), BandStructure({2}),
                        std::vector<std::vector<Eigen::MatrixXd>>{{b0}, {b1}},
                        {1.0 / 3.0, 1.0 / 5.0});
}

// SVD of the explicitly multiplied product, the independent oracle for the
// rescaled log-domain path.
std::pair<double, double> svd_oracle(const HorseshoeModel& m, const Word& w,
                                     std::size_t band) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(2, 2);
  for (Symbol i : w) p = m.band_matrix(i, band) * p;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p);
  return {svd.singularValues().maxCoeff(), svd.singularValues().minCoeff()};
}

}  // namespace

TEST_CASE("band structure bookkeeping") {
  BandStructure b({1, 2, 3});
  REQUIRE(b.unstable_dim() == 6);
  REQUIRE(b.r == std::vector<std::size_t>{0, 1, 3, 6});
  REQUIRE(b.r_rev == std::vector<std::size_t>{0, 3, 5, 6});
  REQUIRE_THROWS_AS(BandStructure({1, 0}), SchemaError);
}

TEST_CASE("band norms, diagonal") {
  auto m = ternary_like();
  SECTION("constant rate 3, length 4") {
    REQUIRE_THAT(m.band_norm({0, 1, 0, 1}, 0), WithinAbs(81.0, 1e-9));
  }
  SECTION("conorm equals norm for scalars") {
    auto mm = two_band();
    for (std::size_t j = 0; j < 2; ++j)
      REQUIRE(mm.band_norm({0, 1, 1}, j) == mm.band_conorm({0, 1, 1}, j));
  }
  SECTION("additivity of logs is exact") {
    auto mm = two_band();
    Word w1{0, 1}, w2{1, 0}, cat{0, 1, 1, 0};
    for (std::size_t j = 0; j < 2; ++j)
      REQUIRE_THAT(mm.log_band_norm(cat, j),
                   WithinAbs(mm.log_band_norm(w1, j) + mm.log_band_norm(w2, j), 1e-12));
  }
}

TEST_CASE("band norms, cocycle") {
  auto m = rotation_cocycle();
  SECTION("single-step norm and conorm are the singular values") {
    REQUIRE_THAT(m.band_norm({1}, 0), WithinAbs(4.0, 1e-12));
    REQUIRE_THAT(m.band_conorm({1}, 0), WithinAbs(2.0, 1e-12));
  }
  SECTION("length-2 and length-3 products match the SVD oracle") {
    for (const Word& w : std::vector<Word>{{0, 1}, {1, 0}, {1, 1}, {0, 1, 0}, {1, 0, 1}}) {
      auto [smax, smin] = svd_oracle(m, w, 0);
      REQUIRE_THAT(m.band_norm(w, 0), WithinAbs(smax, 1e-9));
      REQUIRE_THAT(m.band_conorm(w, 0), WithinAbs(smin, 1e-9));
    }
  }
  SECTION("norm is submultiplicative, conorm supermultiplicative") {
    std::vector<Word> words = {{0}, {1}, {0, 1}, {1, 0}, {1, 1}, {0, 0, 1}};
    for (const Word& a : words)
      for (const Word& b : words) {
        Word cat = a;
        cat.insert(cat.end(), b.begin(), b.end());
        REQUIRE(m.log_band_norm(cat, 0) <=
                m.log_band_norm(a, 0) + m.log_band_norm(b, 0) + 1e-12);
        REQUIRE(m.log_band_conorm(cat, 0) >=
                m.log_band_conorm(a, 0) + m.log_band_conorm(b, 0) - 1e-12);
      }
  }
  SECTION("long products stay finite through rescaling") {
    Word w(400, 0);
    for (std::size_t i = 1; i < w.size(); i += 2) w[i] = 1;
    const double v = m.log_band_norm(w, 0);
    REQUIRE(std::isfinite(v));
    REQUIRE(v > 0.0);
  }
}

TEST_CASE("stable log") {
  SECTION("constant 1/3, length 2") {
    REQUIRE_THAT(ternary_like().stable_log({0, 1}), WithinAbs(-2.0 * std::log(3.0), 1e-12));
  }
  SECTION("c0=1/2, c1=1/4, word 01") {
    auto m = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}), {{2.0}, {2.0}}, {0.5, 0.25});
    REQUIRE_THAT(m.stable_log({0, 1}), WithinAbs(-3.0 * std::log(2.0), 1e-12));
  }
  SECTION("matches per-symbol sum on longer admissible words") {
    auto m = rotation_cocycle();
    Word w{0, 1, 1, 0, 1, 0, 0, 1};
    double expect = 0.0;
    for (Symbol i : w) expect += std::log(i == 0 ? 1.0 / 3.0 : 1.0 / 5.0);
    REQUIRE_THAT(m.stable_log(w), WithinAbs(expect, 1e-12));
    REQUIRE(m.stable_log(w) < 0.0);
  }
}

TEST_CASE("model invariants") {
  SECTION("domination gap enforced, diagonal") {
    REQUIRE_THROWS_AS(HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1, 1}),
                                     {{2.0, 2.0}, {2.0, 2.0}}, {0.5, 0.5}),
                      SchemaError);
  }
  SECTION("expansion enforced") {
    REQUIRE_THROWS_AS(HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                     {{0.9}, {3.0}}, {0.5, 0.5}),
                      SchemaError);
  }
  SECTION("stable rate must contract") {
    REQUIRE_THROWS_AS(HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                     {{3.0}, {3.0}}, {1.0, 0.5}),
                      SchemaError);
  }
  SECTION("cocycle domination via singular values") {
    Eigen::MatrixXd strong = Eigen::Vector2d(4.0, 3.0).asDiagonal();
    Eigen::MatrixXd weak(1, 1);
    weak << 3.5;  // overlaps the strong band's smallest singular value
    REQUIRE_THROWS_AS(
        HorseshoeModel::cocycle_model(Subshift::full(2), BandStructure({2, 1}),
                       std::vector<std::vector<Eigen::MatrixXd>>{{strong, weak},
                                                                 {strong, weak}},
                       {0.5, 0.5}),
        SchemaError);
  }
  SECTION("domination gap holds on words") {
    auto m = two_band();
    for (const Word& w : admissible_words(m.shift(), 5))
      REQUIRE(m.log_band_norm(w, 1) < m.log_band_conorm(w, 0));
  }
  SECTION("expansion holds on words") {
    auto m = rotation_cocycle();
    for (const Word& w : admissible_words(m.shift(), 4))
      REQUIRE(m.log_band_conorm(w, 0) > 0.0);
  }
  SECTION("inadmissible words rejected") {
    auto m = HorseshoeModel::diagonal_model(Subshift::golden_mean(), BandStructure({1}),
                                            {{2.0}, {2.0}}, {0.5, 0.5});
    REQUIRE_THROWS_AS(m.band_norm({1, 1}, 0), std::invalid_argument);
  }
}
