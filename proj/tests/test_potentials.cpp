#include <catch2/catch_amalgamated.hpp>

#include "bowendim/potentials.hpp"

using namespace bowendim;
using Catch::Matchers::WithinAbs;

namespace {

HorseshoeModel two_band_42() {
  return HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1, 1}),
                        {{4.0, 2.0}, {4.0, 2.0}}, {0.5, 0.5});
}

HorseshoeModel mixed_rates() {
  // two-valued rates per band, still dominated
  return HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1, 1}),
                        {{8.0, 2.0}, {10.0, 2.5}}, {0.5, 0.25});
}

HorseshoeModel rotation_cocycle() {
  Eigen::MatrixXd b0 = Eigen::Vector2d(4.0, 2.0).asDiagonal();
  Eigen::MatrixXd b1(2, 2);
  const double c = std::cos(M_PI / 4.0), s = std::sin(M_PI / 4.0);
  b1 << c, -s, s, c;
  b1 = b1 * b0;
  return HorseshoeModel::cocycle_model(Subshift::full(2), BandStructure({2}),
                        std::vector<std::vector<Eigen::MatrixXd>>{{b0}, {b1}},
                        {1.0 / 3.0, 1.0 / 5.0});
}

}  // namespace

TEST_CASE("psi") {
  auto m = two_band_42();
  SECTION("zero parameter gives zero") {
    REQUIRE(psi(m, Word{0, 1, 1}, 0.0) == 0.0);
  }
  SECTION("single band, rate 3: n log 3 at s=1") {
    auto c3 = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                             {{3.0}, {3.0}}, {0.5, 0.5});
    REQUIRE_THAT(psi(c3, Word{0, 1, 0, 1, 1}, 1.0), WithinAbs(5.0 * std::log(3.0), 1e-12));
  }
  SECTION("interpolation between bands: s = 1.5") {
    REQUIRE_THAT(psi(m, Word{0}, 1.5),
                 WithinAbs(std::log(4.0) + 0.5 * std::log(2.0), 1e-12));
  }
  SECTION("s = u uses all bands with full multiplicity") {
    REQUIRE_THAT(psi(m, Word{0}, 2.0), WithinAbs(std::log(4.0) + std::log(2.0), 1e-12));
  }
  SECTION("parameter out of range") {
    REQUIRE_THROWS_AS(psi(m, Word{0}, -0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(psi(m, Word{0}, 2.1), std::invalid_argument);
  }
}

TEST_CASE("psi_hat") {
  auto m = two_band_42();
  SECTION("zero parameter gives zero") {
    REQUIRE(psi_hat(m, Word{1, 0}, 0.0) == 0.0);
  }
  SECTION("bands consumed weakest first: t = 1.5") {
    REQUIRE_THAT(psi_hat(m, Word{0}, 1.5),
                 WithinAbs(std::log(2.0) + 0.5 * std::log(4.0), 1e-12));
  }
  SECTION("diagonal models: psi_hat = psi at the top parameter") {
    auto mm = mixed_rates();
    for (const Word& w : admissible_words(mm.shift(), 3))
      REQUIRE_THAT(psi_hat(mm, w, 2.0), WithinAbs(psi(mm, w, 2.0), 1e-12));
  }
  SECTION("single band constant 3: equals psi at t=1") {
    auto c3 = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                             {{3.0}, {3.0}}, {0.5, 0.5});
    Word w{0, 1, 0};
    REQUIRE_THAT(psi_hat(c3, w, 1.0), WithinAbs(psi(c3, w, 1.0), 1e-12));
  }
}

TEST_CASE("phi") {
  auto m = two_band_42();
  SECTION("t'=0 gives zero") { REQUIRE(phi(m, Word{0, 1}, 0.0) == 0.0); }
  SECTION("constant 1/3 at t'=1") {
    auto c3 = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                             {{3.0}, {3.0}}, {1.0 / 3.0, 1.0 / 3.0});
    REQUIRE_THAT(phi(c3, Word{0, 1, 1, 0}, 1.0), WithinAbs(-4.0 * std::log(3.0), 1e-12));
  }
  SECTION("t'=0.5 is half the stable log") {
    auto mm = mixed_rates();
    Word w{1, 0, 0, 1, 1};
    REQUIRE_THAT(phi(mm, w, 0.5), WithinAbs(0.5 * mm.stable_log(w), 1e-12));
    REQUIRE(phi(mm, w, 0.5) <= 0.0);
  }
}

TEST_CASE("parameter monotonicity and breakpoints") {
  auto m = mixed_rates();
  SECTION("strictly increasing in s") {
    Word w{0, 1, 1};
    double prev = -1.0;
    for (double s = 0.1; s <= 2.0; s += 0.1) {
      const double v = psi(m, w, s);
      REQUIRE(v > prev);
      prev = v;
    }
  }
  SECTION("the two branch formulas agree at breakpoints") {
    // value at r_1 from the left-branch limit vs the right-branch formula
    Word w{0, 1};
    auto data = word_band_data(m, w);
    const double at = psi(m, data, 1.0);
    const double left_limit = psi(m, data, 1.0 - 1e-13);
    REQUIRE_THAT(at, WithinAbs(left_limit, 1e-10));
    const double manual = 1.0 * data.log_norm[0];  // d=1 branch at s=r_1: sum of band 1 only
    REQUIRE_THAT(at, WithinAbs(manual, 1e-12));
  }
  SECTION("piecewise-linear: linear within each band interval") {
    Word w{1, 0, 1};
    auto data = word_band_data(m, w);
    const double a = psi(m, data, 0.2), b = psi(m, data, 0.4), c = psi(m, data, 0.6);
    REQUIRE_THAT(b - a, WithinAbs(c - b, 1e-12));
  }
}

TEST_CASE("subadditivity of psi along concatenation") {
  auto m = rotation_cocycle();
  std::vector<Word> words = {{0}, {1}, {0, 1}, {1, 0}, {1, 1}, {0, 0, 1}};
  for (double s : {0.5, 1.0, 1.7}) {
    for (const Word& a : words)
      for (const Word& b : words) {
        Word cat = a;
        cat.insert(cat.end(), b.begin(), b.end());
        REQUIRE(psi(m, cat, s) <= psi(m, a, s) + psi(m, b, s) + 1e-12);
        REQUIRE(psi_hat(m, cat, s) >= psi_hat(m, a, s) + psi_hat(m, b, s) - 1e-12);
      }
  }
  SECTION("equality for diagonal models") {
    auto mm = mixed_rates();
    Word a{0, 1}, b{1, 0};
    Word cat{0, 1, 1, 0};
    for (double s : {0.3, 1.2, 2.0})
      REQUIRE_THAT(psi(mm, cat, s), WithinAbs(psi(mm, a, s) + psi(mm, b, s), 1e-12));
  }
}

TEST_CASE("as_locally_constant") {
  auto m = mixed_rates();
  SECTION("depth-1 table of psi^u reads the rates") {
    auto pot = as_locally_constant(m, FamilySpec{FamilyKind::UnstableNorm, 2.0, false}, 1);
    REQUIRE(pot.words.size() == 2);
    REQUIRE_THAT(pot.values[0], WithinAbs(std::log(8.0) + std::log(2.0), 1e-12));
    REQUIRE_THAT(pot.values[1], WithinAbs(std::log(10.0) + std::log(2.5), 1e-12));
  }
  SECTION("row count at depth 2") {
    auto pot = as_locally_constant(m, FamilySpec{FamilyKind::Stable, 1.0, false}, 2);
    REQUIRE(pot.words.size() == count_words(m.shift(), 2));
  }
  SECTION("table values match direct evaluation") {
    auto cm = rotation_cocycle();
    FamilySpec spec{FamilyKind::UnstableNorm, 1.3, true};
    auto pot = as_locally_constant(cm, spec, 3);
    for (std::size_t k = 0; k < pot.words.size(); ++k)
      REQUIRE_THAT(pot.values[k], WithinAbs(family_value(cm, pot.words[k], spec), 1e-12));
  }
}
