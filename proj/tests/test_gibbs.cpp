#include <catch2/catch_amalgamated.hpp>

#include "bowendim/bowen.hpp"
#include "bowendim/gibbs.hpp"

using namespace bowendim;
using Catch::Matchers::WithinAbs;

namespace {

const double kPhi = 0.5 * (1.0 + std::sqrt(5.0));

LocallyConstantPotential log_prob_potential(const Subshift& s, double p0) {
  return LocallyConstantPotential::from_function(
      s, 1, [p0](const Word& w) { return std::log(w[0] == 0 ? p0 : 1.0 - p0); });
}

}  // namespace

TEST_CASE("equilibrium measures") {
  auto full2 = Subshift::full(2);
  SECTION("zero potential gives the measure of maximal entropy") {
    auto mu = equilibrium_measure(full2, LocallyConstantPotential::zero(full2));
    REQUIRE(mu.states.size() == 2);
    REQUIRE_THAT(mu.p[0], WithinAbs(0.5, 1e-12));
    for (std::size_t e = 0; e < mu.q.size(); ++e)
      REQUIRE_THAT(mu.q[e], WithinAbs(0.5, 1e-12));
  }
  SECTION("zero potential on the golden mean gives the Parry measure") {
    auto gm = Subshift::golden_mean();
    auto mu = equilibrium_measure(gm, LocallyConstantPotential::zero(gm));
    REQUIRE_THAT(mu.step(0, 0), WithinAbs(1.0 / kPhi, 1e-10));
    REQUIRE_THAT(mu.step(0, 1), WithinAbs(1.0 / (kPhi * kPhi), 1e-10));
    REQUIRE_THAT(mu.step(1, 0), WithinAbs(1.0, 1e-10));
    const double phi2 = kPhi * kPhi;
    REQUIRE_THAT(mu.p[0], WithinAbs(phi2 / (1.0 + phi2), 1e-10));
  }
  SECTION("log-probability potential gives the Bernoulli measure") {
    auto mu = equilibrium_measure(full2, log_prob_potential(full2, 0.3));
    REQUIRE_THAT(mu.p[0], WithinAbs(0.3, 1e-12));
    REQUIRE_THAT(mu.step(1, 0), WithinAbs(0.3, 1e-12));
    REQUIRE_THAT(mu.step(0, 1), WithinAbs(0.7, 1e-12));
  }
  SECTION("row sums and stationarity hold to 1e-12") {
    auto gm = Subshift::golden_mean();
    auto pot = LocallyConstantPotential::from_function(gm, 2, [](const Word& w) {
      return 0.4 * w[0] - 0.9 * w[1];
    });
    auto mu = equilibrium_measure(gm, pot);
    for (std::size_t i = 0; i < mu.states.size(); ++i) {
      double row = 0.0;
      for (std::uint32_t e = mu.row_ptr[i]; e < mu.row_ptr[i + 1]; ++e) row += mu.q[e];
      REQUIRE_THAT(row, WithinAbs(1.0, 1e-12));
    }
    std::vector<double> image(mu.states.size(), 0.0);
    for (std::size_t i = 0; i < mu.states.size(); ++i)
      for (std::uint32_t e = mu.row_ptr[i]; e < mu.row_ptr[i + 1]; ++e)
        image[mu.col[e]] += mu.p[i] * mu.q[e];
    for (std::size_t i = 0; i < mu.states.size(); ++i) {
      REQUIRE_THAT(image[i], WithinAbs(mu.p[i], 1e-12));
      REQUIRE(mu.p[i] > 0.0);
    }
  }
}

TEST_CASE("cylinder masses") {
  auto full2 = Subshift::full(2);
  auto gm = Subshift::golden_mean();
  SECTION("max entropy masses are 2^-n") {
    auto mu = equilibrium_measure(full2, LocallyConstantPotential::zero(full2));
    REQUIRE_THAT(cylinder_mass(full2, mu, {0, 1, 1, 0}), WithinAbs(1.0 / 16.0, 1e-12));
  }
  SECTION("Parry mass of 00") {
    auto mu = equilibrium_measure(gm, LocallyConstantPotential::zero(gm));
    REQUIRE_THAT(cylinder_mass(gm, mu, {0, 0}), WithinAbs(mu.p[0] / kPhi, 1e-12));
  }
  SECTION("inadmissible word has zero mass") {
    auto mu = equilibrium_measure(gm, LocallyConstantPotential::zero(gm));
    REQUIRE(cylinder_mass(gm, mu, {1, 1}) == 0.0);
  }
  SECTION("masses of n-words sum to one") {
    auto pot = LocallyConstantPotential::from_function(gm, 2, [](const Word& w) {
      return -0.3 * w[0] + 0.8 * w[1];
    });
    auto mu = equilibrium_measure(gm, pot);
    for (std::size_t n = 1; n <= 12; ++n) {
      double total = 0.0;
      for (const auto& w : admissible_words(gm, n)) total += cylinder_mass(gm, mu, w);
      REQUIRE_THAT(total, WithinAbs(1.0, 1e-10));
    }
  }
}

TEST_CASE("entropy") {
  auto full2 = Subshift::full(2);
  SECTION("max entropy is log 2") {
    auto mu = equilibrium_measure(full2, LocallyConstantPotential::zero(full2));
    REQUIRE_THAT(entropy(mu), WithinAbs(std::log(2.0), 1e-12));
  }
  SECTION("Bernoulli(0.3, 0.7)") {
    auto mu = equilibrium_measure(full2, log_prob_potential(full2, 0.3));
    REQUIRE_THAT(entropy(mu), WithinAbs(0.6108643020548935, 1e-12));
  }
  SECTION("single loop has zero entropy") {
    auto one = Subshift::full(1);
    auto mu = equilibrium_measure(one, LocallyConstantPotential::zero(one));
    REQUIRE(entropy(mu) == 0.0);
  }
}

TEST_CASE("variational principle") {
  auto gm = Subshift::golden_mean();
  auto pot = LocallyConstantPotential::from_function(gm, 1, [](const Word& w) {
    return w[0] == 0 ? 0.25 : -0.55;
  });
  const double P = pressure_exact(gm, pot).value;
  auto mu = equilibrium_measure(gm, pot);
  SECTION("attained at the equilibrium") {
    REQUIRE_THAT(entropy(mu) + expected_potential(gm, mu, pot), WithinAbs(P, 1e-9));
  }
  SECTION("strict inequality at tilted measures") {
    for (std::size_t k = 0; k < 5; ++k) {
      auto nu = tilt_measure(mu, 0.35, k);
      const double lhs = entropy(nu) + expected_potential(gm, nu, pot);
      REQUIRE(lhs < P - 1e-6);
    }
  }
}

TEST_CASE("gibbs certificate") {
  auto full2 = Subshift::full(2);
  auto gm = Subshift::golden_mean();
  SECTION("Bernoulli equilibrium is exactly Gibbs") {
    auto pot = log_prob_potential(full2, 0.3);
    auto mu = equilibrium_measure(full2, pot);
    auto cert = gibbs_certificate(full2, mu, pot, mu.pressure, 10);
    for (const auto& row : cert.rows) {
      REQUIRE_THAT(row.c_min, WithinAbs(1.0, 1e-9));
      REQUIRE_THAT(row.c_max, WithinAbs(1.0, 1e-9));
    }
    REQUIRE(cert.stable);
  }
  SECTION("Parry measure: bounded ratio, stable in n") {
    auto mu = equilibrium_measure(gm, LocallyConstantPotential::zero(gm));
    auto cert = gibbs_certificate(gm, mu, LocallyConstantPotential::zero(gm), mu.pressure, 12);
    const auto& r8 = *std::find_if(cert.rows.begin(), cert.rows.end(),
                                   [](const CertificateRow& r) { return r.n == 8; });
    const auto& r12 = cert.rows.back();
    REQUIRE(r12.n == 12);
    const double band8 = r8.c_max / r8.c_min, band12 = r12.c_max / r12.c_min;
    REQUIRE(std::abs(band12 / band8 - 1.0) < 0.01);
    REQUIRE(cert.stable);
  }
  SECTION("wrong pressure is flagged") {
    auto mu = equilibrium_measure(gm, LocallyConstantPotential::zero(gm));
    auto cert =
        gibbs_certificate(gm, mu, LocallyConstantPotential::zero(gm), mu.pressure + 0.01, 12);
    REQUIRE_FALSE(cert.stable);
  }
}

TEST_CASE("u-gibbs certificate") {
  auto full2 = Subshift::full(2);
  auto gm = Subshift::golden_mean();
  SECTION("Bernoulli conditional ratio is one") {
    auto pot = log_prob_potential(full2, 0.3);
    auto mu = equilibrium_measure(full2, pot);
    auto cert = u_gibbs_certificate(full2, mu, pot, mu.pressure, 10);
    for (const auto& row : cert.rows) {
      REQUIRE_THAT(row.c_min, WithinAbs(1.0, 1e-9));
      REQUIRE_THAT(row.c_max, WithinAbs(1.0, 1e-9));
    }
  }
  SECTION("Parry measure: finite stable ratio") {
    auto mu = equilibrium_measure(gm, LocallyConstantPotential::zero(gm));
    auto cert = u_gibbs_certificate(gm, mu, LocallyConstantPotential::zero(gm), mu.pressure, 12);
    const auto& first = cert.rows.front();
    const auto& last = cert.rows.back();
    REQUIRE(std::abs((last.c_max / last.c_min) / (first.c_max / first.c_min) - 1.0) < 0.01);
  }
  SECTION("forward masses depend only on the conditioning state") {
    auto pot = LocallyConstantPotential::from_function(gm, 2, [](const Word& w) {
      return 0.2 * w[0] - 0.5 * w[1];
    });
    auto mu = equilibrium_measure(gm, pot);
    // two pasts ending in the same symbol give the same conditional forward mass
    for (const Word& future : admissible_words(gm, 4)) {
      if (future.front() != 0) continue;
      Word pa{1, 0}, pb{0, 0};  // both end at state 0
      Word a = pa, b = pb;
      a.insert(a.end(), future.begin() + 1, future.end());
      b.insert(b.end(), future.begin() + 1, future.end());
      const double ca = cylinder_mass(gm, mu, a) / cylinder_mass(gm, mu, pa);
      const double cb = cylinder_mass(gm, mu, b) / cylinder_mass(gm, mu, pb);
      REQUIRE_THAT(ca, WithinAbs(cb, 1e-12));
    }
  }
}

TEST_CASE("lyapunov exponents") {
  SECTION("constant rate is exact under any measure") {
    auto m = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                            {{4.0}, {4.0}}, {0.5, 0.5});
    auto mu = equilibrium_measure(m.shift(), log_prob_potential(m.shift(), 0.3));
    auto rep = lyapunov_exponents(m, mu);
    REQUIRE_THAT(rep.band_exponents[0], WithinAbs(std::log(4.0), 1e-12));
  }
  SECTION("Bernoulli(1/2) over rates {2, 8}") {
    auto m = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                            {{2.0}, {8.0}}, {0.5, 0.5});
    auto mu = equilibrium_measure(m.shift(), LocallyConstantPotential::zero(m.shift()));
    auto rep = lyapunov_exponents(m, mu);
    REQUIRE_THAT(rep.band_exponents[0], WithinAbs(2.0 * std::log(2.0), 1e-12));
  }
  SECTION("stable exponent of constant 1/3") {
    auto m = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                            {{3.0}, {3.0}}, {1.0 / 3.0, 1.0 / 3.0});
    auto mu = equilibrium_measure(m.shift(), LocallyConstantPotential::zero(m.shift()));
    auto rep = lyapunov_exponents(m, mu);
    REQUIRE_THAT(rep.stable_exponent, WithinAbs(-std::log(3.0), 1e-12));
  }
  SECTION("cocycle upper sequence is monotone and brackets the lower one") {
    Eigen::MatrixXd b0 = Eigen::Vector2d(4.0, 2.0).asDiagonal();
    Eigen::MatrixXd b1(2, 2);
    const double c = std::cos(M_PI / 4.0), sn = std::sin(M_PI / 4.0);
    b1 << c, -sn, sn, c;
    b1 = b1 * b0;
    auto m = HorseshoeModel::cocycle_model(Subshift::full(2), BandStructure({2}),
                                           {{b0}, {b1}}, {0.5, 0.5});
    auto mu = equilibrium_measure(m.shift(), LocallyConstantPotential::zero(m.shift()));
    auto rep = lyapunov_exponents(m, mu, 8);
    REQUIRE(rep.kingman_monotone);
    for (std::size_t t = 0; t < rep.levels.size(); ++t)
      REQUIRE(rep.lower_trace[0][t] <= rep.upper_trace[0][t] + 1e-12);
  }
}

TEST_CASE("pesin balance") {
  SECTION("rate-2 full shift balances exactly") {
    auto m = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                            {{2.0}, {2.0}}, {0.5, 0.5});
    auto rep = pesin_check(m);
    REQUIRE_THAT(rep.variational_residual, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(rep.formula_defect, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(rep.entropy, WithinAbs(std::log(2.0), 1e-12));
  }
  SECTION("rates {2,8}: attainment holds, defect equals the escape rate") {
    auto m = HorseshoeModel::diagonal_model(Subshift::full(2), BandStructure({1}),
                                            {{2.0}, {8.0}}, {0.5, 0.5});
    auto rep = pesin_check(m);
    REQUIRE_THAT(rep.variational_residual, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(rep.formula_defect, WithinAbs(std::abs(std::log(0.5 + 0.125)), 1e-9));
  }
  SECTION("golden-mean model: attainment holds") {
    auto m = HorseshoeModel::diagonal_model(Subshift::golden_mean(), BandStructure({1}),
                                            {{2.0}, {2.0}}, {0.5, 0.5});
    auto rep = pesin_check(m);
    REQUIRE_THAT(rep.variational_residual, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(rep.formula_defect, WithinAbs(std::abs(rep.pressure), 1e-12));
  }
  SECTION("volume-balanced two-band model satisfies the entropy formula") {
    // 16 symbols, rates 8 and 2: cell volumes 16 * 1/16 = 1
    std::vector<std::vector<double>> rates(16, {8.0, 2.0});
    std::vector<double> stable(16, 1.0 / 16.0);
    auto m = HorseshoeModel::diagonal_model(Subshift::full(16), BandStructure({1, 1}),
                                            rates, stable);
    auto rep = pesin_check(m);
    REQUIRE_THAT(rep.formula_defect, WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(rep.entropy, WithinAbs(std::log(16.0), 1e-10));
  }
}
