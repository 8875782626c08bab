// Command-line front end: model loading, command dispatch, CSV emission with a
// JSON run manifest. Exit codes: 0 success, 2 schema/usage error, 3 resource
// cap exceeded.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bowendim/bowendim.hpp"

namespace {

using namespace bowendim;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct CsvOutput {
  std::string header;
  std::vector<std::string> rows;

  std::string body() const {
    std::string out = header + "\n";
    for (const auto& r : rows) out += r + "\n";
    return out;
  }
};

// write-then-rename so that failures never leave partial output files
void write_output(const std::string& path, const CsvOutput& csv, const std::string& command,
                  const nlohmann::json& params, double wall_ms) {
  const std::string body = csv.body();
  {
    const std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SchemaError("cannot write output file " + path);
    out << body;
    out.close();
    std::filesystem::rename(tmp, path);
  }
  nlohmann::json manifest;
  manifest["command"] = command;
  manifest["parameters"] = params;
  manifest["library_version"] = kVersion;
  manifest["wall_clock_ms"] = wall_ms;
  manifest["output_digest_fnv1a64"] = fnv1a(body);
  const std::string mtmp = path + ".manifest.json.tmp";
  std::ofstream mout(mtmp, std::ios::binary | std::ios::trunc);
  mout << manifest.dump(2) << "\n";
  mout.close();
  std::filesystem::rename(mtmp, path + ".manifest.json");
}

FamilyKind parse_kind(const std::string& s) {
  if (s == "psi") return FamilyKind::UnstableNorm;
  if (s == "psihat") return FamilyKind::UnstableConorm;
  if (s == "phi") return FamilyKind::Stable;
  throw SchemaError("unknown potential family: " + s);
}

LocallyConstantPotential load_table(const Subshift& shift, const std::string& table_file,
                                    bool zero, const Caps& caps) {
  if (zero || table_file.empty()) return LocallyConstantPotential::zero(shift, caps);
  std::ifstream in(table_file);
  if (!in) throw SchemaError("cannot open table file " + table_file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(table_file + ": " + e.what());
  }
  LocallyConstantPotential pot;
  pot.depth = j.at("depth").get<std::size_t>();
  pot.words = admissible_words(shift, pot.depth, caps);
  pot.values = j.at("values").get<std::vector<double>>();
  if (pot.values.size() != pot.words.size())
    throw SchemaError(table_file + ": values must list one entry per admissible depth-word "
                      "in lexicographic order (" + std::to_string(pot.words.size()) +
                      " expected)");
  return pot;
}

int run_pressure(const LoadedModel& lm, const std::string& family, double param,
                 std::size_t level, const std::string& method, std::size_t cylinder_n,
                 bool zero, const std::string& table_file, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  CsvOutput csv;
  csv.header = "potential,param,level,method,pressure";
  double value = 0.0;
  if (family == "table") {
    const auto pot = load_table(lm.model->shift(), table_file, zero, lm.caps);
    if (method == "exact")
      value = pressure_exact(lm.model->shift(), pot, lm.caps).value;
    else if (method == "cylinder")
      value = pressure_cylinder_sum(lm.model->shift(), pot, cylinder_n, lm.caps);
    else
      throw SchemaError("unknown method: " + method);
  } else {
    const FamilyKind kind = parse_kind(family);
    const FamilySpec spec{kind, param, kind != FamilyKind::Stable};
    if (method == "exact") {
      value = pressure_power(*lm.model, spec, level, lm.caps);
    } else if (method == "cylinder") {
      const auto pot = as_locally_constant(*lm.model, spec, level, lm.caps);
      value = pressure_cylinder_sum(lm.model->shift(), pot, std::max(cylinder_n, level),
                                    lm.caps) / static_cast<double>(level);
    } else {
      throw SchemaError("unknown method: " + method);
    }
  }
  csv.rows.push_back(family + "," + fmt(param) + "," + std::to_string(level) + "," + method +
                     "," + fmt(value));
  std::cout << "pressure " << fmt(value) << "\n";
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0).count();
  if (!out_path.empty()) {
    nlohmann::json params{{"model", lm.name},     {"potential", family},
                          {"param", param},       {"level", level},
                          {"method", method},     {"cylinder_n", cylinder_n},
                          {"zero", zero},         {"table_file", table_file}};
    write_output(out_path, csv, "pressure", params, ms);
  }
  return 0;
}

int run_root(const LoadedModel& lm, const std::string& family, std::size_t levels_k,
             double tol, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const FamilyKind kind = parse_kind(family);
  const auto seq = root_sequence(*lm.model, kind, levels_k, tol, lm.caps);
  CsvOutput csv;
  csv.header = "level,root,residual,bracket_lo,bracket_hi,iterations,clamped,boundary_zero";
  for (const auto& r : seq) {
    csv.rows.push_back(std::to_string(r.level) + "," + fmt(r.root) + "," + fmt(r.residual) +
                       "," + fmt(r.bracket_lo) + "," + fmt(r.bracket_hi) + "," +
                       std::to_string(r.iterations) + "," +
                       (r.clamped_upper ? "1" : "0") + "," + (r.boundary_zero ? "1" : "0"));
    std::cout << "level " << r.level << " root " << fmt(r.root)
              << (r.clamped_upper ? " (clamped)" : "") << "\n";
  }
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0).count();
  if (!out_path.empty()) {
    nlohmann::json params{
        {"model", lm.name}, {"family", family}, {"levels", levels_k}, {"tol", tol}};
    write_output(out_path, csv, "root", params, ms);
  }
  return 0;
}

const GeometricRealization& need_realization(const LoadedModel& lm) {
  if (!lm.realization)
    throw SchemaError(lm.name + ": this command needs a \"placement\" block in the model file");
  return *lm.realization;
}

int run_dimension(const LoadedModel& lm, const std::string& experiment, std::size_t levels_k,
                  double eps_slack, const std::vector<std::size_t>& blocks,
                  const std::vector<double>& eps_grid, std::size_t depth,
                  const std::string& which_set, int delta_lo, int delta_hi,
                  const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  CsvOutput csv;
  std::ostringstream summary;
  if (experiment == "bracket") {
    csv.header = "level,eps_slack,t,t_prime,lower,upper,lower_slack,upper_slack,"
                 "slope_min,slope_max,slopes_inside";
    BracketRow last;
    for (std::size_t k = 0; k <= levels_k; ++k) {
      const auto row =
          product_bracket(*lm.model, need_realization(lm), k, eps_slack, lm.root_tol, lm.caps);
      csv.rows.push_back(std::to_string(row.level) + "," + fmt(row.eps_slack) + "," +
                         fmt(row.t) + "," + fmt(row.t_prime) + "," + fmt(row.lower) + "," +
                         fmt(row.upper) + "," + fmt(row.lower_slack) + "," +
                         fmt(row.upper_slack) + "," + fmt(row.slope_min) + "," +
                         fmt(row.slope_max) + "," + (row.slopes_inside ? "1" : "0"));
      last = row;
    }
    summary << "bracket [" << fmt(last.lower) << ", " << fmt(last.upper) << "] (slack ["
            << fmt(last.lower_slack) << ", " << fmt(last.upper_slack) << "])";
  } else if (experiment == "box") {
    RealizedSet set = RealizedSet::UnstableSlice;
    if (which_set == "stable") set = RealizedSet::StableSlice;
    else if (which_set == "full") set = RealizedSet::Full;
    else if (which_set != "unstable") throw SchemaError("unknown set: " + which_set);
    std::vector<double> deltas;
    for (int k = delta_lo; k <= delta_hi; ++k) deltas.push_back(std::pow(2.0, -k));
    const auto res = box_counting(need_realization(lm), set, depth, deltas, lm.caps);
    csv.header = "delta,boxes,slope,r2";
    for (const auto& p : res.table)
      csv.rows.push_back(fmt(p.delta) + "," + std::to_string(p.boxes) + "," +
                         fmt(res.fit.slope) + "," + fmt(res.fit.r2));
    summary << "box dimension estimate " << fmt(res.fit.slope) << " (r2 " << fmt(res.fit.r2)
            << ")";
  } else if (experiment == "young") {
    const auto mu =
        equilibrium_measure(lm.model->shift(),
                            LocallyConstantPotential::zero(lm.model->shift(), lm.caps), lm.caps);
    const auto rep = young_formula_check(need_realization(lm), mu, lm.caps);
    csv.header = "empirical,target,residual,entropy,lambda_u,lambda_s";
    csv.rows.push_back(fmt(rep.empirical) + "," + fmt(rep.target) + "," + fmt(rep.residual) +
                       "," + fmt(rep.entropy) + "," + fmt(rep.lambda_u) + "," +
                       fmt(rep.lambda_s));
    summary << "dimension of the measure: empirical " << fmt(rep.empirical) << ", target "
            << fmt(rep.target) << ", residual " << fmt(rep.residual);
  } else if (experiment == "mcm") {
    const auto rep = mcm_roots_check(*lm.model, need_realization(lm), depth, lm.caps);
    csv.header = "t_u,t_s,box_u,box_s,residual_u,residual_s";
    csv.rows.push_back(fmt(rep.t_u) + "," + fmt(rep.t_s) + "," + fmt(rep.box_u) + "," +
                       fmt(rep.box_s) + "," + fmt(rep.box_residual_u) + "," +
                       fmt(rep.box_residual_s));
    summary << "slice roots " << fmt(rep.t_u) << " / " << fmt(rep.t_s)
            << " vs box counts " << fmt(rep.box_u) << " / " << fmt(rep.box_s);
  } else if (experiment == "theoremB") {
    const auto rep = dimension_limit_experiment(*lm.model, blocks, eps_grid, eps_slack,
                                                lm.root_tol, lm.caps);
    csv.header = "blocks,eps,t,t_prime,lower,upper,lower_slack,upper_slack,"
                 "family_entropy,retained_fraction,gap,target";
    for (const auto& row : rep.rows)
      csv.rows.push_back(std::to_string(row.block_len) + "," + fmt(row.eps) + "," +
                         fmt(row.t) + "," + fmt(row.t_prime) + "," + fmt(row.lower) + "," +
                         fmt(row.upper) + "," + fmt(row.lower_slack) + "," +
                         fmt(row.upper_slack) + "," + fmt(row.family_entropy) + "," +
                         fmt(row.retained_fraction) + "," + fmt(row.gap) + "," +
                         fmt(rep.target));
    const auto& last = rep.rows.back();
    summary << "target " << fmt(rep.target) << ", final bracket [" << fmt(last.lower) << ", "
            << fmt(last.upper) << "], gap " << fmt(last.gap);
  } else {
    throw SchemaError("unknown experiment: " + experiment);
  }
  std::cout << summary.str() << "\n";
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0).count();
  if (!out_path.empty()) {
    nlohmann::json params{{"model", lm.name},       {"experiment", experiment},
                          {"levels", levels_k},     {"eps_slack", eps_slack},
                          {"blocks", blocks},       {"eps_grid", eps_grid},
                          {"depth", depth},         {"set", which_set},
                          {"delta_lo", delta_lo},   {"delta_hi", delta_hi},
                          {"tol", lm.root_tol}};
    write_output(out_path, csv, "dimension", params, ms);
  }
  return 0;
}

int run_verify(const LoadedModel& lm, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  CsvOutput csv;
  csv.header = "check,value,threshold,pass";
  bool all_pass = true;
  auto emit = [&](const std::string& name, double value, double threshold, bool pass) {
    csv.rows.push_back(name + "," + fmt(value) + "," + fmt(threshold) + "," +
                       (pass ? "1" : "0"));
    std::cout << (pass ? "PASS " : "FAIL ") << name << " = " << fmt(value) << "\n";
    all_pass = all_pass && pass;
  };
  const auto& model = *lm.model;
  const auto& shift = model.shift();

  // domination and expansion sampled on words
  {
    double worst_gap = std::numeric_limits<double>::infinity();
    double worst_expansion = std::numeric_limits<double>::infinity();
    for (const Word& w : admissible_words(shift, 4, lm.caps)) {
      const std::size_t nb = model.bands().band_count();
      for (std::size_t jb = 0; jb + 1 < nb; ++jb)
        worst_gap = std::min(worst_gap, model.log_band_conorm(w, jb) -
                                            model.log_band_norm(w, jb + 1));
      worst_expansion = std::min(worst_expansion, model.log_band_conorm(w, nb - 1));
    }
    if (model.bands().band_count() > 1)
      emit("domination_gap", worst_gap, 0.0, worst_gap > 0.0);
    emit("expansion", worst_expansion, 0.0, worst_expansion > 0.0);
  }

  // equilibrium machinery on the zero potential
  const auto zero = LocallyConstantPotential::zero(shift, lm.caps);
  const auto mu0 = equilibrium_measure(shift, zero, lm.caps);
  {
    const double attain =
        std::abs(entropy(mu0) + expected_potential(shift, mu0, zero) - mu0.pressure);
    emit("variational_attainment", attain, 1e-9, attain <= 1e-9);
    double worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 5; ++k) {
      const auto nu = tilt_measure(mu0, 0.35, k);
      worst_margin = std::min(
          worst_margin, mu0.pressure - (entropy(nu) + expected_potential(shift, nu, zero)));
    }
    emit("variational_margin_tilted", worst_margin, 0.0, worst_margin > 0.0);
  }
  {
    const auto cert = gibbs_certificate(shift, mu0, zero, mu0.pressure, 12, lm.caps);
    const auto r8 = std::find_if(cert.rows.begin(), cert.rows.end(),
                                 [](const CertificateRow& r) { return r.n == 8; });
    const double drift = std::abs((cert.rows.back().c_max / cert.rows.back().c_min) /
                                      (r8->c_max / r8->c_min) - 1.0);
    emit("gibbs_ratio_drift_8_12", drift, 0.01, drift < 0.01 && cert.stable);
    const auto ucert = u_gibbs_certificate(shift, mu0, zero, mu0.pressure, 12, lm.caps);
    const auto u8 = std::find_if(ucert.rows.begin(), ucert.rows.end(),
                                 [](const CertificateRow& r) { return r.n == 8; });
    const double udrift = std::abs((ucert.rows.back().c_max / ucert.rows.back().c_min) /
                                       (u8->c_max / u8->c_min) - 1.0);
    emit("u_gibbs_ratio_drift_8_12", udrift, 0.01, udrift < 0.01);
  }
  if (model.diagonal()) {
    const auto rep = pesin_check(model, lm.caps);
    emit("pesin_variational_residual", rep.variational_residual, 1e-9,
         rep.variational_residual <= 1e-9);
    // escape-rate defect: zero exactly on volume-balanced models, reported always
    emit("pesin_escape_defect", rep.formula_defect, 1e-9, true);
  }
  {
    const double res = stable_root_identity_residual(model, 1, lm.root_tol, lm.caps);
    emit("stable_root_identity", res, 1e-9, res <= 1e-9);
  }
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0).count();
  if (!out_path.empty()) {
    nlohmann::json params{{"model", lm.name}};
    write_output(out_path, csv, "verify", params, ms);
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topological pressure, Bowen roots, Gibbs certificates and dimension "
               "brackets for linear horseshoe models"};
  app.require_subcommand(1);

  std::string model_path, out_path;

  auto* pressure = app.add_subcommand("pressure", "pressure of a potential");
  std::string family = "table", method = "exact", table_file;
  double param = 0.0;
  std::size_t level = 1, cylinder_n = 8;
  bool zero = false;
  pressure->add_option("model", model_path, "model file")->required();
  pressure->add_option("--potential", family, "psi|psihat|phi|table (psi/psihat enter "
                       "negated, as in Bowen's equation)")->required();
  pressure->add_option("--param", param, "family parameter (s, t or t')");
  pressure->add_option("--level", level, "power level N");
  pressure->add_option("--method", method, "exact|cylinder");
  pressure->add_option("--cylinder-n", cylinder_n, "word length for method=cylinder");
  pressure->add_flag("--zero", zero, "use the zero potential (with --potential table)");
  pressure->add_option("--table-file", table_file, "JSON potential table");
  pressure->add_option("--out", out_path, "CSV output file (plus .manifest.json sidecar)");

  auto* root = app.add_subcommand("root", "Bowen-equation root sequence");
  std::string rfamily = "psi";
  std::size_t levels_k = 3;
  double tol = -1.0;
  root->add_option("model", model_path, "model file")->required();
  root->add_option("--family", rfamily, "psi|psihat|phi");
  root->add_option("--levels", levels_k, "K: levels 2^0 .. 2^K");
  root->add_option("--tol", tol, "bisection tolerance");
  root->add_option("--out", out_path, "CSV output file");

  auto* dimension = app.add_subcommand("dimension", "dimension experiments");
  std::string experiment, which_set = "unstable";
  double eps_slack = 0.05;
  std::vector<std::size_t> blocks{8, 10, 12};
  std::vector<double> eps_grid{0.1, 0.05};
  std::size_t depth = 40;
  int delta_lo = 4, delta_hi = 10;
  dimension->add_option("model", model_path, "model file")->required();
  dimension->add_option("--experiment", experiment, "bracket|box|young|mcm|theoremB")
      ->required();
  dimension->add_option("--levels", levels_k, "K for the bracket experiment");
  dimension->add_option("--eps-slack", eps_slack, "slack in the reported bracket");
  dimension->add_option("--blocks", blocks, "block lengths for theoremB");
  dimension->add_option("--eps", eps_grid, "typicality tolerances for theoremB");
  dimension->add_option("--depth", depth, "max subdivision depth for box counting");
  dimension->add_option("--set", which_set, "unstable|stable|full (box experiment)");
  dimension->add_option("--delta-lo", delta_lo, "smallest grid exponent: delta = 2^-k");
  dimension->add_option("--delta-hi", delta_hi, "largest grid exponent");
  dimension->add_option("--out", out_path, "CSV output file");

  auto* verify = app.add_subcommand("verify", "run every certificate on the model");
  verify->add_option("model", model_path, "model file")->required();
  verify->add_option("--out", out_path, "CSV output file");

  try {
    app.parse(argc, argv);
    thread_budget();  // validates BOWENDIM_THREADS
    LoadedModel lm = load_model_file(model_path);
    if (tol <= 0.0) tol = lm.root_tol;
    if (pressure->parsed())
      return run_pressure(lm, family, param, level, method, cylinder_n, zero, table_file,
                          out_path);
    if (root->parsed()) return run_root(lm, rfamily, levels_k, tol, out_path);
    if (dimension->parsed())
      return run_dimension(lm, experiment, levels_k, eps_slack, blocks, eps_grid, depth,
                           which_set, delta_lo, delta_hi, out_path);
    if (verify->parsed()) return run_verify(lm, out_path);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const CapExceeded& e) {
    std::cerr << "resource cap exceeded: " << e.what() << "\n";
    return 3;
  } catch (const CountOverflow& e) {
    std::cerr << "count overflow: " << e.what() << "\n";
    return 3;
  } catch (const SchemaError& e) {
    std::cerr << "model/usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
