#pragma once

#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bowendim/common.hpp"
#include "bowendim/model.hpp"
#include "bowendim/realization.hpp"

namespace bowendim {

constexpr const char* kModelSchema = "bowendim-model/1";

// A model file bundled with its optional placement and per-file settings.
// The realization refers into the model, so both live behind stable pointers.
struct LoadedModel {
  std::string name;
  std::unique_ptr<HorseshoeModel> model;
  std::unique_ptr<GeometricRealization> realization;  // null when no placement given
  Caps caps;
  double root_tol = 1e-10;
};

namespace detail {

inline std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

template <typename T>
T require_field(const nlohmann::json& j, const std::string& key, const char* where) {
  if (!j.contains(key))
    throw SchemaError(std::string(where) + ": missing required field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string(where) + "/" + key + ": " + e.what());
  }
}

}  // namespace detail

inline LoadedModel load_model_text(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(origin + ":" + std::to_string(detail::line_of_byte(text, e.byte)) +
                      ": " + e.what());
  }
  const char* here = "model";
  if (detail::require_field<std::string>(j, "schema", here) != kModelSchema)
    throw SchemaError(origin + ": unsupported schema (expected " +
                      std::string(kModelSchema) + ")");
  LoadedModel out;
  out.name = j.value("name", origin);

  const auto l = detail::require_field<std::size_t>(j, "alphabet_size", here);
  std::vector<std::uint8_t> transitions;
  if (j.contains("transitions") && j["transitions"].is_string()) {
    if (j["transitions"].get<std::string>() != "full")
      throw SchemaError("/transitions: string form must be \"full\"");
    transitions.assign(l * l, 1);
  } else {
    const auto rows =
        detail::require_field<std::vector<std::vector<int>>>(j, "transitions", here);
    if (rows.size() != l) throw SchemaError("/transitions: need one row per symbol");
    for (std::size_t i = 0; i < l; ++i) {
      if (rows[i].size() != l)
        throw SchemaError("/transitions/" + std::to_string(i) + ": row length must be " +
                          std::to_string(l));
      for (std::size_t k = 0; k < l; ++k) {
        if (rows[i][k] != 0 && rows[i][k] != 1)
          throw SchemaError("/transitions/" + std::to_string(i) + "/" + std::to_string(k) +
                            ": entries are 0 or 1");
        transitions.push_back(static_cast<std::uint8_t>(rows[i][k]));
      }
    }
  }
  Subshift shift(l, std::move(transitions));

  BandStructure bands(detail::require_field<std::vector<std::size_t>>(j, "bands", here));
  if (j.contains("stable_rates") && j["stable_rates"].is_array() &&
      !j["stable_rates"].empty() && j["stable_rates"][0].is_array())
    throw SchemaError("/stable_rates: one scalar per symbol; the stable band is "
                      "one-dimensional");
  auto stable = detail::require_field<std::vector<double>>(j, "stable_rates", here);

  const auto type = detail::require_field<std::string>(j, "type", here);
  if (type == "diagonal") {
    auto rates =
        detail::require_field<std::vector<std::vector<double>>>(j, "unstable_rates", here);
    out.model = std::make_unique<HorseshoeModel>(HorseshoeModel::diagonal_model(
        std::move(shift), std::move(bands), std::move(rates), std::move(stable)));
  } else if (type == "cocycle") {
    const auto raw = detail::require_field<
        std::vector<std::vector<std::vector<std::vector<double>>>>>(j, "band_matrices",
                                                                    here);
    std::vector<std::vector<Eigen::MatrixXd>> mats(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      for (std::size_t b = 0; b < raw[i].size(); ++b) {
        const auto& rows = raw[i][b];
        Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows[0].size())
            throw SchemaError("/band_matrices/" + std::to_string(i) + "/" +
                              std::to_string(b) + ": ragged matrix");
          for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        mats[i].push_back(std::move(m));
      }
    }
    out.model = std::make_unique<HorseshoeModel>(HorseshoeModel::cocycle_model(
        std::move(shift), std::move(bands), std::move(mats), std::move(stable)));
  } else {
    throw SchemaError("/type: must be \"diagonal\" or \"cocycle\"");
  }

  if (j.contains("placement")) {
    const auto& p = j["placement"];
    auto uoff = detail::require_field<std::vector<std::vector<double>>>(
        p, "unstable_offsets", "placement");
    auto soff =
        detail::require_field<std::vector<double>>(p, "stable_offsets", "placement");
    const double g1 = p.value("gamma1", std::sqrt(2.0));
    const double g2 = p.value("gamma2", 1.0 / std::sqrt(2.0));
    out.realization = std::make_unique<GeometricRealization>(
        *out.model, std::move(uoff), std::move(soff), g1, g2);
  }

  if (j.contains("caps")) {
    const auto& c = j["caps"];
    out.caps.max_words = c.value("max_words", out.caps.max_words);
    out.caps.max_power_alphabet = c.value("max_power_alphabet", out.caps.max_power_alphabet);
    out.caps.max_level = c.value("max_level", out.caps.max_level);
  }
  if (j.contains("tolerances")) out.root_tol = j["tolerances"].value("root_tol", 1e-10);
  return out;
}

inline LoadedModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open model file");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_model_text(buf.str(), path);
}

}  // namespace bowendim
