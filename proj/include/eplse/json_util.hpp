#pragma once

// Complex numbers travel as [re, im] pairs; non-finite reals as strings.

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>

#include "json.hpp"

#include "eplse/types.hpp"

namespace eplse {

inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw InputError("expected a number, got '" + s + "'");
}

template <typename Derived>
nlohmann::json to_json_array(const Eigen::DenseBase<Derived>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) {
    const auto value = v.derived()(i);
    if constexpr (std::is_same_v<std::decay_t<decltype(value)>, Complex>) {
      out.push_back({json_number(value.real()), json_number(value.imag())});
    } else {
      out.push_back(json_number(static_cast<double>(value)));
    }
  }
  return out;
}

inline ArrayXd real_array_from_json(const nlohmann::json& j) {
  ArrayXd out(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) out(static_cast<Index>(i)) = number_from_json(j[i]);
  return out;
}

inline VectorXcd complex_vector_from_json(const nlohmann::json& j) {
  VectorXcd out(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& pair = j[i];
    if (!pair.is_array() || pair.size() != 2) throw InputError("expected [re, im] pair");
    out(static_cast<Index>(i)) = Complex(number_from_json(pair[0]), number_from_json(pair[1]));
  }
  return out;
}

}  // namespace eplse
