/**
 * @brief Model file (schema_version 1): a JSON document written in a fixed
 * canonical layout so that save -> load -> save is byte-identical.
 *
 *   {
 *     "schema_version": 1,
 *     "p": ..., "n": ...,
 *     "centering": {"x_mean": [...], "xt_mean": [...], "y_mean": ...},
 *     "lambda": {"l1": ..., "l2": ...},
 *     "coef": {"beta0": ..., "main": [[k, v], ...], "inter": [[m, v], ...]},
 *     "refit": {same shape as coef} | null,
 *     "cv_table": [[l1, l2, err], ...],
 *     "metadata": {"seed": ... | null,
 *                  "labels": {"positive": "...", "negative": "..."},
 *                  "features": [...]}
 *   }
 *
 * Coefficient lists hold nonzeros only, sorted, with 1-based k (main) and m
 * (interaction, m = pair index + 1). Reals are written with 17 significant
 * digits.
 */
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>  // nlohmann/json, vendored

#include "classifier.hpp"

namespace capsqda {

inline constexpr int kModelSchemaVersion = 1;

class ModelFormatError : public DataError {
public:
  using DataError::DataError;
};

namespace detail {

inline std::string fmt_real(double v) {
  if (!std::isfinite(v)) throw NumericalError("model file: non-finite value cannot be saved");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string fmt_vector(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt_real(v[i]);
  }
  return out + "]";
}

inline std::string fmt_sparse(const Eigen::VectorXd& v) {
  std::string out = "[";
  bool first = true;
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] == 0.0) continue;
    if (!first) out += ", ";
    first = false;
    out += "[" + std::to_string(i + 1) + ", " + fmt_real(v[i]) + "]";
  }
  return out + "]";
}

inline std::string fmt_coef(const CoefficientVector& c, const std::string& indent) {
  return "{\n" + indent + "  \"beta0\": " + fmt_real(c.beta0) + ",\n" + indent +
         "  \"main\": " + fmt_sparse(c.main) + ",\n" + indent + "  \"inter\": " +
         fmt_sparse(c.inter) + "\n" + indent + "}";
}

inline const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw ModelFormatError(std::string("model file: missing field \"") + key + "\"");
  return j.at(key);
}

inline double real_field(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) throw ModelFormatError(std::string("model file: \"") + key + "\" is not a number");
  return v.get<double>();
}

inline Eigen::VectorXd dense_vector(const nlohmann::json& j, Index expect, const char* what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != expect)
    throw ModelFormatError(std::string("model file: \"") + what + "\" must be an array of length " +
                           std::to_string(expect));
  Eigen::VectorXd v(expect);
  for (Index i = 0; i < expect; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number())
      throw ModelFormatError(std::string("model file: non-numeric entry in \"") + what + "\"");
    v[i] = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

inline Eigen::VectorXd sparse_vector(const nlohmann::json& j, Index length, const char* what) {
  if (!j.is_array()) throw ModelFormatError(std::string("model file: \"") + what + "\" must be an array");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(length);
  Index last = 0;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number())
      throw ModelFormatError(std::string("model file: malformed [index, value] pair in \"") + what + "\"");
    const auto idx = e[0].get<Index>();
    if (idx < 1 || idx > length || idx <= last)
      throw ModelFormatError(std::string("model file: index out of range or unsorted in \"") + what + "\"");
    last = idx;
    v[idx - 1] = e[1].get<double>();
  }
  return v;
}

inline CoefficientVector parse_coef(const nlohmann::json& j, Index p) {
  CoefficientVector c;
  c.beta0 = real_field(j, "beta0");
  c.main = sparse_vector(field(j, "main"), p, "main");
  c.inter = sparse_vector(field(j, "inter"), interaction_count(p), "inter");
  return c;
}

}  // namespace detail

inline std::string serialize_model(const FittedModel& m) {
  using detail::fmt_real;
  std::ostringstream os;
  os << "{\n";
  os << "  \"schema_version\": " << kModelSchemaVersion << ",\n";
  os << "  \"p\": " << m.p << ",\n";
  os << "  \"n\": " << m.n << ",\n";
  os << "  \"centering\": {\n";
  os << "    \"x_mean\": " << detail::fmt_vector(m.x_mean) << ",\n";
  os << "    \"xt_mean\": " << detail::fmt_vector(m.xt_mean) << ",\n";
  os << "    \"y_mean\": " << fmt_real(m.y_mean) << "\n";
  os << "  },\n";
  os << "  \"lambda\": {\"l1\": " << fmt_real(m.lambda.lambda1) << ", \"l2\": "
     << fmt_real(m.lambda.lambda2) << "},\n";
  os << "  \"coef\": " << detail::fmt_coef(m.coef, "  ") << ",\n";
  os << "  \"refit\": " << (m.coef_refit ? detail::fmt_coef(*m.coef_refit, "  ") : "null") << ",\n";
  os << "  \"cv_table\": [";
  for (std::size_t i = 0; i < m.cv_table.size(); ++i) {
    const auto& c = m.cv_table[i];
    os << (i ? ",\n    " : "\n    ") << "[" << fmt_real(c.lambda1) << ", " << fmt_real(c.lambda2)
       << ", " << fmt_real(c.error) << "]";
  }
  os << (m.cv_table.empty() ? "],\n" : "\n  ],\n");
  os << "  \"metadata\": {\n";
  os << "    \"seed\": " << (m.meta.seed ? std::to_string(*m.meta.seed) : "null") << ",\n";
  os << "    \"labels\": {\"positive\": " << detail::fmt_string(m.meta.positive_label)
     << ", \"negative\": " << detail::fmt_string(m.meta.negative_label) << "},\n";
  os << "    \"features\": [";
  for (std::size_t i = 0; i < m.meta.features.size(); ++i)
    os << (i ? ", " : "") << detail::fmt_string(m.meta.features[i]);
  os << "]\n";
  os << "  }\n";
  os << "}\n";
  return os.str();
}

inline FittedModel parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ModelFormatError(std::string("model file: not valid JSON: ") + e.what());
  }
  const auto& ver = detail::field(j, "schema_version");
  if (!ver.is_number_integer() || ver.get<int>() != kModelSchemaVersion)
    throw ModelFormatError("model file: unsupported schema_version " + ver.dump() + " (expected " +
                           std::to_string(kModelSchemaVersion) + ")");
  FittedModel m;
  const auto& jp = detail::field(j, "p");
  const auto& jn = detail::field(j, "n");
  if (!jp.is_number_integer() || !jn.is_number_integer() || jp.get<Index>() < 1 || jn.get<Index>() < 0)
    throw ModelFormatError("model file: p and n must be positive integers");
  m.p = jp.get<Index>();
  m.n = jn.get<Index>();
  const auto& cen = detail::field(j, "centering");
  m.x_mean = detail::dense_vector(detail::field(cen, "x_mean"), m.p, "x_mean");
  m.xt_mean = detail::dense_vector(detail::field(cen, "xt_mean"), interaction_count(m.p), "xt_mean");
  m.y_mean = detail::real_field(cen, "y_mean");
  const auto& lam = detail::field(j, "lambda");
  m.lambda = {detail::real_field(lam, "l1"), detail::real_field(lam, "l2")};
  m.coef = detail::parse_coef(detail::field(j, "coef"), m.p);
  const auto& rf = detail::field(j, "refit");
  if (!rf.is_null()) m.coef_refit = detail::parse_coef(rf, m.p);
  m.active = ActiveSets::of(m.coef);
  const auto& cv = detail::field(j, "cv_table");
  if (!cv.is_array()) throw ModelFormatError("model file: cv_table must be an array");
  for (const auto& row : cv) {
    if (!row.is_array() || row.size() != 3 || !row[0].is_number() || !row[1].is_number() ||
        !row[2].is_number())
      throw ModelFormatError("model file: cv_table rows must be [l1, l2, err]");
    m.cv_table.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
  }
  const auto& meta = detail::field(j, "metadata");
  const auto& seed = detail::field(meta, "seed");
  if (!seed.is_null()) {
    if (!seed.is_number_unsigned()) throw ModelFormatError("model file: seed must be an unsigned integer");
    m.meta.seed = seed.get<std::uint64_t>();
  }
  const auto& labels = detail::field(meta, "labels");
  const auto& pos = detail::field(labels, "positive");
  const auto& neg = detail::field(labels, "negative");
  if (!pos.is_string() || !neg.is_string()) throw ModelFormatError("model file: labels must be strings");
  m.meta.positive_label = pos.get<std::string>();
  m.meta.negative_label = neg.get<std::string>();
  const auto& feats = detail::field(meta, "features");
  if (!feats.is_array()) throw ModelFormatError("model file: features must be an array");
  for (const auto& f : feats) {
    if (!f.is_string()) throw ModelFormatError("model file: feature names must be strings");
    m.meta.features.push_back(f.get<std::string>());
  }
  if (!m.meta.features.empty() && static_cast<Index>(m.meta.features.size()) != m.p)
    throw ModelFormatError("model file: feature name count does not match p");
  return m;
}

inline void save_model(const FittedModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << serialize_model(m);
  if (!out) throw DataError("failed writing " + path);
}

inline FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace capsqda
