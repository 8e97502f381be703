#pragma once

// JSON model files and a deterministic JSON writer.
//
// Model file: {"time_domain": "continuous"|"discrete", "name": optional,
//              "modes": [{"A": [[..]], "B": [[..]], "C": [[..]]}, ...]}
// Matrices are row-major nested arrays. Numbers are written with 17
// significant digits so that files round-trip exactly.

#include "lssbalred/model.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace lssbalred::io {

using json = nlohmann::ordered_json;

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

/// Parses a row-major nested array. Rejects ragged rows, non-numbers and
/// non-finite values. An empty array gives a 0 x 0 matrix; `[[]]` gives 1 x 0.
inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected an array of rows");
  const auto rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j[0].is_array()) throw InputError(what + ": expected an array of rows");
  const auto cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array()) throw InputError(what + ": expected an array of rows");
    if (static_cast<Index>(row.size()) != cols) throw InputError(what + ": ragged array");
    for (Index c = 0; c < cols; ++c) {
      const json& x = row[static_cast<std::size_t>(c)];
      if (!x.is_number()) throw InputError(what + ": non-numeric entry");
      const double v = x.get<double>();
      if (!std::isfinite(v)) throw InputError(what + ": non-finite entry");
      m(i, c) = v;
    }
  }
  return m;
}

inline json model_to_json(const LssModel& model) {
  json j;
  j["time_domain"] = to_string(model.time_domain);
  if (!model.name.empty()) j["name"] = model.name;
  json modes = json::array();
  for (const auto& md : model.modes) {
    json mj;
    mj["A"] = matrix_to_json(md.A);
    mj["B"] = matrix_to_json(md.B);
    mj["C"] = matrix_to_json(md.C);
    modes.push_back(std::move(mj));
  }
  j["modes"] = std::move(modes);
  return j;
}

inline LssModel model_from_json(const json& j) {
  if (!j.is_object()) throw InputError("model: expected a JSON object");
  if (!j.contains("time_domain") || !j["time_domain"].is_string())
    throw InputError("model: missing \"time_domain\"");
  const auto td = j["time_domain"].get<std::string>();
  LssModel model;
  if (td == "continuous") {
    model.time_domain = TimeDomain::kContinuous;
  } else if (td == "discrete") {
    model.time_domain = TimeDomain::kDiscrete;
  } else {
    throw InputError("model: time_domain must be \"continuous\" or \"discrete\"");
  }
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw InputError("model: \"name\" must be a string");
    model.name = j["name"].get<std::string>();
  }
  if (!j.contains("modes") || !j["modes"].is_array() || j["modes"].empty())
    throw InputError("model: \"modes\" must be a non-empty array");
  std::size_t q = 1;
  for (const auto& mj : j["modes"]) {
    const auto tag = "mode " + std::to_string(q++);
    if (!mj.is_object() || !mj.contains("A") || !mj.contains("B") || !mj.contains("C"))
      throw InputError(tag + ": expected keys A, B, C");
    model.modes.push_back(Mode{matrix_from_json(mj["A"], tag + " A"),
                               matrix_from_json(mj["B"], tag + " B"),
                               matrix_from_json(mj["C"], tag + " C")});
  }
  require_valid(model);
  return model;
}

/// Formats a double with 17 significant digits.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline void write_string(std::ostringstream& os, const std::string& s) {
  os << json(s).dump();
}

inline void write(std::ostringstream& os, const json& j, int indent, int depth) {
  const auto pad = [&](int d) {
    if (indent >= 0) os << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        pad(depth + 1);
        write_string(os, it.key());
        os << (indent >= 0 ? ": " : ":");
        write(os, it.value(), indent, depth + 1);
      }
      pad(depth);
      os << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& x : j) flat = flat && !x.is_structured();
      os << '[';
      bool first = true;
      for (const auto& x : j) {
        if (!first) os << (flat ? ", " : ",");
        first = false;
        if (!flat) pad(depth + 1);
        write(os, x, indent, depth + 1);
      }
      if (!flat) pad(depth);
      os << ']';
      return;
    }
    case json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Deterministic JSON text: key order preserved, doubles at 17 significant digits.
inline std::string dump(const json& j, int indent = 2) {
  std::ostringstream os;
  detail::write(os, j, indent, 0);
  os << '\n';
  return os.str();
}

/// Parses JSON text; malformed input raises InputError with line and column.
inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                     ": malformed JSON (" + e.what() + ")");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline LssModel load_model(const std::string& path) {
  return model_from_json(parse_text(read_file(path), path));
}

inline void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

inline void save_model(const std::string& path, const LssModel& model) {
  save_text(path, dump(model_to_json(model)));
}

}  // namespace lssbalred::io
