#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qpdec/model.hpp"

namespace qpdec {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

const json& require_key(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end()) {
    std::ostringstream os;
    os << "missing key '" << key << "' in " << where;
    throw ParseError(os.str());
  }
  return *it;
}

double as_number(const json& j, const char* field) {
  if (j.is_null()) {
    // non-finite doubles serialize to null; reject them as data, not syntax
    std::ostringstream os;
    os << "non-finite entry in field '" << field << "'";
    throw ValidationError(os.str());
  }
  if (!j.is_number()) {
    std::ostringstream os;
    os << "field '" << field << "' must be a number";
    throw ParseError(os.str());
  }
  return j.get<double>();
}

Vector vector_from_json(const json& j, const char* field) {
  if (!j.is_array()) {
    std::ostringstream os;
    os << "field '" << field << "' must be an array";
    throw ParseError(os.str());
  }
  Vector v(Eigen::Index(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = as_number(j[size_t(i)], field);
  return v;
}

// expected_cols disambiguates empty matrices ([] carries no column count).
Matrix matrix_from_json(const json& j, const char* field, Eigen::Index expected_cols) {
  if (!j.is_array()) {
    std::ostringstream os;
    os << "field '" << field << "' must be an array of rows";
    throw ParseError(os.str());
  }
  const Eigen::Index rows = Eigen::Index(j.size());
  if (rows == 0) return Matrix(0, expected_cols);
  if (!j[0].is_array()) {
    std::ostringstream os;
    os << "field '" << field << "' must contain array rows";
    throw ParseError(os.str());
  }
  const Eigen::Index cols = Eigen::Index(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[size_t(r)];
    if (!row.is_array() || Eigen::Index(row.size()) != cols) {
      std::ostringstream os;
      os << "dimension mismatch: ragged rows in '" << field << "'";
      throw ValidationError(os.str());
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = as_number(row[size_t(c)], field);
  }
  return m;
}

void check_finite(const BlockQP& p) {
  auto ok = [](const Matrix& m) { return m.size() == 0 || m.allFinite(); };
  bool fine = true;
  for (const auto& s : p.subsystems) {
    fine = fine && ok(s.Hxx) && ok(s.Hxy) && ok(s.Hyy) && ok(s.hx) && ok(s.hy) && ok(s.Ax) &&
           ok(s.Ay) && ok(s.b) && ok(s.Bx) && ok(s.By) && ok(s.d);
  }
  fine = fine && ok(p.global.Aeq) && ok(p.global.beq) && ok(p.global.Bineq) && ok(p.global.dineq);
  if (!fine) throw ValidationError("non-finite entry in problem data");
}

void check_shapes(const BlockQP& p) {
  for (int i = 0; i < int(p.subsystems.size()); ++i) {
    const auto& s = p.subsystems[size_t(i)];
    const Eigen::Index nx = s.hx.size();
    auto expect = [&](const char* field, Eigen::Index rows, Eigen::Index cols,
                      Eigen::Index want_rows, Eigen::Index want_cols) {
      if (rows != want_rows || cols != want_cols) {
        std::ostringstream os;
        os << "dimension mismatch: subsystem " << i << " field '" << field << "' is " << rows
           << "x" << cols << ", expected " << want_rows << "x" << want_cols;
        throw ValidationError(os.str());
      }
    };
    expect("Hxx", s.Hxx.rows(), s.Hxx.cols(), nx, nx);
    expect("Hxy", s.Hxy.rows(), s.Hxy.cols(), nx, p.n_y);
    expect("Hyy", s.Hyy.rows(), s.Hyy.cols(), p.n_y, p.n_y);
    expect("hy", s.hy.size(), 1, p.n_y, 1);
    expect("Ax", s.Ax.rows(), s.Ax.cols(), s.b.size(), nx);
    expect("Ay", s.Ay.rows(), s.Ay.cols(), s.b.size(), p.n_y);
    expect("Bx", s.Bx.rows(), s.Bx.cols(), s.d.size(), nx);
    expect("By", s.By.rows(), s.By.cols(), s.d.size(), p.n_y);
  }
  const auto& g = p.global;
  if (g.Aeq.rows() != g.beq.size() || (g.Aeq.rows() > 0 && g.Aeq.cols() != p.n_y)) {
    throw ValidationError("dimension mismatch: global field 'Aeq'/'beq'");
  }
  if (g.Bineq.rows() != g.dineq.size() || (g.Bineq.rows() > 0 && g.Bineq.cols() != p.n_y)) {
    throw ValidationError("dimension mismatch: global field 'Bineq'/'dineq'");
  }
}

BlockQP from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("top level must be an object");
  BlockQP p;
  p.n_y = Eigen::Index(as_number(require_key(doc, "n_y", "top level"), "n_y"));
  const json& subs = require_key(doc, "subsystems", "top level");
  if (!subs.is_array()) throw ParseError("'subsystems' must be an array");
  for (const json& js : subs) {
    SubsystemBlock s;
    s.hx = vector_from_json(require_key(js, "hx", "subsystem"), "hx");
    s.hy = vector_from_json(require_key(js, "hy", "subsystem"), "hy");
    s.b = vector_from_json(require_key(js, "b", "subsystem"), "b");
    s.d = vector_from_json(require_key(js, "d", "subsystem"), "d");
    const Eigen::Index nx = s.hx.size();
    s.Hxx = matrix_from_json(require_key(js, "Hxx", "subsystem"), "Hxx", nx);
    s.Hxy = matrix_from_json(require_key(js, "Hxy", "subsystem"), "Hxy", p.n_y);
    s.Hyy = matrix_from_json(require_key(js, "Hyy", "subsystem"), "Hyy", p.n_y);
    s.Ax = matrix_from_json(require_key(js, "Ax", "subsystem"), "Ax", nx);
    s.Ay = matrix_from_json(require_key(js, "Ay", "subsystem"), "Ay", p.n_y);
    s.Bx = matrix_from_json(require_key(js, "Bx", "subsystem"), "Bx", nx);
    s.By = matrix_from_json(require_key(js, "By", "subsystem"), "By", p.n_y);
    p.subsystems.push_back(std::move(s));
  }
  const json& g = require_key(doc, "global", "top level");
  p.global.beq = vector_from_json(require_key(g, "beq", "global"), "beq");
  p.global.dineq = vector_from_json(require_key(g, "dineq", "global"), "dineq");
  p.global.Aeq = matrix_from_json(require_key(g, "Aeq", "global"), "Aeq", p.n_y);
  p.global.Bineq = matrix_from_json(require_key(g, "Bineq", "global"), "Bineq", p.n_y);
  check_finite(p);
  check_shapes(p);
  return p;
}

json to_json(const BlockQP& p) {
  check_finite(p);
  json subs = json::array();
  for (const auto& s : p.subsystems) {
    json js;
    js["Hxx"] = matrix_to_json(s.Hxx);
    js["Hxy"] = matrix_to_json(s.Hxy);
    js["Hyy"] = matrix_to_json(s.Hyy);
    js["hx"] = vector_to_json(s.hx);
    js["hy"] = vector_to_json(s.hy);
    js["Ax"] = matrix_to_json(s.Ax);
    js["Ay"] = matrix_to_json(s.Ay);
    js["b"] = vector_to_json(s.b);
    js["Bx"] = matrix_to_json(s.Bx);
    js["By"] = matrix_to_json(s.By);
    js["d"] = vector_to_json(s.d);
    subs.push_back(std::move(js));
  }
  json doc;
  doc["n_y"] = double(p.n_y);
  doc["subsystems"] = std::move(subs);
  doc["global"]["Aeq"] = matrix_to_json(p.global.Aeq);
  doc["global"]["beq"] = vector_to_json(p.global.beq);
  doc["global"]["Bineq"] = matrix_to_json(p.global.Bineq);
  doc["global"]["dineq"] = vector_to_json(p.global.dineq);
  return doc;
}

}  // namespace

BlockQP problem_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("problem file: ") + e.what());
  }
  try {
    return from_json(doc);
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    throw ParseError(std::string("problem file: ") + e.what());
  }
}

std::string problem_to_json_text(const BlockQP& problem) {
  return to_json(problem).dump(1);
}

BlockQP load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open problem file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return problem_from_json_text(buf.str());
}

void save_problem(const std::string& path, const BlockQP& problem) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  out << problem_to_json_text(problem) << "\n";
}

}  // namespace qpdec
