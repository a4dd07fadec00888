#include "qpdec/hvac.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

namespace qpdec {

namespace {

constexpr double kTikhonov = 1e-6;  // keeps Hxx invertible (states and totals carry no cost)
constexpr double kPi = 3.14159265358979323846;

// 53-bit uniform in [lo, hi); keeps draws identical across standard libraries.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = double(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

void check_config(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& what) { throw ValidationError("scenario: " + what); };
  if (cfg.buildings < 1) fail("buildings must be >= 1");
  if (cfg.horizon < 1) fail("horizon must be >= 1");
  if (cfg.zones < 1) fail("zones must be >= 1");
  if (!(cfg.t_min < cfg.t_max)) fail("t_min must be below t_max");
  if (!(cfg.v_bar > 0.0)) fail("v_bar must be positive");
  if (!(cfg.c > 0.0)) fail("c must be positive");
  if (int(cfg.models.size()) != cfg.buildings) fail("models count mismatch");
  if (cfg.t_ambient.size() != cfg.horizon) fail("t_ambient length mismatch");
  if (cfg.g.size() != cfg.horizon) fail("g length mismatch");
  if (int(cfg.q_disturbance.size()) != cfg.buildings) fail("q_disturbance count mismatch");
  if (int(cfg.t_init.size()) != cfg.buildings) fail("t_init count mismatch");
  for (const auto& m : cfg.models) {
    if (m.zones() != cfg.zones || m.ambient_coupling.size() != cfg.zones ||
        m.interzone.rows() != cfg.zones || m.interzone.cols() != cfg.zones) {
      fail("building model dimension mismatch");
    }
    if (m.heat_capacity.minCoeff() <= 0.0) fail("heat capacities must be positive");
    if (m.ambient_coupling.minCoeff() < 0.0) fail("ambient couplings must be nonnegative");
    if (inf_norm(Matrix(m.interzone - m.interzone.transpose())) > 1e-12 ||
        m.interzone.diagonal().cwiseAbs().maxCoeff() > 0.0) {
      fail("interzone matrix must be symmetric with zero diagonal");
    }
  }
  for (const auto& q : cfg.q_disturbance) {
    if (q.rows() != cfg.horizon || q.cols() != cfg.zones) fail("q_disturbance shape mismatch");
  }
  for (const auto& t : cfg.t_init) {
    if (t.size() != cfg.zones) fail("t_init shape mismatch");
  }
}

}  // namespace

StateSpace state_space(const BuildingModel& model) {
  const Eigen::Index nz = model.zones();
  if (model.heat_capacity.minCoeff() <= 0.0) {
    throw ValidationError("state_space: singular capacity matrix");
  }
  const Vector cinv = model.heat_capacity.cwiseInverse();
  // pairwise transfers G_mn (T_m - T_n) collapse to the graph Laplacian
  Matrix laplacian = Matrix(model.interzone.rowwise().sum().asDiagonal()) - model.interzone;
  StateSpace ss;
  ss.A = Matrix::Identity(nz, nz) -
         cinv.asDiagonal() * (Matrix(model.ambient_coupling.asDiagonal()) + laplacian);
  ss.B = -Matrix(cinv.asDiagonal());
  ss.E = Matrix(nz, 1 + nz);
  ss.E.col(0) = cinv.cwiseProduct(model.ambient_coupling);
  ss.E.rightCols(nz) = Matrix(cinv.asDiagonal());
  return ss;
}

StackedDynamics stack_horizon(const StateSpace& ss, int horizon, const Vector& t_init) {
  const Eigen::Index nz = ss.A.rows();
  const Eigen::Index nd = ss.E.cols();
  if (t_init.size() != nz) throw DimensionError("stack_horizon: t_init size mismatch");
  if (horizon < 1) throw ValidationError("stack_horizon: horizon must be >= 1");
  const Eigen::Index n = horizon;
  StackedDynamics out;
  out.A_bar = Matrix::Zero((n + 1) * nz, (n + 1) * nz);
  out.B_bar = Matrix::Zero((n + 1) * nz, n * nz);
  out.E_bar = Matrix::Zero((n + 1) * nz, n * nd);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.A_bar.block((k + 1) * nz, k * nz, nz, nz) = ss.A;
    out.B_bar.block((k + 1) * nz, k * nz, nz, nz) = ss.B;
    out.E_bar.block((k + 1) * nz, k * nd, nz, nd) = ss.E;
  }
  out.z_f = Vector::Zero((n + 1) * nz);
  out.z_f.head(nz) = t_init;
  return out;
}

std::vector<BuildingModel> synthesize_parameters(unsigned long long seed, int buildings,
                                                 int zones) {
  std::mt19937_64 rng(seed);
  std::vector<BuildingModel> models;
  models.reserve(size_t(buildings));
  for (int i = 0; i < buildings; ++i) {
    BuildingModel m;
    m.heat_capacity = Vector(zones);
    m.ambient_coupling = Vector(zones);
    for (int z = 0; z < zones; ++z) m.heat_capacity(z) = uniform(rng, 0.5, 2.0);
    for (int z = 0; z < zones; ++z) m.ambient_coupling(z) = uniform(rng, 0.05, 0.3);
    m.interzone = Matrix::Zero(zones, zones);
    for (int z = 1; z < zones; ++z) {
      const int peer = int(rng() % (unsigned long long)(z));  // random spanning tree
      const double weight = uniform(rng, 0.0, 0.2);
      m.interzone(z, peer) = weight;
      m.interzone(peer, z) = weight;
    }
    models.push_back(std::move(m));
  }
  return models;
}

ScenarioConfig synthesize_scenario(unsigned long long seed, int buildings, int horizon, int zones,
                                   double grid_cap) {
  ScenarioConfig cfg;
  cfg.buildings = buildings;
  cfg.horizon = horizon;
  cfg.zones = zones;
  cfg.seed = seed;
  cfg.models = synthesize_parameters(seed, buildings, zones);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);  // weather/price stream
  const double phase_t = uniform(rng, 0.0, 2.0 * kPi);
  const double phase_g = uniform(rng, 0.0, 2.0 * kPi);
  cfg.t_ambient = Vector(horizon);
  cfg.g = Vector(horizon);
  for (int k = 0; k < horizon; ++k) {
    cfg.t_ambient(k) = 29.0 + 3.0 * std::sin(2.0 * kPi * k / horizon + phase_t);
    cfg.g(k) = 0.1 + 0.05 * std::sin(2.0 * kPi * k / horizon + phase_g);
  }
  cfg.q_disturbance.clear();
  cfg.t_init.clear();
  for (int i = 0; i < buildings; ++i) {
    Matrix q(horizon, zones);
    for (int k = 0; k < horizon; ++k) {
      for (int z = 0; z < zones; ++z) q(k, z) = uniform(rng, 0.0, 0.8);
    }
    cfg.q_disturbance.push_back(std::move(q));
    Vector t0(zones);
    for (int z = 0; z < zones; ++z) t0(z) = uniform(rng, 21.0, 22.5);
    cfg.t_init.push_back(std::move(t0));
  }

  if (grid_cap > 0.0) {
    cfg.v_bar = grid_cap;
  } else {
    // Power needed to hold every zone at a constant temperature T is
    // H (T_a - T) + load; the Laplacian term cancels. Pick the capacity halfway
    // between holding at the cold and at the warm comfort edge, which keeps the
    // drift-then-hold trajectory feasible while the coupling still bites.
    auto hold_peak = [&](double t_hold) {
      double peak = 0.0;
      for (int k = 0; k < horizon; ++k) {
        double total = 0.0;
        for (int i = 0; i < buildings; ++i) {
          total += cfg.models[size_t(i)].ambient_coupling.sum() * (cfg.t_ambient(k) - t_hold);
          total += cfg.q_disturbance[size_t(i)].row(k).sum();
        }
        peak = std::max(peak, total);
      }
      return peak;
    };
    cfg.v_bar = 0.5 * (hold_peak(21.0) + hold_peak(cfg.t_max));
  }
  return cfg;
}

BlockQP build_instance(const ScenarioConfig& cfg) {
  check_config(cfg);
  const Eigen::Index s_count = cfg.buildings;
  const Eigen::Index n = cfg.horizon;
  const Eigen::Index nz = cfg.zones;
  const Eigen::Index n_states = (n + 1) * nz;
  const Eigen::Index n_inputs = n * nz;
  const Eigen::Index n_xi = n_states + n_inputs + n;
  const Eigen::Index n_ei = n_states + n;
  const Eigen::Index n_ii = 2 * n_states;
  const Eigen::Index n_y = s_count * n;

  BlockQP p;
  p.n_y = n_y;
  for (Eigen::Index i = 0; i < s_count; ++i) {
    const StateSpace ss = state_space(cfg.models[size_t(i)]);
    const StackedDynamics dyn = stack_horizon(ss, int(n), cfg.t_init[size_t(i)]);

    Vector d_bar(n * (1 + nz));
    for (Eigen::Index k = 0; k < n; ++k) {
      d_bar(k * (1 + nz)) = cfg.t_ambient(k);
      d_bar.segment(k * (1 + nz) + 1, nz) = cfg.q_disturbance[size_t(i)].row(k).transpose();
    }

    SubsystemBlock blk;
    blk.Hxx = Matrix::Zero(n_xi, n_xi);
    blk.Hxx.diagonal().head(n_states).setConstant(kTikhonov);
    blk.Hxx.diagonal().segment(n_states, n_inputs).setConstant(cfg.c);
    blk.Hxx.diagonal().tail(n).setConstant(kTikhonov);
    blk.Hxy = Matrix::Zero(n_xi, n_y);
    blk.Hyy = Matrix::Zero(n_y, n_y);
    blk.hx = Vector::Zero(n_xi);
    for (Eigen::Index k = 0; k < n; ++k) {
      blk.hx.segment(n_states + k * nz, nz).setConstant(cfg.g(k));
    }
    blk.hy = Vector::Zero(n_y);

    blk.Ax = Matrix::Zero(n_ei, n_xi);
    blk.Ax.topLeftCorner(n_states, n_states) = Matrix::Identity(n_states, n_states) - dyn.A_bar;
    blk.Ax.block(0, n_states, n_states, n_inputs) = -dyn.B_bar;
    for (Eigen::Index k = 0; k < n; ++k) {
      blk.Ax.block(n_states + k, n_states + k * nz, 1, nz).setOnes();  // per-step totals
    }
    blk.Ay = Matrix::Zero(n_ei, n_y);
    for (Eigen::Index k = 0; k < n; ++k) {
      blk.Ay(n_states + k, i * n + k) = -1.0;  // building i's slice of y
    }
    blk.b = Vector::Zero(n_ei);
    blk.b.head(n_states) = dyn.E_bar * d_bar + dyn.z_f;

    blk.Bx = Matrix::Zero(n_ii, n_xi);
    blk.Bx.topLeftCorner(n_states, n_states) = Matrix::Identity(n_states, n_states);
    blk.Bx.block(n_states, 0, n_states, n_states) = -Matrix::Identity(n_states, n_states);
    blk.By = Matrix::Zero(n_ii, n_y);
    blk.d = Vector(n_ii);
    blk.d.head(n_states).setConstant(cfg.t_max);
    blk.d.tail(n_states).setConstant(-cfg.t_min);

    if (blk.nx() != n_xi || blk.ne() != n_ei || blk.ni() != n_ii) {
      throw NumericalError("build_instance: dimension formulas violated");
    }
    p.subsystems.push_back(std::move(blk));
  }

  p.global.Aeq = Matrix(0, n_y);
  p.global.beq = Vector(0);
  p.global.Bineq = Matrix::Zero(n, n_y);
  for (Eigen::Index i = 0; i < s_count; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) p.global.Bineq(k, i * n + k) = 1.0;
  }
  p.global.dineq = Vector::Constant(n, cfg.v_bar);
  return p;
}

namespace {

using nlohmann::json;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from(const json& j, const char* field) {
  if (!j.is_array()) throw ParseError(std::string("scenario field '") + field + "' must be an array");
  Vector v(Eigen::Index(j.size()));
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(std::string("scenario field '") + field + "' must be numeric");
    v(Eigen::Index(i)) = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from(const json& j, const char* field) {
  if (!j.is_array()) throw ParseError(std::string("scenario field '") + field + "' must be an array");
  const Eigen::Index rows = Eigen::Index(j.size());
  if (rows == 0) return Matrix(0, 0);
  const Eigen::Index cols = Eigen::Index(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[size_t(r)];
    if (!row.is_array() || Eigen::Index(row.size()) != cols) {
      throw ValidationError(std::string("scenario field '") + field + "' has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[size_t(c)].get<double>();
  }
  return m;
}

}  // namespace

ScenarioConfig scenario_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario file: ") + e.what());
  }
  ScenarioConfig base = synthesize_scenario(
      doc.value("seed", 0ull), doc.value("buildings", 3), doc.value("horizon", 8),
      doc.value("zones", 2), doc.value("v_bar", 0.0));
  if (doc.contains("t_min")) base.t_min = doc["t_min"].get<double>();
  if (doc.contains("t_max")) base.t_max = doc["t_max"].get<double>();
  if (doc.contains("c")) base.c = doc["c"].get<double>();
  if (doc.contains("t_ambient")) base.t_ambient = vector_from(doc["t_ambient"], "t_ambient");
  if (doc.contains("g")) base.g = vector_from(doc["g"], "g");
  if (doc.contains("q_disturbance")) {
    base.q_disturbance.clear();
    for (const auto& q : doc["q_disturbance"]) base.q_disturbance.push_back(matrix_from(q, "q_disturbance"));
  }
  if (doc.contains("t_init")) {
    base.t_init.clear();
    for (const auto& t : doc["t_init"]) base.t_init.push_back(vector_from(t, "t_init"));
  }
  return base;
}

std::string scenario_to_json_text(const ScenarioConfig& cfg) {
  json doc;
  doc["buildings"] = cfg.buildings;
  doc["horizon"] = cfg.horizon;
  doc["zones"] = cfg.zones;
  doc["t_min"] = cfg.t_min;
  doc["t_max"] = cfg.t_max;
  doc["v_bar"] = cfg.v_bar;
  doc["c"] = cfg.c;
  doc["seed"] = cfg.seed;
  doc["t_ambient"] = vector_json(cfg.t_ambient);
  doc["g"] = vector_json(cfg.g);
  doc["q_disturbance"] = json::array();
  for (const auto& q : cfg.q_disturbance) doc["q_disturbance"].push_back(matrix_json(q));
  doc["t_init"] = json::array();
  for (const auto& t : cfg.t_init) doc["t_init"].push_back(vector_json(t));
  return doc.dump(1);
}

}  // namespace qpdec
