#pragma once

#include <string>
#include <vector>

#include "qpdec/model.hpp"

namespace qpdec {

/// Thermal parameters of one building: per-zone capacities and ambient
/// couplings (diagonal), symmetric zero-diagonal inter-zone transfer matrix.
struct BuildingModel {
  Vector heat_capacity;     // kWh/K per zone
  Vector ambient_coupling;  // kW/K per zone
  Matrix interzone;         // kW/K, symmetric, zero diagonal

  Eigen::Index zones() const { return heat_capacity.size(); }
};

/// One-step zone dynamics z+ = A z + B u + E d with d = [ambient; per-zone load].
struct StateSpace {
  Matrix A;  // I - C^-1 (H + L), L the inter-zone Laplacian
  Matrix B;  // -C^-1 (inputs remove heat)
  Matrix E;  // C^-1 [H*1 | I]
};

StateSpace state_space(const BuildingModel& model);

/// Horizon-stacked dynamics over states z^0..z^N and inputs u^0..u^{N-1}:
/// z_bar = A_bar z_bar + B_bar u_bar + E_bar d_bar + z_f, with the first block
/// row pinning z^0 = t_init through z_f.
struct StackedDynamics {
  Matrix A_bar;  // (N+1)nz x (N+1)nz, A on the first block subdiagonal
  Matrix B_bar;  // (N+1)nz x N nz
  Matrix E_bar;  // (N+1)nz x N (1+nz)
  Vector z_f;    // t_init in block 0, zeros elsewhere
};

StackedDynamics stack_horizon(const StateSpace& ss, int horizon, const Vector& t_init);

struct ScenarioConfig {
  int buildings = 3;
  int horizon = 8;
  int zones = 2;
  std::vector<BuildingModel> models;        // one per building
  Vector t_ambient;                         // N
  std::vector<Matrix> q_disturbance;        // per building, N x nz (kW)
  double t_min = 19.0;
  double t_max = 24.0;
  double v_bar = 0.0;                       // grid capacity per step (kW)
  double c = 1e-2;                          // quadratic price coefficient
  Vector g;                                 // N, linear price
  std::vector<Vector> t_init;               // per building, nz
  unsigned long long seed = 0;
};

/// Deterministic parameter draws: capacities in [0.5, 2], ambient couplings in
/// [0.05, 0.3], inter-zone weights in [0, 0.2] on a random spanning tree.
std::vector<BuildingModel> synthesize_parameters(unsigned long long seed, int buildings,
                                                 int zones);

/// Full scenario synthesis (buildings, weather, loads, prices, capacity).
/// grid_cap <= 0 picks a capacity between the hold-at-comfort-band power
/// envelopes, which keeps every instance feasible by construction.
ScenarioConfig synthesize_scenario(unsigned long long seed, int buildings, int horizon, int zones,
                                   double grid_cap = 0.0);

/// Maps the scenario to the block-QP standard form. Per building,
/// x = [z_bar, u_bar, v_bar_local]; y stacks per-building consumption totals.
BlockQP build_instance(const ScenarioConfig& config);

ScenarioConfig scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const ScenarioConfig& config);

}  // namespace qpdec
