#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "layervi/assembly.hpp"
#include "layervi/vi_solver.hpp"

namespace layervi {

/// Brute-force minimizer of 1/2 u'Ku - L(u) + j(p,u) over the nonpenetration
/// set: dense accelerated proximal gradient with adaptive restart, run until
/// the relative iterate change falls below `stall_tol`. Dense regime only.
inline constexpr int kDenseDofLimit = 200;
DisplacementField oracle_solve_dense(const VIProblem& problem, const DisplacementField& p,
                                     double stall_tol = 1e-15);

/// Complementarity audit with recovered nodal stresses. Every entry is a maximum over nodes
/// off the clamped sides and is >= 0.
struct KktReport {
  double penetration = 0.0;          // max [u_N]_+
  double complementarity = 0.0;      // max |sigma_N [u_N]|
  double cone = 0.0;                 // max (|sigma_T| - g_T)_+
  double stick_slip = 0.0;           // max |g_T |[u_T]| + sigma_T [u_T]|
  double foundation_normal = 0.0;    // max |sigma_beta + g_N(u_beta)|
  double foundation_cone = 0.0;      // max (|sigma_eta| - g_T)_+
  double foundation_stick_slip = 0.0;  // max |g_T |u_eta| + sigma_eta u_eta|

  std::vector<std::pair<std::string, double>> entries() const;
};

/// Scales that turn report entries into dimensionless quantities.
struct KktScales {
  double displacement = 0.0;  // max nodal |u|
  double stress = 0.0;        // max element |sigma|
};

KktScales kkt_scales(const VIProblem& problem, const DisplacementField& u);

/// Frozen factor of the thresholds: entry <= kKktFactor * (h + tol) * scale, where scale is
/// the displacement scale, the stress scale, or their product according to the entry's units.
inline constexpr double kKktFactor = 10.0;

KktReport kkt_check(const VIProblem& problem, const DisplacementField& u);
KktReport kkt_thresholds(const VIProblem& problem, const DisplacementField& u, double tol);
/// Names of the entries above their threshold.
std::vector<std::string> kkt_failures(const KktReport& report, const KktReport& thresholds);

/// Branch-wise check of the interface law: stick nodes (|[u_T]| <= slip_tol) need
/// |sigma_T| <= g_T, slip nodes need sigma_T = -g_T sign([u_T]). Returns the maximum
/// violation in stress units.
double kkt_case_analysis(const VIProblem& problem, const DisplacementField& u, double slip_tol);

/// R(u, v) = a(u, v - u) + L(u - v) - j(u, u) + j(u, v).
double residual_R(const VIProblem& problem, const DisplacementField& u,
                  const DisplacementField& vh);

struct GreensDefect {
  double defect = 0.0;  // max over samples of |volume term - boundary term|
  double scale = 0.0;   // max over samples of the summed magnitudes of the terms
};

/// Element-wise Green's formula for the P1 stress of u against random P1 fields v.
GreensDefect greens_identity_check(const VIProblem& problem, const DisplacementField& u,
                                   int samples = 20, std::uint64_t seed = 1);

/// Mesh-dependent problem used by the refinement study.
struct ProblemFamily {
  Mesh coarse;
  std::function<ProblemData(MeshPtr)> make;
  std::string description;
};

struct ConvergenceRow {
  int level = 0;
  double h = 0.0;
  int dofs = 0;
  double error = 0.0;           // ||u_ref - u_h||_V
  double observed_rate = 0.0;   // log2 of consecutive error ratio; NaN on the first row
  double fitted_slope = 0.0;    // least-squares slope of log error against log h
  double interp_error = 0.0;    // ||u_ref - I_h u_ref||_V
  double residual = 0.0;        // R(u_ref, I_h u_ref)
  double bound_constant = 0.0;  // error / (interp_error + sqrt(|residual| / M)), M = min 2 mu
  int outer_iters = 0;
  bool operator==(const ConvergenceRow&) const = default;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::string reference;
  bool complete = true;
  std::string failure;

  double fitted_slope() const;
  bool errors_decreasing() const;
  /// max / min of the bound constants.
  double constant_spread() const;
};

/// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Solves on `levels` nested meshes and on a reference two refinements finer than the finest.
ConvergenceTable convergence_study(const ProblemFamily& family, int levels,
                                   const SolverConfig& cfg);

/// Second-difference surrogate of the H^2 seminorm of nodal values on the structured grids.
double h2_surrogate(const Mesh& mesh, const Eigen::VectorXd& nodal);

struct InterpolationWitness {
  std::vector<double> h;
  std::vector<double> error;     // ||v - I_h v||_V
  std::vector<double> constant;  // error / (h * surrogate)
};

InterpolationWitness interpolation_witness(const Mesh& coarse, int levels,
                                           const AnalyticField& field);

/// Smooth single-layer problem with frictionless linear compliance whose exact solution is
/// known: u_x = a phi'(x) y, u_y = phi(x) (-a + b y + k y^2), phi = sin^2(pi x / W).
struct ManufacturedProblem {
  ProblemFamily family;
  AnalyticField exact;
};

ManufacturedProblem manufactured_problem(int nx, double thickness, int ny, const MaterialLaw& law,
                                         double compliance, double amplitude);

}  // namespace layervi
