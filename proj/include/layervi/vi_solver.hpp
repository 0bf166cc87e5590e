#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "layervi/assembly.hpp"

namespace layervi {

enum class InnerMethod { ProjectedSor, Semismooth };

const char* to_string(InnerMethod m);
InnerMethod inner_method_from_string(const std::string& s);

struct SolverConfig {
  double outer_tol = 1e-8;  // relative change in the V-norm
  int outer_max_iters = 200;
  double inner_tol = 1e-10;  // relative correction in the stiffness norm
  int inner_max_iters = 500;
  InnerMethod inner_method = InnerMethod::ProjectedSor;
  double regularization_eps = 1e-10;  // semismooth only
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SolverConfig&) const = default;
};

struct InnerStats {
  int iterations = 0;
  /// Objective 1/2 a(u,u) - L(u) + j(p,u) after every block sweep and every Newton step.
  std::vector<double> energies;
};

/// Minimizes 1/2 a(u,u) - L(u) + j(p,u) over the nonpenetration set with the
/// friction data frozen at p. Starts from `initial` when given and feasible.
///
/// projected-sor: exact block Gauss-Seidel (a node, or the two nodes of an
/// interface pair, per block) followed by a Newton step on the current face
/// and an exact line search. Abs terms are never smoothed.
/// semismooth: |t| replaced by sqrt(t^2 + eps^2) - eps, active-set damped
/// Newton with eps continuation down to regularization_eps.
///
/// The perturbed material law is handled by proximal Newton: each step solves
/// the above with the tangent stiffness and is damped by an Armijo search on
/// the true energy.
DisplacementField solve_inner_tresca(const VIProblem& problem, const DisplacementField& p,
                                     const SolverConfig& cfg, InnerStats* stats = nullptr,
                                     const DisplacementField* initial = nullptr);

/// 1/2 a(u,u) - L(u) + j(p,u) with a the stored energy for nonlinear laws.
double inner_objective(const VIProblem& problem, const FrozenFriction& frozen,
                       const Eigen::VectorXd& u);

struct SolverReport {
  bool converged = false;
  bool diverged = false;
  int outer_iters = 0;
  std::vector<double> differences;  // ||u_{k+1} - u_k||_V
  std::vector<double> contraction_ratios;
  std::vector<int> inner_iterations;
  std::string diagnostic;
  std::vector<std::pair<std::string, double>> kkt_summary;  // filled by callers that check it
  double wall_time_s = 0.0;
};

struct FixedPointResult {
  std::optional<DisplacementField> solution;  // set only when converged
  DisplacementField last_iterate;
  SolverReport report;
};

inline constexpr const char* kDivergenceDiagnostic = "M > m condition likely violated";

/// u_{k+1} = Lambda(u_k): the inner problem with friction frozen at u_k.
FixedPointResult fixed_point_solve(const VIProblem& problem, const SolverConfig& cfg,
                                   const DisplacementField& p0);

/// Geometric mean of the last ceil(n/2) contraction ratios. Needs >= 3 outer iterations.
double estimate_contraction(const SolverReport& report);

}  // namespace layervi
