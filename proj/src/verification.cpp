#include "layervi/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include <Eigen/Eigenvalues>

#include "layervi/error.hpp"

namespace layervi {

// ---------------------------------------------------------------------------
// Dense oracle

DisplacementField oracle_solve_dense(const VIProblem& problem, const DisplacementField& p,
                                     double stall_tol) {
  if (!problem.is_linear()) throw InputError("dense oracle needs the linear material law");
  const DofMap& dm = problem.dofs();
  const int n = dm.free_count();
  if (n > kDenseDofLimit)
    throw InputError("dense oracle limited to " + std::to_string(kDenseDofLimit) + " dofs");

  const Eigen::MatrixXd k_full = Eigen::MatrixXd(problem.stiffness());
  const FrozenFriction frozen = freeze_friction(problem, p.values);
  Eigen::MatrixXd k(n, n);
  Eigen::VectorXd b(n);
  for (int r = 0; r < n; ++r) {
    b[r] = problem.load()[dm.free_dofs[r]] - frozen.linear[dm.free_dofs[r]];
    for (int c = 0; c < n; ++c) k(r, c) = k_full(dm.free_dofs[r], dm.free_dofs[c]);
  }

  // Each free dof belongs to at most one nonsmooth piece, so the prox is closed-form.
  enum Kind { kNone, kShrinkSingle, kShrinkPair, kHalfspace };
  std::vector<Kind> kind(n, kNone);
  std::vector<int> partner(n, -1);
  std::vector<double> weight(n, 0.0);
  auto claim = [&](int i) {
    if (kind[i] != kNone) throw SolverError("dense oracle: overlapping nonsmooth terms");
  };
  for (const auto& t : frozen.abs_terms) {
    const int i = dm.free_index[t.i];
    if (t.j < 0) {
      claim(i);
      kind[i] = kShrinkSingle;
      weight[i] = t.weight;
    } else {
      const int j = dm.free_index[t.j];
      claim(i);
      claim(j);
      kind[i] = kind[j] = kShrinkPair;
      partner[i] = j;
      partner[j] = -2;  // handled through i
      weight[i] = t.weight;
    }
  }
  for (const auto& row : problem.constraint_rows()) {
    const int u = dm.free_index[row.upper_dof], l = dm.free_index[row.lower_dof];
    if (u < 0) continue;
    claim(u);
    claim(l);
    kind[u] = kind[l] = kHalfspace;
    partner[u] = l;
    partner[l] = -2;
  }

  const double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k, Eigen::EigenvaluesOnly)
                         .eigenvalues()
                         .maxCoeff();
  const double step = 1.0 / lip;
  auto shrink = [](double v, double tau) {
    return v > tau ? v - tau : (v < -tau ? v + tau : 0.0);
  };
  auto prox = [&](Eigen::VectorXd& z) {
    for (int i = 0; i < n; ++i) {
      switch (kind[i]) {
        case kShrinkSingle:
          z[i] = shrink(z[i], step * weight[i]);
          break;
        case kShrinkPair:
          if (partner[i] >= 0) {
            const int j = partner[i];
            const double s = z[i] + z[j];
            const double d = shrink(z[i] - z[j], 2.0 * step * weight[i]);
            z[i] = 0.5 * (s + d);
            z[j] = 0.5 * (s - d);
          }
          break;
        case kHalfspace:
          if (partner[i] >= 0 && z[partner[i]] > z[i]) z[i] = z[partner[i]] = 0.5 * (z[i] + z[partner[i]]);
          break;
        case kNone:
          break;
      }
    }
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n), y = x;
  double t = 1.0;
  int quiet = 0;
  constexpr int kMaxIters = 5'000'000;
  for (int it = 0; it < kMaxIters && quiet < 20; ++it) {
    Eigen::VectorXd z = y - step * (k * y - b);
    prox(z);
    const double change = (z - x).norm();
    if ((y - z).dot(z - x) > 0.0) {
      t = 1.0;
      y = z;
    } else {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = z + ((t - 1.0) / tn) * (z - x);
      t = tn;
    }
    x = std::move(z);
    quiet = change <= stall_tol * std::max(x.norm(), std::numeric_limits<double>::min()) ? quiet + 1
                                                                                         : 0;
  }
  if (quiet < 20) throw SolverError("dense oracle did not stall within the iteration cap");

  DisplacementField out = DisplacementField::zero(problem.mesh_ptr());
  for (int i = 0; i < n; ++i) out.values[dm.free_dofs[i]] = x[i];
  return out;
}

// ---------------------------------------------------------------------------
// Complementarity audit

std::vector<std::pair<std::string, double>> KktReport::entries() const {
  return {{"penetration", penetration},
          {"complementarity", complementarity},
          {"cone", cone},
          {"stick_slip", stick_slip},
          {"foundation_normal", foundation_normal},
          {"foundation_cone", foundation_cone},
          {"foundation_stick_slip", foundation_stick_slip}};
}

KktScales kkt_scales(const VIProblem& problem, const DisplacementField& u) {
  KktScales s;
  s.displacement = u.values.lpNorm<Eigen::Infinity>();
  for (const auto& sig : element_stresses(problem, u.values))
    s.stress = std::max(s.stress, sig.norm());
  return s;
}

KktReport kkt_check(const VIProblem& problem, const DisplacementField& u) {
  const Mesh& m = problem.mesh();
  const DofMap& dm = problem.dofs();
  KktReport r;
  for (int i = 0; i < static_cast<int>(m.interface_pairs.size()); ++i) {
    const auto jn = jump_normal(m, u, i);
    const auto jt = jump_tangential(m, u, i);
    const InterfaceStress s = recover_interface_stress(problem, u, i);
    const FrictionLaw& law = problem.data().interfaces[i];
    for (std::size_t k = 0; k < jn.size(); ++k) {
      if (dm.dirichlet[DofMap::dof(m.interface_pairs[i][k].first, 0)]) continue;
      const double g = friction_bound(law, std::max(0.0, -s.normal[k]));
      r.penetration = std::max(r.penetration, std::max(0.0, jn[k]));
      r.complementarity = std::max(r.complementarity, std::abs(s.normal[k] * jn[k]));
      r.cone = std::max(r.cone, std::max(0.0, std::abs(s.tangential[k]) - g));
      r.stick_slip = std::max(r.stick_slip, std::abs(g * std::abs(jt[k]) + s.tangential[k] * jt[k]));
    }
  }
  const FrictionLaw& fl = problem.data().foundation;
  const int last = m.layer_count() - 1;
  std::vector<int> nodes;
  for (int n : problem.foundation_nodes())
    if (!dm.dirichlet[DofMap::dof(n, 0)]) nodes.push_back(n);
  const auto sig = recover_nodal_stress(problem, u.values, last, nodes);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double u_beta = -u.uy(nodes[k]);
    const double u_eta = u.ux(nodes[k]);
    const double gn = normal_compliance(fl, u_beta);
    const double g = friction_bound(fl, gn);
    const double s_eta = -sig[k].xy;
    r.foundation_normal = std::max(r.foundation_normal, std::abs(sig[k].yy + gn));
    r.foundation_cone = std::max(r.foundation_cone, std::max(0.0, std::abs(s_eta) - g));
    r.foundation_stick_slip =
        std::max(r.foundation_stick_slip, std::abs(g * std::abs(u_eta) + s_eta * u_eta));
  }
  return r;
}

KktReport kkt_thresholds(const VIProblem& problem, const DisplacementField& u, double tol) {
  const KktScales s = kkt_scales(problem, u);
  const double f = kKktFactor * (problem.mesh().h + tol);
  KktReport t;
  t.penetration = f * s.displacement;
  t.complementarity = f * s.stress * s.displacement;
  t.cone = f * s.stress;
  t.stick_slip = f * s.stress * s.displacement;
  t.foundation_normal = f * s.stress;
  t.foundation_cone = f * s.stress;
  t.foundation_stick_slip = f * s.stress * s.displacement;
  return t;
}

std::vector<std::string> kkt_failures(const KktReport& report, const KktReport& thresholds) {
  std::vector<std::string> out;
  const auto e = report.entries();
  const auto t = thresholds.entries();
  for (std::size_t k = 0; k < e.size(); ++k)
    if (!(e[k].second <= t[k].second)) out.push_back(e[k].first);
  return out;
}

double kkt_case_analysis(const VIProblem& problem, const DisplacementField& u, double slip_tol) {
  const Mesh& m = problem.mesh();
  const DofMap& dm = problem.dofs();
  double worst = 0.0;
  for (int i = 0; i < static_cast<int>(m.interface_pairs.size()); ++i) {
    const auto jt = jump_tangential(m, u, i);
    const InterfaceStress s = recover_interface_stress(problem, u, i);
    const FrictionLaw& law = problem.data().interfaces[i];
    for (std::size_t k = 0; k < jt.size(); ++k) {
      if (dm.dirichlet[DofMap::dof(m.interface_pairs[i][k].first, 0)]) continue;
      const double g = friction_bound(law, std::max(0.0, -s.normal[k]));
      const double st = s.tangential[k];
      const double v = std::abs(jt[k]) <= slip_tol
                           ? std::max(0.0, std::abs(st) - g)
                           : std::abs(st + (jt[k] > 0.0 ? g : -g));
      worst = std::max(worst, v);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Residual and Green's formula

double residual_R(const VIProblem& problem, const DisplacementField& u,
                  const DisplacementField& vh) {
  if (u.mesh.get() != problem.mesh_ptr().get() || vh.mesh.get() != problem.mesh_ptr().get())
    throw InputError("residual_R: fields must live on the problem mesh (prolongate first)");
  const Eigen::VectorXd dv = vh.values - u.values;
  const FrozenFriction j = freeze_friction(problem, u.values);
  return problem.internal_force(u.values).dot(dv) - problem.load().dot(dv) -
         eval_frozen(j, u.values) + eval_frozen(j, vh.values);
}

GreensDefect greens_identity_check(const VIProblem& problem, const DisplacementField& u,
                                   int samples, std::uint64_t seed) {
  const Mesh& m = problem.mesh();
  const auto sig = element_stresses(problem, u.values);
  const auto& geo = problem.geometry();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  GreensDefect out;
  Eigen::VectorXd v(2 * m.node_count());
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < v.size(); ++k) v[k] = dist(rng);
    double volume = 0.0, boundary = 0.0, magnitude = 0.0;
    for (int e = 0; e < m.triangle_count(); ++e) {
      const Triangle& t = m.triangles[e];
      const SymTensor2& st = sig[e];
      const double vol = geo[e].area * st.dot(problem.element_strain(e, v));
      volume += vol;
      magnitude += std::abs(vol);
      for (int q = 0; q < 3; ++q) {
        const int a = t.v[q], b = t.v[(q + 1) % 3];
        const double dx = m.nodes[b].x - m.nodes[a].x, dy = m.nodes[b].y - m.nodes[a].y;
        // outward normal times edge length for a counter-clockwise triangle
        const double nx = dy, ny = -dx;
        const double tx = st.xx * nx + st.xy * ny, ty = st.xy * nx + st.yy * ny;
        const double term = 0.5 * (tx * (v[2 * a] + v[2 * b]) + ty * (v[2 * a + 1] + v[2 * b + 1]));
        boundary += term;
        magnitude += std::abs(term);
      }
    }
    out.defect = std::max(out.defect, std::abs(volume - boundary));
    out.scale = std::max(out.scale, magnitude);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Refinement study

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("slope fit needs >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxy += dx * (std::log(y[k]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

double ConvergenceTable::fitted_slope() const {
  std::vector<double> h, e;
  for (const auto& r : rows) {
    h.push_back(r.h);
    e.push_back(r.error);
  }
  return fit_loglog_slope(h, e);
}

bool ConvergenceTable::errors_decreasing() const {
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (!(rows[k].error < rows[k - 1].error)) return false;
  return !rows.empty();
}

double ConvergenceTable::constant_spread() const {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : rows) {
    lo = std::min(lo, r.bound_constant);
    hi = std::max(hi, r.bound_constant);
  }
  return hi / lo;
}

ConvergenceTable convergence_study(const ProblemFamily& family, int levels,
                                   const SolverConfig& cfg) {
  if (levels < 4) throw InputError("convergence study needs >= 4 levels");
  std::vector<MeshPtr> meshes{std::make_shared<const Mesh>(family.coarse)};
  for (int k = 1; k <= levels + 1; ++k)
    meshes.push_back(std::make_shared<const Mesh>(refine_uniform(*meshes.back())));

  ConvergenceTable table;
  table.reference = family.description + "; reference on level " + std::to_string(levels + 1) +
                    " (h = " + std::to_string(meshes.back()->h) + ")";
  std::vector<DisplacementField> solutions;
  DisplacementField guess = DisplacementField::zero(meshes.front());
  for (int k = 0; k <= levels + 1; ++k) {
    if (k == levels) continue;  // the intermediate level between study and reference is skipped
    const VIProblem problem(family.make(meshes[k]));
    if (guess.mesh != meshes[k]) guess = prolongate(guess, meshes[k]);
    const FixedPointResult res = fixed_point_solve(problem, cfg, guess);
    if (k < levels) {
      ConvergenceRow row;
      row.level = k;
      row.h = meshes[k]->h;
      row.dofs = problem.dofs().free_count();
      row.outer_iters = res.report.outer_iters;
      row.error = row.observed_rate = row.fitted_slope = row.interp_error = row.residual =
          row.bound_constant = std::numeric_limits<double>::quiet_NaN();
      table.rows.push_back(row);
    }
    if (!res.solution) {
      table.complete = false;
      table.failure = "level " + std::to_string(k) + ": " + res.report.diagnostic;
      return table;
    }
    guess = *res.solution;
    solutions.push_back(*res.solution);
  }

  const MeshPtr& ref_mesh = meshes.back();
  const DisplacementField& u_ref = solutions.back();
  const VIProblem ref_problem(family.make(ref_mesh));
  double monotonicity = std::numeric_limits<double>::infinity();
  for (const auto& law : ref_problem.data().materials) monotonicity = std::min(monotonicity, 2.0 * law.lame_mu);
  for (int k = 0; k < levels; ++k) {
    ConvergenceRow& row = table.rows[k];
    DisplacementField diff = prolongate(solutions[k], ref_mesh);
    diff.values = u_ref.values - diff.values;
    row.error = energy_norm(ref_problem, diff);
    const DisplacementField interp = prolongate(restrict_to(u_ref, meshes[k]), ref_mesh);
    DisplacementField idiff = interp;
    idiff.values = u_ref.values - interp.values;
    row.interp_error = energy_norm(ref_problem, idiff);
    row.residual = residual_R(ref_problem, u_ref, interp);
    row.bound_constant =
        row.error / (row.interp_error + std::sqrt(std::abs(row.residual) / monotonicity));
    if (k > 0)
      row.observed_rate = std::log(table.rows[k - 1].error / row.error) /
                          std::log(table.rows[k - 1].h / row.h);
  }
  const double slope = table.fitted_slope();
  for (auto& row : table.rows) row.fitted_slope = slope;
  return table;
}

double h2_surrogate(const Mesh& mesh, const Eigen::VectorXd& nodal) {
  double sum = 0.0;
  for (int layer = 0; layer < mesh.layer_count(); ++layer) {
    const LayerGrid& g = mesh.layers[layer];
    std::map<std::pair<int, int>, int> at;
    for (int n = 0; n < mesh.node_count(); ++n)
      if (mesh.node_layer[n] == layer) at[{mesh.node_grid[n][0], mesh.node_grid[n][1]}] = n;
    if (static_cast<int>(at.size()) != (g.nx + 1) * (g.ny + 1))
      throw InputError("h2_surrogate needs the structured grid of every layer");
    const double hx = mesh.width / g.nx, hy = g.thickness / g.ny;
    for (int c = 0; c < 2; ++c) {
      auto v = [&](int ix, int iy) { return nodal[2 * at.at({ix, iy}) + c]; };
      for (int iy = 0; iy <= g.ny; ++iy)
        for (int ix = 1; ix < g.nx; ++ix) {
          const double d = (v(ix + 1, iy) - 2.0 * v(ix, iy) + v(ix - 1, iy)) / (hx * hx);
          sum += d * d * hx * hy;
        }
      for (int iy = 1; iy < g.ny; ++iy)
        for (int ix = 0; ix <= g.nx; ++ix) {
          const double d = (v(ix, iy + 1) - 2.0 * v(ix, iy) + v(ix, iy - 1)) / (hy * hy);
          sum += d * d * hx * hy;
        }
      for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
          const double d = (v(ix + 1, iy + 1) - v(ix + 1, iy) - v(ix, iy + 1) + v(ix, iy)) / (hx * hy);
          sum += 2.0 * d * d * hx * hy;
        }
    }
  }
  return std::sqrt(sum);
}

InterpolationWitness interpolation_witness(const Mesh& coarse, int levels,
                                           const AnalyticField& field) {
  InterpolationWitness w;
  auto mesh = std::make_shared<const Mesh>(coarse);
  for (int k = 0; k < levels; ++k) {
    if (k > 0) mesh = std::make_shared<const Mesh>(refine_uniform(*mesh));
    const double err = interpolation_error(*mesh, field);
    const double surrogate = h2_surrogate(*mesh, interpolate_nodal(mesh, field).values);
    w.h.push_back(mesh->h);
    w.error.push_back(err);
    w.constant.push_back(err / (mesh->h * surrogate));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Manufactured smooth problem

ManufacturedProblem manufactured_problem(int nx, double thickness, int ny, const MaterialLaw& law,
                                         double compliance, double amplitude) {
  law.validate();
  if (!law.is_linear()) throw InputError("manufactured problem uses the linear law");
  constexpr double kPi = 3.14159265358979323846;
  const double width = 1.0;
  const double q = kPi / width;
  const double a = amplitude;
  const double lam = law.lame_lambda, mu = law.lame_mu;
  const double b = -compliance * a / (lam + 2.0 * mu);
  const double kq = 0.5 * a / (thickness * thickness);

  struct Phi {
    double f, d1, d2, d3;
  };
  auto phi = [q](double x) {
    return Phi{0.5 * (1.0 - std::cos(2.0 * q * x)), q * std::sin(2.0 * q * x),
               2.0 * q * q * std::cos(2.0 * q * x), -4.0 * q * q * q * std::sin(2.0 * q * x)};
  };
  auto psi = [=](double y) { return -a + b * y + kq * y * y; };
  auto dpsi = [=](double y) { return b + 2.0 * kq * y; };
  const double d2psi = 2.0 * kq;

  ManufacturedProblem mp;
  mp.exact.value = [=](const Point& p, int) {
    const Phi f = phi(p.x);
    return Vec2{a * f.d1 * p.y, f.f * psi(p.y)};
  };
  mp.exact.gradient = [=](const Point& p, int) {
    const Phi f = phi(p.x);
    return std::array<Vec2, 2>{Vec2{a * f.d2 * p.y, a * f.d1},
                               Vec2{f.d1 * psi(p.y), f.f * dpsi(p.y)}};
  };
  auto body = [=](const Point& p, int) {
    const Phi f = phi(p.x);
    const double lap_x = a * f.d3 * p.y;
    const double lap_y = f.d2 * psi(p.y) + f.f * d2psi;
    const double gdiv_x = a * f.d3 * p.y + f.d1 * dpsi(p.y);
    const double gdiv_y = a * f.d2 + f.f * d2psi;
    return Vec2{-(mu * lap_x + (lam + mu) * gdiv_x), -(mu * lap_y + (lam + mu) * gdiv_y)};
  };
  auto traction = [=](const Point& p) {
    const Phi f = phi(p.x);
    const double h = thickness;
    const double sxy = mu * (a * f.d1 + f.d1 * psi(h));
    const double syy = lam * (a * f.d2 * h + f.f * dpsi(h)) + 2.0 * mu * f.f * dpsi(h);
    return Vec2{sxy, syy};
  };
  FrictionLaw foundation;
  foundation.gn_kind = ComplianceKind::Power;
  foundation.c = compliance;
  foundation.m_exp = 1.0;
  foundation.gt_kind = FrictionKind::Coulomb;
  foundation.mu = 0.0;

  mp.family.coarse = build_layered_mesh({{width, thickness, ny}}, nx);
  mp.family.description = "manufactured smooth single layer, frictionless linear compliance";
  mp.family.make = [=](MeshPtr mesh) {
    ProblemData d;
    d.mesh = std::move(mesh);
    d.materials = {law};
    d.foundation = foundation;
    d.f0 = body;
    d.f2 = traction;
    return d;
  };
  return mp;
}

}  // namespace layervi
