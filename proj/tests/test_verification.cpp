#include <cmath>
#include <random>

#include <doctest.h>

#include "fixtures.hpp"
#include "layervi/error.hpp"
#include "layervi/verification.hpp"

using namespace layervi;
using layervi::testing::desk_problem;
using layervi::testing::random_instance;

namespace {

DisplacementField solve(const VIProblem& pr) {
  const FixedPointResult r = fixed_point_solve(pr, SolverConfig{}, DisplacementField::zero(pr.mesh_ptr()));
  REQUIRE(r.solution);
  return *r.solution;
}

SymTensor2 exact_stress(const AnalyticField& f, const MaterialLaw& law, double x, double y) {
  const auto g = f.gradient(Point{x, y}, 0);
  const SymTensor2 eps{g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0])};
  return stress_of_strain(law, eps);
}

}  // namespace

TEST_CASE("dense oracle agrees with the inner solver") {
  std::mt19937_64 rng(5);
  const VIProblem pr(random_instance(rng, {0.3}));
  const DisplacementField p = solve(pr);
  const DisplacementField o = oracle_solve_dense(pr, p);
  DisplacementField d = solve_inner_tresca(pr, p, SolverConfig{});
  d.values -= o.values;
  CHECK(energy_norm(pr, d) <= 1e-7 * (1.0 + energy_norm(pr, o)));
}

TEST_CASE("dense oracle guards") {
  const VIProblem big(desk_problem(16, 0.3));
  CHECK_THROWS_AS(oracle_solve_dense(big, DisplacementField::zero(big.mesh_ptr())), InputError);
  ProblemData d = desk_problem(8, 0.3);
  d.materials[1].kind = MaterialKind::PPerturbed;
  const VIProblem nonlinear(d);
  CHECK_THROWS_AS(oracle_solve_dense(nonlinear, DisplacementField::zero(nonlinear.mesh_ptr())), InputError);

  ProblemData z = desk_problem(8, 0.3);
  z.f2 = [](const Point&) { return Vec2{0.0, 0.0}; };
  const VIProblem zero(z);
  CHECK(oracle_solve_dense(zero, DisplacementField::zero(zero.mesh_ptr())).values.norm() == 0.0);
}

TEST_CASE("complementarity audit on a converged solution") {
  const VIProblem pr(desk_problem(16, 0.3));
  const DisplacementField u = solve(pr);
  const KktReport r = kkt_check(pr, u);
  const KktReport t = kkt_thresholds(pr, u, 1e-8);
  CHECK(kkt_failures(r, t).empty());
  CHECK(r.penetration <= 1e-12);
  for (const auto& [name, v] : r.entries()) CHECK(v >= 0.0);
  CHECK(kkt_case_analysis(pr, u, 1e-6 * kkt_scales(pr, u).displacement) <= t.cone);

  // fault injection: push one lower interface node 0.1 above its partner
  DisplacementField bad = u;
  const auto [a, b] = pr.mesh().interface_pairs[1][8];
  bad.values[2 * b + 1] = bad.values[2 * a + 1] + 0.1;
  const KktReport rb = kkt_check(pr, bad);
  CHECK(rb.penetration == doctest::Approx(0.1));
  const auto failures = kkt_failures(rb, kkt_thresholds(pr, bad, 1e-8));
  CHECK(std::find(failures.begin(), failures.end(), "penetration") != failures.end());
}

TEST_CASE("audit of the zero field is zero") {
  const VIProblem pr(desk_problem(8, 0.3));
  const KktReport r = kkt_check(pr, DisplacementField::zero(pr.mesh_ptr()));
  for (const auto& [name, v] : r.entries()) CHECK(v == 0.0);
}

TEST_CASE("green's identity holds element by element") {
  const VIProblem pr(desk_problem(16, 0.3));
  const GreensDefect g = greens_identity_check(pr, solve(pr));
  CHECK(g.scale > 0.0);
  CHECK(g.defect <= 1e-10 * g.scale);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DisplacementField w = DisplacementField::zero(pr.mesh_ptr());
  for (int k = 0; k < w.values.size(); ++k) w.values[k] = u(rng);
  const GreensDefect gw = greens_identity_check(pr, w, 5, 9);
  CHECK(gw.defect <= 1e-10 * gw.scale);
}

TEST_CASE("property: the discrete solution makes R non-negative on feasible fields") {
  const VIProblem pr(desk_problem(8, 0.3));
  const DisplacementField u = solve(pr);
  CHECK(residual_R(pr, u, u) == 0.0);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.01);
  const double scale = std::abs(pr.load().dot(u.values));
  for (int trial = 0; trial < 50; ++trial) {
    DisplacementField v = u;
    for (int k = 0; k < v.values.size(); ++k)
      if (!pr.dofs().dirichlet[k]) v.values[k] += n(rng);
    for (const auto& row : pr.constraint_rows())
      v.values[row.lower_dof] = std::min(v.values[row.lower_dof], v.values[row.upper_dof]);
    CHECK(residual_R(pr, u, v) >= -1e-8 * scale);
  }
}

TEST_CASE("log-log slope of an exact power law") {
  const std::vector<double> h{0.5, 0.25, 0.125, 0.0625};
  std::vector<double> e;
  for (double x : h) e.push_back(3.0 * std::pow(x, 0.75));
  CHECK(fit_loglog_slope(h, e) == doctest::Approx(0.75));
  CHECK_THROWS_AS(fit_loglog_slope({1.0}, {1.0}), InputError);
}

TEST_CASE("second-difference surrogate of x^2") {
  const int nx = 6, ny = 3;
  const auto mesh = std::make_shared<const Mesh>(build_layered_mesh({{1.5, 0.6, ny}}, nx));
  const AnalyticField f{[](const Point& p, int) { return Vec2{p.x * p.x, 0.0}; }, {}};
  const double hx = 1.5 / nx, hy = 0.6 / ny;
  // D_xx = 2 at the (nx - 1)(ny + 1) interior-in-x grid points
  const double expected = std::sqrt(4.0 * (nx - 1) * (ny + 1) * hx * hy);
  CHECK(h2_surrogate(*mesh, interpolate_nodal(mesh, f).values) == doctest::Approx(expected));
  const AnalyticField lin{[](const Point& p, int) { return Vec2{p.x - 2.0 * p.y, p.y}; }, {}};
  CHECK(h2_surrogate(*mesh, interpolate_nodal(mesh, lin).values) <= 1e-10);
}

TEST_CASE("interpolation witness constants are stable for a smooth field") {
  const Mesh coarse = build_layered_mesh({{1.0, 0.25, 1}, {1.0, 0.5, 2}}, 4);
  const AnalyticField f{
      [](const Point& p, int) { return Vec2{std::sin(3.0 * p.x) * p.y, std::cos(2.0 * p.y) * p.x}; },
      [](const Point& p, int) {
        return std::array<Vec2, 2>{Vec2{3.0 * std::cos(3.0 * p.x) * p.y, std::sin(3.0 * p.x)},
                                   Vec2{std::cos(2.0 * p.y), -2.0 * std::sin(2.0 * p.y) * p.x}};
      }};
  const InterpolationWitness w = interpolation_witness(coarse, 4, f);
  REQUIRE(w.constant.size() == 4);
  for (std::size_t k = 1; k < 4; ++k) {
    CHECK(w.error[k] < w.error[k - 1]);
    CHECK(w.constant[k] / w.constant[0] == doctest::Approx(1.0).epsilon(0.5));
  }
}

TEST_CASE("manufactured problem: the exact field satisfies every equation") {
  const MaterialLaw law{MaterialKind::LinearIsotropic, 1.3, 0.7, 0.0};
  const double c = 2.0, thickness = 0.5;
  const ManufacturedProblem mp = manufactured_problem(4, thickness, 2, law, c, 0.01);
  const auto mesh = std::make_shared<const Mesh>(mp.family.coarse);
  const ProblemData d = mp.family.make(mesh);
  const double h = 1e-5;
  for (double x : {0.13, 0.5, 0.77}) {
    for (double y : {0.05, 0.25, 0.45}) {
      const SymTensor2 sx1 = exact_stress(mp.exact, law, x + h, y), sx0 = exact_stress(mp.exact, law, x - h, y);
      const SymTensor2 sy1 = exact_stress(mp.exact, law, x, y + h), sy0 = exact_stress(mp.exact, law, x, y - h);
      const double div_x = (sx1.xx - sx0.xx + sy1.xy - sy0.xy) / (2.0 * h);
      const double div_y = (sx1.xy - sx0.xy + sy1.yy - sy0.yy) / (2.0 * h);
      const Vec2 f0 = d.f0(Point{x, y}, 0);
      CHECK(f0[0] == doctest::Approx(-div_x).epsilon(1e-5));
      CHECK(f0[1] == doctest::Approx(-div_y).epsilon(1e-5));
    }
    const SymTensor2 top = exact_stress(mp.exact, law, x, thickness);
    CHECK(d.f2(Point{x, thickness})[0] == doctest::Approx(top.xy));
    CHECK(d.f2(Point{x, thickness})[1] == doctest::Approx(top.yy));
    const SymTensor2 bottom = exact_stress(mp.exact, law, x, 0.0);
    const double u_beta = -mp.exact.value(Point{x, 0.0}, 0)[1];
    CHECK(u_beta > 0.0);
    CHECK(bottom.xy == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(bottom.yy == doctest::Approx(-c * u_beta));
  }
  for (double y : {0.0, 0.2, 0.5}) {
    for (double x : {0.0, 1.0}) {
      const Vec2 u = mp.exact.value(Point{x, y}, 0);
      CHECK(std::abs(u[0]) <= 1e-15);
      CHECK(std::abs(u[1]) <= 1e-15);
    }
  }
}

TEST_CASE("manufactured problem: discrete solutions approach the exact field") {
  const MaterialLaw law{MaterialKind::LinearIsotropic, 1.0, 1.0, 0.0};
  const ManufacturedProblem mp = manufactured_problem(4, 0.5, 4, law, 1.0, 0.01);
  auto mesh = std::make_shared<const Mesh>(mp.family.coarse);
  double prev = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (k) mesh = std::make_shared<const Mesh>(refine_uniform(*mesh));
    const VIProblem pr(mp.family.make(mesh));
    DisplacementField e = solve(pr);
    const DisplacementField ex = interpolate_nodal(mesh, mp.exact);
    e.values -= ex.values;
    const double err = energy_norm(pr, e) / energy_norm(pr, ex);
    if (k) CHECK(err < 0.5 * prev);
    prev = err;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("convergence study contract") {
  const ManufacturedProblem mp =
      manufactured_problem(4, 0.5, 4, MaterialLaw{MaterialKind::LinearIsotropic, 1.0, 1.0, 0.0}, 1.0, 0.01);
  CHECK_THROWS_AS(convergence_study(mp.family, 3, SolverConfig{}), InputError);

  ConvergenceTable t;
  t.rows.resize(3);
  t.rows[0].error = 3.0;
  t.rows[1].error = 2.0;
  t.rows[2].error = 2.0;
  CHECK_FALSE(t.errors_decreasing());
  t.rows[2].error = 1.0;
  CHECK(t.errors_decreasing());
  t.rows[0].bound_constant = 0.5;
  t.rows[1].bound_constant = 1.0;
  t.rows[2].bound_constant = 0.8;
  CHECK(t.constant_spread() == doctest::Approx(2.0));
}
