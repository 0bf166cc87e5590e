#include <cmath>

#include <doctest.h>

#include "layervi/assembly.hpp"
#include "layervi/error.hpp"

using namespace layervi;

namespace {

// lambda = 0, mu = 1/2 makes sigma equal to eps.
const MaterialLaw kUnit{MaterialKind::LinearIsotropic, 0.0, 0.5, 0.0};
const FrictionLaw kNone{ComplianceKind::Power, 0.0, 1.0, 0.0, FrictionKind::Coulomb, 0.0, 0.0};

ProblemData stack(int layers, int nx, int ny, double thickness = 0.5) {
  std::vector<LayerSpec> spec(layers, LayerSpec{1.0, thickness, ny});
  ProblemData d;
  d.mesh = std::make_shared<const Mesh>(build_layered_mesh(spec, nx));
  d.materials.assign(layers, kUnit);
  d.foundation = kNone;
  d.interfaces.assign(layers - 1, kNone);
  return d;
}

DisplacementField field(const MeshPtr& mesh, double (*fx)(const Point&), double (*fy)(const Point&)) {
  DisplacementField u = DisplacementField::zero(mesh);
  for (int n = 0; n < mesh->node_count(); ++n) {
    u.values[2 * n] = fx(mesh->nodes[n]);
    u.values[2 * n + 1] = fy(mesh->nodes[n]);
  }
  return u;
}

double zero(const Point&) { return 0.0; }
double minus_y(const Point& p) { return -p.y; }
double coord_x(const Point& p) { return p.x; }
double coord_y(const Point& p) { return p.y; }

}  // namespace

TEST_CASE("dof map") {
  const VIProblem pr(stack(2, 4, 2));
  const DofMap& dm = pr.dofs();
  CHECK(dm.dof_count == 2 * pr.mesh().node_count());
  // 3 rows per layer, 2 clamped nodes per row
  CHECK(dm.free_count() == dm.dof_count - 2 * 2 * 2 * 3);
  for (int k = 0; k < dm.free_count(); ++k) CHECK(dm.free_index[dm.free_dofs[k]] == k);
  CHECK(DofMap::dof(5, 1) == 11);
}

TEST_CASE("problem validation") {
  ProblemData d = stack(3, 4, 1);
  d.interfaces.pop_back();
  CHECK_THROWS_WITH_AS(VIProblem{d}, "interface law count must equal 2", InputError);
  d = stack(2, 4, 1);
  d.materials.pop_back();
  CHECK_THROWS_AS(VIProblem{d}, InputError);
}

TEST_CASE("stiffness is symmetric and annihilates translations") {
  const VIProblem pr(stack(2, 3, 2));
  const SparseMatrix& k = pr.stiffness();
  CHECK((Eigen::MatrixXd(k) - Eigen::MatrixXd(k).transpose()).norm() == doctest::Approx(0.0));
  Eigen::VectorXd t = Eigen::VectorXd::Zero(k.rows());
  for (int n = 0; n < pr.mesh().node_count(); ++n) t[2 * n] = 1.0;
  CHECK((k * t).norm() <= 1e-12);
}

TEST_CASE("linear law: internal force, energy and stiffness agree") {
  const VIProblem pr(stack(2, 3, 2));
  const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(pr.dofs().dof_count, -0.3, 0.7);
  CHECK((pr.internal_force(u) - pr.stiffness() * u).norm() <= 1e-12);
  CHECK(pr.strain_energy(u) == doctest::Approx(0.5 * u.dot(pr.stiffness() * u)));
}

TEST_CASE("patch test: compression field balances the top traction") {
  ProblemData d = stack(1, 4, 3, 1.0);
  d.f2 = [](const Point&) { return Vec2{0.0, -1.0}; };
  const VIProblem pr(d);
  const DisplacementField u = field(pr.mesh_ptr(), zero, minus_y);
  for (const auto& s : element_stresses(pr, u.values)) {
    CHECK(s.yy == doctest::Approx(-1.0));
    CHECK(s.xx == doctest::Approx(0.0));
    CHECK(s.xy == doctest::Approx(0.0));
  }
  const Eigen::VectorXd r = pr.internal_force(u.values) - pr.load();
  const Mesh& m = pr.mesh();
  for (int n = 0; n < m.node_count(); ++n) {
    if (pr.dofs().dirichlet[2 * n] || m.nodes[n].y == 0.0) continue;
    CHECK(std::abs(r[2 * n]) <= 1e-12);
    CHECK(std::abs(r[2 * n + 1]) <= 1e-12);
  }
}

TEST_CASE("traction load integrates to the loaded length") {
  ProblemData d = stack(2, 8, 1);
  d.f2 = [](const Point&) { return Vec2{0.0, -2.0}; };
  const VIProblem pr(d);
  double sy = 0.0;
  for (int n = 0; n < pr.mesh().node_count(); ++n) sy += pr.load()[2 * n + 1];
  // the clamped corner nodes drop half a cell each
  CHECK(sy == doctest::Approx(-2.0 * (1.0 - 1.0 / 8.0)));
}

TEST_CASE("body force integrates to the layer volume") {
  ProblemData d = stack(1, 4, 2, 1.0);
  d.f0 = [](const Point&, int) { return Vec2{0.0, -3.0}; };
  const VIProblem pr(d);
  double sy = 0.0;
  for (int n = 0; n < pr.mesh().node_count(); ++n) sy += pr.load()[2 * n + 1];
  // every clamped node loses a third of its incident triangle areas
  double lost = 0.0;
  const Mesh& m = pr.mesh();
  for (const auto& t : m.triangles)
    for (int v : t.v)
      if (pr.dofs().dirichlet[2 * v]) lost += triangle_area(m, t) / 3.0;
  CHECK(sy == doctest::Approx(-3.0 * (1.0 - lost)));
}

TEST_CASE("strain of simple fields") {
  const VIProblem pr(stack(1, 2, 2, 1.0));
  const DisplacementField u = field(pr.mesh_ptr(), coord_y, zero);
  for (int t = 0; t < pr.mesh().triangle_count(); ++t) {
    const SymTensor2 e = strain(pr.mesh(), t, u);
    CHECK(e.xx == doctest::Approx(0.0));
    CHECK(e.yy == doctest::Approx(0.0));
    CHECK(e.xy == doctest::Approx(0.5));
  }
}

TEST_CASE("jumps across an interface") {
  const VIProblem pr(stack(2, 2, 1));
  DisplacementField u = DisplacementField::zero(pr.mesh_ptr());
  for (const auto& [a, b] : pr.mesh().interface_pairs[0]) {
    u.values[2 * a] = 0.5;
    u.values[2 * b] = 0.2;
    u.values[2 * a + 1] = 0.1;
    u.values[2 * b + 1] = 0.3;
  }
  for (double j : jump_normal(pr.mesh(), u, 0)) CHECK(j == doctest::Approx(0.2));
  for (double j : jump_tangential(pr.mesh(), u, 0)) CHECK(j == doctest::Approx(0.3));
  CHECK_THROWS_AS(jump_normal(pr.mesh(), u, 1), InputError);
}

TEST_CASE("interface stress recovery signs") {
  const VIProblem pr(stack(2, 4, 2));
  const InterfaceStress c = recover_interface_stress(pr, field(pr.mesh_ptr(), zero, minus_y), 0);
  for (double s : c.normal) CHECK(s == doctest::Approx(-1.0));
  for (double s : c.tangential) CHECK(s == doctest::Approx(0.0));
  const InterfaceStress sh = recover_interface_stress(pr, field(pr.mesh_ptr(), coord_y, zero), 0);
  for (double s : sh.normal) CHECK(s == doctest::Approx(0.0));
  for (double s : sh.tangential) CHECK(s == doctest::Approx(-0.5));
}

TEST_CASE("frozen friction on the foundation") {
  ProblemData d = stack(1, 4, 1);
  d.foundation = {ComplianceKind::Power, 2.0, 1.0, 0.0, FrictionKind::Coulomb, 0.5, 0.0};
  const VIProblem pr(d);
  DisplacementField p = DisplacementField::zero(pr.mesh_ptr());
  DisplacementField w = DisplacementField::zero(pr.mesh_ptr());
  for (int n = 0; n < pr.mesh().node_count(); ++n) {
    p.values[2 * n + 1] = -0.1;
    w.values[2 * n] = 0.2;
    w.values[2 * n + 1] = -0.1;
  }
  // three free foundation nodes of weight 1/4: g_N = 0.2, g_T = 0.1
  //   normal part 3 * 0.25 * 0.2 * 0.1, friction part 3 * 0.25 * 0.1 * 0.2
  CHECK(eval_j(pr, p, w) == doctest::Approx(0.015 + 0.015));
  CHECK(eval_j(pr, DisplacementField::zero(pr.mesh_ptr()), w) == 0.0);
}

TEST_CASE("frozen friction on an interface") {
  ProblemData d = stack(2, 4, 2);
  d.interfaces[0] = {ComplianceKind::Power, 0.0, 1.0, 0.0, FrictionKind::Coulomb, 0.4, 0.0};
  const VIProblem pr(d);
  const DisplacementField p = field(pr.mesh_ptr(), zero, minus_y);
  DisplacementField w = DisplacementField::zero(pr.mesh_ptr());
  for (const auto& [a, b] : pr.mesh().interface_pairs[0]) {
    w.values[2 * a] = 0.3;
    w.values[2 * b] = 0.2;
  }
  // three free pairs of weight 1/4, bound 0.4 * |sigma_N| = 0.4, slip 0.1
  CHECK(eval_j(pr, p, w) == doctest::Approx(3 * 0.25 * 0.4 * 0.1));
  const FrozenFriction f = freeze_friction(pr, p.values);
  int weighted = 0;
  for (const auto& t : f.abs_terms) weighted += t.weight > 0.0;
  CHECK(weighted == 3);
  CHECK(f.linear.norm() == 0.0);
}

TEST_CASE("energy norm of elementary fields") {
  const VIProblem pr(stack(1, 3, 3, 1.0));
  CHECK(energy_norm(pr, field(pr.mesh_ptr(), coord_x, zero)) == doctest::Approx(1.0));
  CHECK(energy_norm(pr, field(pr.mesh_ptr(), coord_y, zero)) == doctest::Approx(std::sqrt(0.5)));
  CHECK(energy_norm(pr, field(pr.mesh_ptr(), coord_y, coord_x)) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("interpolation error: exact for linear fields, first order for quadratics") {
  auto mesh = std::make_shared<const Mesh>(build_layered_mesh({{1.0, 0.5, 2}, {1.0, 0.5, 2}}, 4));
  const AnalyticField lin{[](const Point& p, int) { return Vec2{2.0 * p.x - p.y, 0.5 * p.y}; },
                          [](const Point&, int) { return std::array<Vec2, 2>{Vec2{2.0, -1.0}, Vec2{0.0, 0.5}}; }};
  CHECK(interpolation_error(*mesh, lin) <= 1e-13);
  const DisplacementField li = interpolate_nodal(mesh, lin);
  CHECK(li.values[2 * 3] == doctest::Approx(2.0 * mesh->nodes[3].x - mesh->nodes[3].y));

  const AnalyticField quad{[](const Point& p, int) { return Vec2{p.x * p.x, 0.0}; },
                           [](const Point& p, int) { return std::array<Vec2, 2>{Vec2{2.0 * p.x, 0.0}, Vec2{0.0, 0.0}}; }};
  double prev = interpolation_error(*mesh, quad);
  for (int k = 0; k < 2; ++k) {
    mesh = std::make_shared<const Mesh>(refine_uniform(*mesh));
    const double e = interpolation_error(*mesh, quad);
    CHECK(prev / e == doctest::Approx(2.0).epsilon(0.02));
    prev = e;
  }
}

TEST_CASE("prolongation and restriction between nested meshes") {
  const auto coarse = std::make_shared<const Mesh>(build_layered_mesh({{1.0, 0.4, 1}, {1.0, 0.6, 2}}, 3));
  const auto mid = std::make_shared<const Mesh>(refine_uniform(*coarse));
  const auto fine = std::make_shared<const Mesh>(refine_uniform(*mid));
  const AnalyticField lin{[](const Point& p, int layer) { return Vec2{p.x + 3.0 * p.y, layer - p.x}; }, {}};
  const DisplacementField uc = interpolate_nodal(coarse, lin);
  const DisplacementField uf = prolongate(uc, fine);
  CHECK((uf.values - interpolate_nodal(fine, lin).values).lpNorm<Eigen::Infinity>() <= 1e-13);
  CHECK(restrict_to(uf, coarse).values == uc.values);
  CHECK(prolongate(prolongate(uc, mid), fine).values.isApprox(uf.values, 1e-14));
  const auto other = std::make_shared<const Mesh>(build_layered_mesh({{1.0, 1.0, 1}}, 2));
  CHECK_THROWS_AS(prolongate(uc, other), InputError);
}

TEST_CASE("nodal stress recovery averages by area") {
  const VIProblem pr(stack(1, 2, 2, 1.0));
  const DisplacementField u = field(pr.mesh_ptr(), coord_x, zero);
  const auto s = recover_nodal_stress(pr, u.values, 0, {0, 4});
  for (const auto& t : s) CHECK(t.xx == doctest::Approx(1.0));
}
