#include "layervi/assembly.hpp"

#include <algorithm>
#include <cmath>

#include "layervi/error.hpp"

namespace layervi {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

using Matrix36 = Eigen::Matrix<double, 3, 6>;

Matrix36 strain_matrix(const ElementGeometry& g) {
  Matrix36 b = Matrix36::Zero();
  for (int k = 0; k < 3; ++k) {
    const double gx = g.grad[k][0], gy = g.grad[k][1];
    b(0, 2 * k) = gx;
    b(2, 2 * k) = gy * kInvSqrt2;
    b(1, 2 * k + 1) = gy;
    b(2, 2 * k + 1) = gx * kInvSqrt2;
  }
  return b;
}

std::array<int, 6> element_dofs(const Triangle& t) {
  std::array<int, 6> d{};
  for (int k = 0; k < 3; ++k) {
    d[2 * k] = DofMap::dof(t.v[k], 0);
    d[2 * k + 1] = DofMap::dof(t.v[k], 1);
  }
  return d;
}

SymTensor2 strain_from(const ElementGeometry& g, const Triangle& t, const Eigen::VectorXd& u) {
  double dxx = 0.0, dyy = 0.0, dxy = 0.0, dyx = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double ux = u[2 * t.v[k]], uy = u[2 * t.v[k] + 1];
    dxx += ux * g.grad[k][0];
    dxy += ux * g.grad[k][1];
    dyx += uy * g.grad[k][0];
    dyy += uy * g.grad[k][1];
  }
  return {dxx, dyy, 0.5 * (dxy + dyx)};
}

void check_field(const Mesh& mesh, const DisplacementField& u) {
  if (u.values.size() != 2 * mesh.node_count())
    throw InputError("displacement field size does not match the mesh");
}

}  // namespace

DofMap DofMap::build(const Mesh& mesh) {
  DofMap map;
  map.dof_count = 2 * mesh.node_count();
  map.dirichlet.assign(map.dof_count, false);
  map.free_index.assign(map.dof_count, -1);
  const auto fixed = dirichlet_nodes(mesh);
  for (int n = 0; n < mesh.node_count(); ++n)
    if (fixed[n]) map.dirichlet[dof(n, 0)] = map.dirichlet[dof(n, 1)] = true;
  for (int d = 0; d < map.dof_count; ++d) {
    if (map.dirichlet[d]) continue;
    map.free_index[d] = static_cast<int>(map.free_dofs.size());
    map.free_dofs.push_back(d);
  }
  return map;
}

DisplacementField DisplacementField::zero(MeshPtr mesh) {
  DisplacementField f;
  f.values = Eigen::VectorXd::Zero(2 * mesh->node_count());
  f.mesh = std::move(mesh);
  return f;
}

ElementGeometry element_geometry(const Mesh& mesh, const Triangle& t) {
  const Point& p0 = mesh.nodes[t.v[0]];
  const Point& p1 = mesh.nodes[t.v[1]];
  const Point& p2 = mesh.nodes[t.v[2]];
  const double two_a = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
  const double diam2 = std::max({(p1.x - p0.x) * (p1.x - p0.x) + (p1.y - p0.y) * (p1.y - p0.y),
                                 (p2.x - p0.x) * (p2.x - p0.x) + (p2.y - p0.y) * (p2.y - p0.y),
                                 (p2.x - p1.x) * (p2.x - p1.x) + (p2.y - p1.y) * (p2.y - p1.y)});
  if (!(std::abs(two_a) > 1e-14 * diam2)) throw InputError("degenerate triangle");
  ElementGeometry g;
  g.area = 0.5 * std::abs(two_a);
  g.grad[0] = {(p1.y - p2.y) / two_a, (p2.x - p1.x) / two_a};
  g.grad[1] = {(p2.y - p0.y) / two_a, (p0.x - p2.x) / two_a};
  g.grad[2] = {(p0.y - p1.y) / two_a, (p1.x - p0.x) / two_a};
  return g;
}

VIProblem::VIProblem(ProblemData data) : data_(std::move(data)) {
  if (!data_.mesh) throw InputError("problem has no mesh");
  const Mesh& m = *data_.mesh;
  const int n_layers = m.layer_count();
  if (static_cast<int>(data_.materials.size()) != n_layers)
    throw InputError("material count must equal " + std::to_string(n_layers));
  if (static_cast<int>(data_.interfaces.size()) != n_layers - 1)
    throw InputError("interface law count must equal " + std::to_string(n_layers - 1));
  for (const auto& law : data_.materials) {
    law.validate();
    linear_ = linear_ && law.is_linear();
  }
  data_.foundation.validate();
  for (const auto& law : data_.interfaces) law.validate();
  const auto issues = audit_mesh(m);
  if (!issues.empty()) throw InputError("mesh audit failed: " + issues.front());

  dofs_ = DofMap::build(m);
  geometry_.reserve(m.triangles.size());
  for (const auto& t : m.triangles) geometry_.push_back(element_geometry(m, t));
  stiffness_ = assemble_matrix(nullptr);

  load_ = Eigen::VectorXd::Zero(dofs_.dof_count);
  if (data_.f0) {
    for (int e = 0; e < m.triangle_count(); ++e) {
      const Triangle& t = m.triangles[e];
      const double w = geometry_[e].area / 3.0;
      for (int q = 0; q < 3; ++q) {
        const int a = t.v[q], b = t.v[(q + 1) % 3];
        const Point mid{0.5 * (m.nodes[a].x + m.nodes[b].x), 0.5 * (m.nodes[a].y + m.nodes[b].y)};
        const Vec2 f = data_.f0(mid, t.layer);
        for (int c = 0; c < 2; ++c) {
          load_[DofMap::dof(a, c)] += 0.5 * w * f[c];
          load_[DofMap::dof(b, c)] += 0.5 * w * f[c];
        }
      }
    }
  }
  if (data_.f2) {
    for (const auto& e : m.boundary_edges) {
      if (e.layer != 0 || e.tag != BoundaryTag::Top) continue;
      const Point& pa = m.nodes[e.a];
      const Point& pb = m.nodes[e.b];
      const double len = std::hypot(pb.x - pa.x, pb.y - pa.y);
      const Vec2 f = data_.f2({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
      for (int c = 0; c < 2; ++c) {
        load_[DofMap::dof(e.a, c)] += 0.5 * len * f[c];
        load_[DofMap::dof(e.b, c)] += 0.5 * len * f[c];
      }
    }
  }
  for (int d = 0; d < dofs_.dof_count; ++d)
    if (dofs_.dirichlet[d]) load_[d] = 0.0;

  foundation_nodes_ = tagged_nodes(m, n_layers - 1, BoundaryTag::Bottom);
  const auto fw = boundary_node_weights(m, n_layers - 1, BoundaryTag::Bottom);
  for (int n : foundation_nodes_) foundation_weights_.push_back(fw[n]);

  interface_weights_.resize(m.interface_pairs.size());
  for (std::size_t i = 0; i < m.interface_pairs.size(); ++i) {
    const auto w = boundary_node_weights(m, static_cast<int>(i), BoundaryTag::Bottom);
    for (std::size_t k = 0; k < m.interface_pairs[i].size(); ++k) {
      const auto [a, b] = m.interface_pairs[i][k];
      interface_weights_[i].push_back(w[a]);
      constraint_rows_.push_back({static_cast<int>(i), static_cast<int>(k), DofMap::dof(a, 1),
                                  DofMap::dof(b, 1)});
    }
  }
}

SparseMatrix VIProblem::assemble_matrix(const Eigen::VectorXd* u) const {
  const Mesh& m = *data_.mesh;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(36 * m.triangles.size());
  for (int e = 0; e < m.triangle_count(); ++e) {
    const Triangle& t = m.triangles[e];
    const MaterialLaw& law = data_.materials[t.layer];
    const SymTensor2 eps = u ? strain_from(geometry_[e], t, *u) : SymTensor2{};
    const Matrix36 b = strain_matrix(geometry_[e]);
    const Eigen::Matrix<double, 6, 6> ke =
        geometry_[e].area * b.transpose() * tangent_mandel(law, eps) * b;
    const auto d = element_dofs(t);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c) trips.emplace_back(d[r], d[c], ke(r, c));
  }
  SparseMatrix k(dofs_.dof_count, dofs_.dof_count);
  k.setFromTriplets(trips.begin(), trips.end());
  return k;
}

Eigen::VectorXd VIProblem::internal_force(const Eigen::VectorXd& u) const {
  if (linear_) return stiffness_ * u;
  const Mesh& m = *data_.mesh;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(dofs_.dof_count);
  for (int e = 0; e < m.triangle_count(); ++e) {
    const Triangle& t = m.triangles[e];
    const SymTensor2 sig = stress_of_strain(data_.materials[t.layer], strain_from(geometry_[e], t, u));
    const Eigen::Matrix<double, 6, 1> fe =
        geometry_[e].area * strain_matrix(geometry_[e]).transpose() * sig.mandel();
    const auto d = element_dofs(t);
    for (int r = 0; r < 6; ++r) f[d[r]] += fe[r];
  }
  return f;
}

SparseMatrix VIProblem::tangent(const Eigen::VectorXd& u) const {
  if (linear_) return stiffness_;
  return assemble_matrix(&u);
}

double VIProblem::strain_energy(const Eigen::VectorXd& u) const {
  if (linear_) return 0.5 * u.dot(stiffness_ * u);
  const Mesh& m = *data_.mesh;
  double w = 0.0;
  for (int e = 0; e < m.triangle_count(); ++e) {
    const Triangle& t = m.triangles[e];
    w += geometry_[e].area *
         strain_energy_density(data_.materials[t.layer], strain_from(geometry_[e], t, u));
  }
  return w;
}

SymTensor2 VIProblem::element_strain(int tri, const Eigen::VectorXd& u) const {
  return strain_from(geometry_.at(tri), mesh().triangles[tri], u);
}

SymTensor2 strain(const Mesh& mesh, int tri, const DisplacementField& u) {
  if (tri < 0 || tri >= mesh.triangle_count()) throw InputError("triangle index out of range");
  check_field(mesh, u);
  const Triangle& t = mesh.triangles[tri];
  return strain_from(element_geometry(mesh, t), t, u.values);
}

namespace {
void check_interface(const Mesh& mesh, int interface) {
  if (interface < 0 || interface >= static_cast<int>(mesh.interface_pairs.size()))
    throw InputError("interface index out of range");
}
}  // namespace

std::vector<double> jump_normal(const Mesh& mesh, const DisplacementField& u, int interface) {
  check_interface(mesh, interface);
  check_field(mesh, u);
  std::vector<double> out;
  for (const auto& [a, b] : mesh.interface_pairs[interface]) out.push_back(u.uy(b) - u.uy(a));
  return out;
}

std::vector<double> jump_tangential(const Mesh& mesh, const DisplacementField& u, int interface) {
  check_interface(mesh, interface);
  check_field(mesh, u);
  std::vector<double> out;
  for (const auto& [a, b] : mesh.interface_pairs[interface]) out.push_back(u.ux(a) - u.ux(b));
  return out;
}

std::vector<SymTensor2> element_stresses(const VIProblem& problem, const Eigen::VectorXd& u) {
  const Mesh& m = problem.mesh();
  std::vector<SymTensor2> out;
  out.reserve(m.triangles.size());
  for (int e = 0; e < m.triangle_count(); ++e)
    out.push_back(stress_of_strain(problem.data().materials[m.triangles[e].layer],
                                   problem.element_strain(e, u)));
  return out;
}

std::vector<SymTensor2> recover_nodal_stress(const VIProblem& problem, const Eigen::VectorXd& u,
                                             int layer, const std::vector<int>& nodes) {
  const Mesh& m = problem.mesh();
  std::vector<int> slot(m.node_count(), -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) slot[nodes[k]] = static_cast<int>(k);
  std::vector<SymTensor2> acc(nodes.size());
  std::vector<double> area(nodes.size(), 0.0);
  const auto& geo = problem.geometry();
  for (int e = 0; e < m.triangle_count(); ++e) {
    const Triangle& t = m.triangles[e];
    if (t.layer != layer) continue;
    bool touches = false;
    for (int v : t.v) touches = touches || slot[v] >= 0;
    if (!touches) continue;
    const SymTensor2 sig =
        stress_of_strain(problem.data().materials[t.layer], problem.element_strain(e, u));
    for (int v : t.v) {
      if (slot[v] < 0) continue;
      acc[slot[v]] = acc[slot[v]] + sig * geo[e].area;
      area[slot[v]] += geo[e].area;
    }
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (!(area[k] > 0.0)) throw InputError("node without an incident triangle in its layer");
    acc[k] = acc[k] * (1.0 / area[k]);
  }
  return acc;
}

namespace {

InterfaceStress recover_from_values(const VIProblem& problem, const Eigen::VectorXd& u,
                                    int interface) {
  const Mesh& m = problem.mesh();
  check_interface(m, interface);
  std::vector<int> nodes;
  for (const auto& pr : m.interface_pairs[interface]) nodes.push_back(pr.first);
  InterfaceStress out;
  for (const SymTensor2& s : recover_nodal_stress(problem, u, interface, nodes)) {
    out.normal.push_back(s.yy);
    out.tangential.push_back(-s.xy);
  }
  return out;
}

}  // namespace

InterfaceStress recover_interface_stress(const VIProblem& problem, const DisplacementField& u,
                                         int interface) {
  check_field(problem.mesh(), u);
  return recover_from_values(problem, u.values, interface);
}

FrozenFriction freeze_friction(const VIProblem& problem, const Eigen::VectorXd& p) {
  const Mesh& m = problem.mesh();
  const DofMap& dofs = problem.dofs();
  FrozenFriction f;
  f.linear = Eigen::VectorXd::Zero(dofs.dof_count);
  const FrictionLaw& fl = problem.data().foundation;
  const auto& fnodes = problem.foundation_nodes();
  for (std::size_t k = 0; k < fnodes.size(); ++k) {
    const int n = fnodes[k];
    const int dx = DofMap::dof(n, 0), dy = DofMap::dof(n, 1);
    if (dofs.dirichlet[dy]) continue;
    const double w = problem.foundation_weights()[k];
    const double gn = normal_compliance(fl, -p[dy]);
    f.linear[dy] -= w * gn;
    const double bound = w * friction_bound(fl, gn);
    if (bound > 0.0) f.abs_terms.push_back({dx, -1, bound});
  }
  for (std::size_t i = 0; i < m.interface_pairs.size(); ++i) {
    const FrictionLaw& law = problem.data().interfaces[i];
    if (law.mu == 0.0) continue;
    const InterfaceStress s = recover_from_values(problem, p, static_cast<int>(i));
    for (std::size_t k = 0; k < m.interface_pairs[i].size(); ++k) {
      const auto [a, b] = m.interface_pairs[i][k];
      if (dofs.dirichlet[DofMap::dof(a, 0)]) continue;
      const double bound =
          problem.interface_weights()[i][k] * friction_bound(law, std::max(0.0, -s.normal[k]));
      if (bound > 0.0) f.abs_terms.push_back({DofMap::dof(a, 0), DofMap::dof(b, 0), bound});
    }
  }
  return f;
}

double eval_frozen(const FrozenFriction& f, const Eigen::VectorXd& w) {
  double j = f.linear.dot(w);
  for (const auto& t : f.abs_terms) j += t.weight * std::abs(t.j < 0 ? w[t.i] : w[t.i] - w[t.j]);
  return j;
}

double eval_j(const VIProblem& problem, const DisplacementField& p, const DisplacementField& w) {
  if (p.mesh.get() != problem.mesh_ptr().get() || w.mesh.get() != problem.mesh_ptr().get())
    throw InputError("fields live on different meshes");
  return eval_frozen(freeze_friction(problem, p.values), w.values);
}

DisplacementField interpolate_nodal(const MeshPtr& mesh, const AnalyticField& field) {
  DisplacementField u = DisplacementField::zero(mesh);
  for (int n = 0; n < mesh->node_count(); ++n) {
    const Vec2 v = field.value(mesh->nodes[n], mesh->node_layer[n]);
    u.values[2 * n] = v[0];
    u.values[2 * n + 1] = v[1];
  }
  return u;
}

double energy_norm(const Mesh& mesh, const Eigen::VectorXd& u) {
  if (u.size() != 2 * mesh.node_count())
    throw InputError("displacement field size does not match the mesh");
  double s = 0.0;
  for (const auto& t : mesh.triangles) {
    const ElementGeometry g = element_geometry(mesh, t);
    const double r = strain_from(g, t, u).norm();
    s += g.area * r * r;
  }
  return std::sqrt(s);
}

double energy_norm(const VIProblem& problem, const DisplacementField& u) {
  check_field(problem.mesh(), u);
  double s = 0.0;
  const auto& geo = problem.geometry();
  for (int e = 0; e < problem.mesh().triangle_count(); ++e) {
    const double r = problem.element_strain(e, u.values).norm();
    s += geo[e].area * r * r;
  }
  return std::sqrt(s);
}

double interpolation_error(const Mesh& mesh, const AnalyticField& field) {
  if (!field.gradient) throw InputError("interpolation_error needs the field gradient");
  static constexpr double a = 0.445948490915965, wa = 0.223381589678011;
  static constexpr double b = 0.091576213509771, wb = 0.109951743655322;
  static constexpr std::array<std::array<double, 4>, 6> rule{{{a, a, 1 - 2 * a, wa},
                                                             {a, 1 - 2 * a, a, wa},
                                                             {1 - 2 * a, a, a, wa},
                                                             {b, b, 1 - 2 * b, wb},
                                                             {b, 1 - 2 * b, b, wb},
                                                             {1 - 2 * b, b, b, wb}}};
  Eigen::VectorXd nodal(2 * mesh.node_count());
  for (int n = 0; n < mesh.node_count(); ++n) {
    const Vec2 v = field.value(mesh.nodes[n], mesh.node_layer[n]);
    nodal[2 * n] = v[0];
    nodal[2 * n + 1] = v[1];
  }
  double s = 0.0;
  for (const auto& t : mesh.triangles) {
    const ElementGeometry g = element_geometry(mesh, t);
    const SymTensor2 eh = strain_from(g, t, nodal);
    for (const auto& q : rule) {
      Point x{0.0, 0.0};
      for (int k = 0; k < 3; ++k) {
        x.x += q[k] * mesh.nodes[t.v[k]].x;
        x.y += q[k] * mesh.nodes[t.v[k]].y;
      }
      const auto gr = field.gradient(x, t.layer);
      const SymTensor2 e{gr[0][0], gr[1][1], 0.5 * (gr[0][1] + gr[1][0])};
      const double r = (e - eh).norm();
      s += q[3] * g.area * r * r;
    }
  }
  return std::sqrt(s);
}

namespace {
void check_nested(const Mesh& coarse, const Mesh& fine) {
  if (fine.node_count() < coarse.node_count() || fine.parents.size() != fine.nodes.size())
    throw InputError("meshes are not nested");
  for (int n = 0; n < coarse.node_count(); ++n)
    if (!(fine.nodes[n] == coarse.nodes[n])) throw InputError("meshes are not nested");
}
}  // namespace

DisplacementField prolongate(const DisplacementField& coarse, const MeshPtr& fine) {
  check_nested(*coarse.mesh, *fine);
  check_field(*coarse.mesh, coarse);
  DisplacementField out = DisplacementField::zero(fine);
  const int nc = coarse.mesh->node_count();
  out.values.head(2 * nc) = coarse.values;
  for (int n = nc; n < fine->node_count(); ++n) {
    const auto [p, q] = fine->parents[n];
    if (p >= n || q >= n) throw InputError("meshes are not nested");
    for (int c = 0; c < 2; ++c)
      out.values[2 * n + c] = 0.5 * (out.values[2 * p + c] + out.values[2 * q + c]);
  }
  return out;
}

DisplacementField restrict_to(const DisplacementField& fine, const MeshPtr& coarse) {
  check_nested(*coarse, *fine.mesh);
  check_field(*fine.mesh, fine);
  DisplacementField out = DisplacementField::zero(coarse);
  out.values = fine.values.head(2 * coarse->node_count());
  return out;
}

}  // namespace layervi
