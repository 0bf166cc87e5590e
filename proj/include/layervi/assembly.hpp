#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "layervi/constitutive.hpp"
#include "layervi/mesh.hpp"

namespace layervi {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vec2 = std::array<double, 2>;

/// Two dofs per node: dof 2n is u_x, dof 2n+1 is u_y. Interface nodes are
/// duplicated in the mesh, so each side of an interface owns its own dofs.
struct DofMap {
  int dof_count = 0;
  std::vector<bool> dirichlet;  // per dof
  std::vector<int> free_index;  // dof -> position among free dofs, -1 if fixed
  std::vector<int> free_dofs;   // free position -> dof

  static DofMap build(const Mesh& mesh);
  static int dof(int node, int comp) { return 2 * node + comp; }
  int free_count() const { return static_cast<int>(free_dofs.size()); }
};

struct DisplacementField {
  MeshPtr mesh;
  Eigen::VectorXd values;  // 2 per node

  static DisplacementField zero(MeshPtr mesh);
  double ux(int node) const { return values[2 * node]; }
  double uy(int node) const { return values[2 * node + 1]; }
};

/// Body force per layer (force/volume) and traction on the top edge of layer 0 (force/area).
using BodyForce = std::function<Vec2(const Point&, int layer)>;
using Traction = std::function<Vec2(const Point&)>;

struct ProblemData {
  MeshPtr mesh;
  std::vector<MaterialLaw> materials;   // one per layer
  FrictionLaw foundation;               // bottom of the last layer
  std::vector<FrictionLaw> interfaces;  // one per interface, friction part only
  BodyForce f0;
  Traction f2;
};

struct ElementGeometry {
  double area = 0.0;
  std::array<Vec2, 3> grad{};  // gradients of the three barycentric basis functions
};

/// Nonpenetration row at one interface pair: u_y(lower) - u_y(upper) <= 0.
struct ConstraintRow {
  int interface = 0;
  int pair = 0;
  int upper_dof = 0;  // y dof of the node on the bottom of layer i
  int lower_dof = 0;  // y dof of the node on the top of layer i+1
};

/// Assembled discrete problem. All vectors are indexed by global dof.
class VIProblem {
 public:
  explicit VIProblem(ProblemData data);

  const Mesh& mesh() const { return *data_.mesh; }
  const MeshPtr& mesh_ptr() const { return data_.mesh; }
  const ProblemData& data() const { return data_; }
  const DofMap& dofs() const { return dofs_; }
  bool is_linear() const { return linear_; }
  const std::vector<ElementGeometry>& geometry() const { return geometry_; }

  /// Stiffness of the linear law, or the tangent at u = 0 for the perturbed law.
  const SparseMatrix& stiffness() const { return stiffness_; }
  /// L(v) = load . v; entries on Dirichlet dofs are zero.
  const Eigen::VectorXd& load() const { return load_; }

  /// Nodes on the foundation side with their trapezoidal weights.
  const std::vector<int>& foundation_nodes() const { return foundation_nodes_; }
  const std::vector<double>& foundation_weights() const { return foundation_weights_; }
  /// Trapezoidal weight of each pair of each interface.
  const std::vector<std::vector<double>>& interface_weights() const { return interface_weights_; }
  const std::vector<ConstraintRow>& constraint_rows() const { return constraint_rows_; }

  /// Gradient of the stored energy sum_T area W(eps_T).
  Eigen::VectorXd internal_force(const Eigen::VectorXd& u) const;
  SparseMatrix tangent(const Eigen::VectorXd& u) const;
  double strain_energy(const Eigen::VectorXd& u) const;

  SymTensor2 element_strain(int tri, const Eigen::VectorXd& u) const;

 private:
  SparseMatrix assemble_matrix(const Eigen::VectorXd* u) const;

  ProblemData data_;
  DofMap dofs_;
  bool linear_ = true;
  std::vector<ElementGeometry> geometry_;
  SparseMatrix stiffness_;
  Eigen::VectorXd load_;
  std::vector<int> foundation_nodes_;
  std::vector<double> foundation_weights_;
  std::vector<std::vector<double>> interface_weights_;
  std::vector<ConstraintRow> constraint_rows_;
};

ElementGeometry element_geometry(const Mesh& mesh, const Triangle& t);

SymTensor2 strain(const Mesh& mesh, int tri, const DisplacementField& u);

/// u_y on the top of layer i+1 minus u_y on the bottom of layer i, per pair.
std::vector<double> jump_normal(const Mesh& mesh, const DisplacementField& u, int interface);
/// u_x on the bottom of layer i minus u_x on the top of layer i+1, per pair.
std::vector<double> jump_tangential(const Mesh& mesh, const DisplacementField& u, int interface);

std::vector<SymTensor2> element_stresses(const VIProblem& problem, const Eigen::VectorXd& u);

/// Area-weighted average of the stresses of the layer's triangles incident to each node.
std::vector<SymTensor2> recover_nodal_stress(const VIProblem& problem, const Eigen::VectorXd& u,
                                             int layer, const std::vector<int>& nodes);

struct InterfaceStress {
  std::vector<double> normal;      // sigma_N = sigma_yy
  std::vector<double> tangential;  // sigma_T = -sigma_xy
};

/// Area-weighted average of the stresses of the upper-layer triangles at each
/// pair node, projected on the outward normal (0, -1) of the upper layer.
InterfaceStress recover_interface_stress(const VIProblem& problem, const DisplacementField& u,
                                         int interface);

/// Friction data with the bound argument p frozen:
///   j(p, w) = linear . w + sum_k weight_k |w[i_k] - w[j_k]|   (j_k < 0 means |w[i_k]|)
struct AbsTerm {
  int i = 0;
  int j = -1;
  double weight = 0.0;
};

struct FrozenFriction {
  Eigen::VectorXd linear;
  std::vector<AbsTerm> abs_terms;
};

/// Foundation: normal force weight*g_N(p_beta), bound weight*g_T(g_N(p_beta)).
/// Interface i: bound weight*g_T(max(0, -sigma_N(p))), with sigma_N recovered from layer i.
FrozenFriction freeze_friction(const VIProblem& problem, const Eigen::VectorXd& p);

double eval_frozen(const FrozenFriction& f, const Eigen::VectorXd& w);
double eval_j(const VIProblem& problem, const DisplacementField& p, const DisplacementField& w);

/// Vector field with its gradient, used for interpolation and exact error norms.
struct AnalyticField {
  std::function<Vec2(const Point&, int layer)> value;
  /// grad[c][d] = d u_c / d x_d; optional.
  std::function<std::array<Vec2, 2>(const Point&, int layer)> gradient;
};

DisplacementField interpolate_nodal(const MeshPtr& mesh, const AnalyticField& field);

/// ||u||_V = sqrt(sum_T area |eps_T|^2).
double energy_norm(const Mesh& mesh, const Eigen::VectorXd& u);
double energy_norm(const VIProblem& problem, const DisplacementField& u);

/// ||v - I_h v||_V using the analytic gradient with a 6-point quadrature per triangle.
double interpolation_error(const Mesh& mesh, const AnalyticField& field);

/// Nested P1 prolongation from the mesh of `coarse` to its refinement `fine`.
DisplacementField prolongate(const DisplacementField& coarse, const MeshPtr& fine);
/// Injection onto the first nodes of a nested coarse mesh.
DisplacementField restrict_to(const DisplacementField& fine, const MeshPtr& coarse);

}  // namespace layervi
