#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace layervi {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Role of a boundary edge of one layer.
///   Dirichlet: the two vertical sides, displacement fixed to zero.
///   Top:       upper edge; loaded by the traction on layer 0, contact side otherwise.
///   Bottom:    lower edge; contact with the next layer, or with the foundation for the last one.
enum class BoundaryTag { Dirichlet, Top, Bottom };

const char* to_string(BoundaryTag tag);

struct LayerSpec {
  double width = 0.0;
  double thickness = 0.0;
  int ny = 0;
};

struct Triangle {
  std::array<int, 3> v{};  // counter-clockwise
  int layer = 0;
};

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  int layer = 0;
  BoundaryTag tag = BoundaryTag::Dirichlet;
};

/// Structured grid of a single layer. Layer 0 is the top of the stack.
struct LayerGrid {
  int nx = 0;
  int ny = 0;
  double y_bottom = 0.0;
  double thickness = 0.0;
};

/// Conforming P1 triangulation of an n-layer rectangular stack.
///
/// Each layer owns its nodes; nodes on a shared interface are duplicated so the
/// two sides carry independent degrees of freedom. interface_pairs[i] lists
/// (node on the bottom of layer i, node on the top of layer i+1) ordered by x.
///
/// Refinement appends midpoint nodes after the existing ones, so the first
/// nodes of a refined mesh are exactly the nodes of its parent. parents[n] holds
/// the two endpoints of the coarse edge that created node n, kept across later
/// refinements; nodes of the initial grid hold (n, n).
struct Mesh {
  double width = 0.0;
  double h = 0.0;
  std::vector<LayerGrid> layers;
  std::vector<Point> nodes;
  std::vector<int> node_layer;
  std::vector<std::array<int, 2>> node_grid;  // (ix, iy) within the layer grid
  std::vector<Triangle> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<std::vector<std::pair<int, int>>> interface_pairs;
  std::vector<std::array<int, 2>> parents;

  int layer_count() const { return static_cast<int>(layers.size()); }
  int node_count() const { return static_cast<int>(nodes.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  double total_thickness() const;
};

using MeshPtr = std::shared_ptr<const Mesh>;

/// Minimum of area / h^2 accepted by audit_mesh.
inline constexpr double kMinShapeRatio = 1e-3;

Mesh build_layered_mesh(const std::vector<LayerSpec>& layers, int nx);

/// Red refinement: every triangle splits into four similar children.
Mesh refine_uniform(const Mesh& mesh);

/// Empty iff every structural invariant holds.
std::vector<std::string> audit_mesh(const Mesh& mesh);

double triangle_area(const Mesh& mesh, const Triangle& t);
double triangle_diameter(const Mesh& mesh, const Triangle& t);

/// Nodes lying on a tagged edge of the given tag in the given layer, sorted by x.
std::vector<int> tagged_nodes(const Mesh& mesh, int layer, BoundaryTag tag);

/// Trapezoidal weights of the nodes of (layer, tag): half the length of each
/// adjacent tagged edge. Indexed by node; zero off the boundary part.
std::vector<double> boundary_node_weights(const Mesh& mesh, int layer, BoundaryTag tag);

/// True for nodes touching a Dirichlet edge.
std::vector<bool> dirichlet_nodes(const Mesh& mesh);

/// Plain-text serialization; see README for the layout.
void write_mesh_text(std::ostream& os, const Mesh& mesh);
Mesh read_mesh_text(std::istream& is);

}  // namespace layervi
