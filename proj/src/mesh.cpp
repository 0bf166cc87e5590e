#include "layervi/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "layervi/error.hpp"
#include "layervi/text_format.hpp"

namespace layervi {

const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::Dirichlet: return "G1";
    case BoundaryTag::Top: return "G2";
    case BoundaryTag::Bottom: return "G3";
  }
  return "?";
}

double Mesh::total_thickness() const {
  double t = 0.0;
  for (const auto& l : layers) t += l.thickness;
  return t;
}

double triangle_area(const Mesh& mesh, const Triangle& t) {
  const Point& p0 = mesh.nodes[t.v[0]];
  const Point& p1 = mesh.nodes[t.v[1]];
  const Point& p2 = mesh.nodes[t.v[2]];
  return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
}

double triangle_diameter(const Mesh& mesh, const Triangle& t) {
  double d = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Point& a = mesh.nodes[t.v[k]];
    const Point& b = mesh.nodes[t.v[(k + 1) % 3]];
    d = std::max(d, std::hypot(b.x - a.x, b.y - a.y));
  }
  return d;
}

namespace {

double max_diameter(const Mesh& mesh) {
  double h = 0.0;
  for (const auto& t : mesh.triangles) h = std::max(h, triangle_diameter(mesh, t));
  return h;
}

// Pair the bottom row of layer i with the top row of layer i+1 by grid column.
void rebuild_interface_pairs(Mesh& mesh) {
  const int n = mesh.layer_count();
  mesh.interface_pairs.assign(n > 0 ? n - 1 : 0, {});
  for (int i = 0; i + 1 < n; ++i) {
    const int nx = mesh.layers[i].nx;
    std::vector<int> upper(nx + 1, -1), lower(nx + 1, -1);
    for (int v = 0; v < mesh.node_count(); ++v) {
      const auto [ix, iy] = mesh.node_grid[v];
      if (mesh.node_layer[v] == i && iy == 0) upper[ix] = v;
      if (mesh.node_layer[v] == i + 1 && iy == mesh.layers[i + 1].ny) lower[ix] = v;
    }
    auto& pairs = mesh.interface_pairs[i];
    for (int ix = 0; ix <= nx; ++ix) pairs.emplace_back(upper[ix], lower[ix]);
  }
}

}  // namespace

Mesh build_layered_mesh(const std::vector<LayerSpec>& specs, int nx) {
  if (specs.empty()) throw InputError("build_layered_mesh: no layers");
  if (nx < 1) throw InputError("build_layered_mesh: nx must be >= 1");
  const double width = specs.front().width;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (!(s.width > 0.0) || !(s.thickness > 0.0) || s.ny < 1)
      throw InputError("build_layered_mesh: layer " + std::to_string(i) +
                       " has non-positive width, thickness or ny");
    if (s.width != width)
      throw InputError("build_layered_mesh: inconsistent widths across layers");
  }

  Mesh mesh;
  mesh.width = width;
  double total = 0.0;
  for (const auto& s : specs) total += s.thickness;

  double top = total;
  for (std::size_t li = 0; li < specs.size(); ++li) {
    const auto& s = specs[li];
    const int layer = static_cast<int>(li);
    const double y0 = top - s.thickness;
    mesh.layers.push_back({nx, s.ny, y0, s.thickness});
    const int base = mesh.node_count();
    auto id = [&](int ix, int iy) { return base + iy * (nx + 1) + ix; };
    for (int iy = 0; iy <= s.ny; ++iy) {
      // the top row reuses `top` so coincident interface nodes are bit-identical
      const double y = (iy == s.ny) ? top : y0 + s.thickness * iy / s.ny;
      for (int ix = 0; ix <= nx; ++ix) {
        const double x = (ix == nx) ? width : width * ix / nx;
        mesh.nodes.push_back({x, y});
        mesh.node_layer.push_back(layer);
        mesh.node_grid.push_back({ix, iy});
      }
    }
    for (int iy = 0; iy < s.ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const int a = id(ix, iy), b = id(ix + 1, iy), c = id(ix + 1, iy + 1), d = id(ix, iy + 1);
        mesh.triangles.push_back({{a, b, c}, layer});
        mesh.triangles.push_back({{a, c, d}, layer});
      }
    }
    for (int ix = 0; ix < nx; ++ix) {
      mesh.boundary_edges.push_back({id(ix, s.ny), id(ix + 1, s.ny), layer, BoundaryTag::Top});
      mesh.boundary_edges.push_back({id(ix, 0), id(ix + 1, 0), layer, BoundaryTag::Bottom});
    }
    for (int iy = 0; iy < s.ny; ++iy) {
      mesh.boundary_edges.push_back({id(0, iy), id(0, iy + 1), layer, BoundaryTag::Dirichlet});
      mesh.boundary_edges.push_back({id(nx, iy), id(nx, iy + 1), layer, BoundaryTag::Dirichlet});
    }
    top = y0;
  }
  mesh.parents.resize(mesh.nodes.size());
  for (int v = 0; v < mesh.node_count(); ++v) mesh.parents[v] = {v, v};
  rebuild_interface_pairs(mesh);
  mesh.h = max_diameter(mesh);
  return mesh;
}

Mesh refine_uniform(const Mesh& mesh) {
  Mesh fine;
  fine.width = mesh.width;
  fine.h = 0.5 * mesh.h;
  fine.layers = mesh.layers;
  for (auto& l : fine.layers) {
    l.nx *= 2;
    l.ny *= 2;
  }
  fine.nodes = mesh.nodes;
  fine.node_layer = mesh.node_layer;
  fine.node_grid.reserve(mesh.node_grid.size() * 4);
  for (const auto& g : mesh.node_grid) fine.node_grid.push_back({2 * g[0], 2 * g[1]});
  fine.parents = mesh.parents;

  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = fine.node_count();
    const Point& p = mesh.nodes[key.first];
    const Point& q = mesh.nodes[key.second];
    fine.nodes.push_back({0.5 * (p.x + q.x), 0.5 * (p.y + q.y)});
    fine.node_layer.push_back(mesh.node_layer[a]);
    fine.node_grid.push_back({mesh.node_grid[a][0] + mesh.node_grid[b][0],
                              mesh.node_grid[a][1] + mesh.node_grid[b][1]});
    fine.parents.push_back({key.first, key.second});
    midpoint.emplace(key, id);
    return id;
  };

  fine.triangles.reserve(mesh.triangles.size() * 4);
  for (const auto& t : mesh.triangles) {
    const int a = t.v[0], b = t.v[1], c = t.v[2];
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    fine.triangles.push_back({{a, ab, ca}, t.layer});
    fine.triangles.push_back({{ab, b, bc}, t.layer});
    fine.triangles.push_back({{ca, bc, c}, t.layer});
    fine.triangles.push_back({{ab, bc, ca}, t.layer});
  }
  for (const auto& e : mesh.boundary_edges) {
    const int m = mid(e.a, e.b);
    fine.boundary_edges.push_back({e.a, m, e.layer, e.tag});
    fine.boundary_edges.push_back({m, e.b, e.layer, e.tag});
  }
  rebuild_interface_pairs(fine);
  return fine;
}

std::vector<int> tagged_nodes(const Mesh& mesh, int layer, BoundaryTag tag) {
  std::vector<char> mark(mesh.nodes.size(), 0);
  for (const auto& e : mesh.boundary_edges) {
    if (e.layer == layer && e.tag == tag) mark[e.a] = mark[e.b] = 1;
  }
  std::vector<int> out;
  for (int v = 0; v < mesh.node_count(); ++v)
    if (mark[v]) out.push_back(v);
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) {
    const Point& p = mesh.nodes[a];
    const Point& q = mesh.nodes[b];
    return p.x != q.x ? p.x < q.x : p.y < q.y;
  });
  return out;
}

std::vector<double> boundary_node_weights(const Mesh& mesh, int layer, BoundaryTag tag) {
  std::vector<double> w(mesh.nodes.size(), 0.0);
  for (const auto& e : mesh.boundary_edges) {
    if (e.layer != layer || e.tag != tag) continue;
    const Point& p = mesh.nodes[e.a];
    const Point& q = mesh.nodes[e.b];
    const double half = 0.5 * std::hypot(q.x - p.x, q.y - p.y);
    w[e.a] += half;
    w[e.b] += half;
  }
  return w;
}

std::vector<bool> dirichlet_nodes(const Mesh& mesh) {
  std::vector<bool> fixed(mesh.nodes.size(), false);
  for (const auto& e : mesh.boundary_edges) {
    if (e.tag == BoundaryTag::Dirichlet) fixed[e.a] = fixed[e.b] = true;
  }
  return fixed;
}

std::vector<std::string> audit_mesh(const Mesh& mesh) {
  std::vector<std::string> out;
  auto report = [&](std::string msg) { out.push_back(std::move(msg)); };
  const int n = mesh.layer_count();
  const int nn = mesh.node_count();

  if (n == 0) {
    report("mesh has no layers");
    return out;
  }
  if (mesh.node_layer.size() != mesh.nodes.size() || mesh.node_grid.size() != mesh.nodes.size()) {
    report("node attribute tables do not match node count");
    return out;
  }

  // Element quality and diameter.
  double hmax = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    bool ok = true;
    for (int v : tri.v) {
      if (v < 0 || v >= nn) {
        report("triangle " + std::to_string(t) + " references missing node");
        ok = false;
      } else if (mesh.node_layer[v] != tri.layer) {
        report("triangle " + std::to_string(t) + " mixes layers");
        ok = false;
      }
    }
    if (!ok) continue;
    hmax = std::max(hmax, triangle_diameter(mesh, tri));
    const double area = triangle_area(mesh, tri);
    if (!(area >= kMinShapeRatio * mesh.h * mesh.h))
      report("triangle " + std::to_string(t) + " is degenerate (area " + std::to_string(area) + ")");
  }
  if (std::abs(hmax - mesh.h) > 1e-12 * std::max(1.0, mesh.h))
    report("h does not equal the maximum element diameter");

  // Conformity: every edge is shared by two triangles of a layer or is a
  // boundary edge of that layer carrying exactly one tag.
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const auto key = std::minmax(tri.v[k], tri.v[(k + 1) % 3]);
      ++edge_use[key];
    }
  }
  std::map<std::pair<int, int>, int> tag_use;
  for (const auto& e : mesh.boundary_edges) ++tag_use[std::minmax(e.a, e.b)];
  for (const auto& [key, count] : edge_use) {
    if (count > 2) {
      report("edge " + std::to_string(key.first) + "-" + std::to_string(key.second) +
             " shared by more than two triangles");
    } else if (count == 1 && tag_use.count(key) == 0) {
      // either a hanging node or an untagged piece of the layer boundary
      report("boundary edge " + std::to_string(key.first) + "-" + std::to_string(key.second) +
             " carries no tag");
    }
  }
  for (const auto& [key, count] : tag_use) {
    auto it = edge_use.find(key);
    if (it == edge_use.end() || it->second != 1)
      report("tagged edge " + std::to_string(key.first) + "-" + std::to_string(key.second) +
             " is not a boundary edge");
    if (count > 1)
      report("edge " + std::to_string(key.first) + "-" + std::to_string(key.second) +
             " carries more than one tag");
  }

  // Tag placement and boundary decomposition per layer.
  std::vector<std::array<double, 3>> measure(n, {0.0, 0.0, 0.0});
  for (const auto& e : mesh.boundary_edges) {
    if (e.layer < 0 || e.layer >= n) {
      report("boundary edge references missing layer");
      continue;
    }
    const auto& lg = mesh.layers[e.layer];
    const Point& p = mesh.nodes[e.a];
    const Point& q = mesh.nodes[e.b];
    const double top = lg.y_bottom + lg.thickness;
    const double tol = 1e-12 * std::max(mesh.width, top);
    bool placed = false;
    switch (e.tag) {
      case BoundaryTag::Dirichlet:
        placed = (std::abs(p.x) <= tol && std::abs(q.x) <= tol) ||
                 (std::abs(p.x - mesh.width) <= tol && std::abs(q.x - mesh.width) <= tol);
        break;
      case BoundaryTag::Top:
        placed = std::abs(p.y - top) <= tol && std::abs(q.y - top) <= tol;
        break;
      case BoundaryTag::Bottom:
        placed = std::abs(p.y - lg.y_bottom) <= tol && std::abs(q.y - lg.y_bottom) <= tol;
        break;
    }
    if (!placed)
      report(std::string("edge tagged ") + to_string(e.tag) + " of layer " +
             std::to_string(e.layer + 1) + " is off its boundary part");
    measure[e.layer][static_cast<int>(e.tag)] += std::hypot(q.x - p.x, q.y - p.y);
  }
  for (int i = 0; i < n; ++i) {
    const auto& lg = mesh.layers[i];
    const std::string li = std::to_string(i + 1);
    if (measure[i][0] <= 0.0) {
      report("meas(G1^" + li + ") = 0");
    } else if (std::abs(measure[i][0] - 2.0 * lg.thickness) > 1e-10 * lg.thickness) {
      report("G1^" + li + " does not cover both vertical sides");
    }
    if (std::abs(measure[i][1] - mesh.width) > 1e-10 * mesh.width)
      report("G2^" + li + " does not cover the top edge");
    if (std::abs(measure[i][2] - mesh.width) > 1e-10 * mesh.width)
      report("G3^" + li + " does not cover the bottom edge");
  }

  // Interface pairing: a bijection between G3^i and G2^{i+1} with coincident nodes.
  if (static_cast<int>(mesh.interface_pairs.size()) != n - 1) {
    report("interface pair table has wrong number of interfaces");
  } else {
    for (int i = 0; i + 1 < n; ++i) {
      const std::string li = std::to_string(i + 1);
      const auto upper = tagged_nodes(mesh, i, BoundaryTag::Bottom);
      const auto lower = tagged_nodes(mesh, i + 1, BoundaryTag::Top);
      std::map<int, int> seen_u, seen_l;
      for (const auto& [a, b] : mesh.interface_pairs[i]) {
        if (a < 0 || b < 0 || a >= nn || b >= nn) {
          report("interface " + li + " pair references missing node");
          continue;
        }
        ++seen_u[a];
        ++seen_l[b];
        if (a == b) report("interface " + li + " pair shares one node on both sides");
        if (!(mesh.nodes[a] == mesh.nodes[b]))
          report("interface pair coordinates differ at interface " + li + " (nodes " +
                 std::to_string(a) + ", " + std::to_string(b) + ")");
      }
      for (int v : upper)
        if (seen_u[v] != 1) report("G3^" + li + " node " + std::to_string(v) + " not paired exactly once");
      for (int v : lower)
        if (seen_l[v] != 1)
          report("G2^" + std::to_string(i + 2) + " node " + std::to_string(v) + " not paired exactly once");
      if (seen_u.size() != upper.size() || seen_l.size() != lower.size())
        report("interface " + li + " pairs reference nodes off the interface");
    }
  }
  return out;
}

void write_mesh_text(std::ostream& os, const Mesh& mesh) {
  using text::num;
  os << "# layervi mesh v1\n";
  os << "# nodes: id x y layer ix iy | triangles: id a b c layer | edges: a b layer tag | pairs: interface a b\n";
  os << "width " << num(mesh.width) << "\n";
  os << "h " << num(mesh.h) << "\n";
  os << "layers " << mesh.layer_count() << "\n";
  for (int i = 0; i < mesh.layer_count(); ++i) {
    const auto& l = mesh.layers[i];
    os << i << ' ' << l.nx << ' ' << l.ny << ' ' << num(l.y_bottom) << ' ' << num(l.thickness) << "\n";
  }
  os << "nodes " << mesh.node_count() << "\n";
  for (int v = 0; v < mesh.node_count(); ++v) {
    os << v << ' ' << num(mesh.nodes[v].x) << ' ' << num(mesh.nodes[v].y) << ' ' << mesh.node_layer[v]
       << ' ' << mesh.node_grid[v][0] << ' ' << mesh.node_grid[v][1] << "\n";
  }
  os << "triangles " << mesh.triangle_count() << "\n";
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    os << t << ' ' << tri.v[0] << ' ' << tri.v[1] << ' ' << tri.v[2] << ' ' << tri.layer << "\n";
  }
  os << "edges " << mesh.boundary_edges.size() << "\n";
  for (const auto& e : mesh.boundary_edges)
    os << e.a << ' ' << e.b << ' ' << e.layer << ' ' << to_string(e.tag) << "\n";
  std::size_t npairs = 0;
  for (const auto& p : mesh.interface_pairs) npairs += p.size();
  os << "pairs " << npairs << "\n";
  for (std::size_t i = 0; i < mesh.interface_pairs.size(); ++i)
    for (const auto& [a, b] : mesh.interface_pairs[i]) os << i << ' ' << a << ' ' << b << "\n";
}

namespace {

std::string next_data_line(std::istream& is) {
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') return line;
  }
  throw InputError("mesh text: unexpected end of input");
}

template <class... Ts>
void parse_fields(const std::string& line, Ts&... fields) {
  std::istringstream ss(line);
  ss.imbue(std::locale::classic());
  (ss >> ... >> fields);
  if (!ss) throw InputError("mesh text: malformed line '" + line + "'");
}

std::size_t expect_count(std::istream& is, const std::string& keyword) {
  std::string key;
  std::size_t count = 0;
  parse_fields(next_data_line(is), key, count);
  if (key != keyword) throw InputError("mesh text: expected '" + keyword + "', got '" + key + "'");
  return count;
}

}  // namespace

Mesh read_mesh_text(std::istream& is) {
  Mesh mesh;
  std::string key;
  parse_fields(next_data_line(is), key, mesh.width);
  if (key != "width") throw InputError("mesh text: expected 'width'");
  parse_fields(next_data_line(is), key, mesh.h);
  if (key != "h") throw InputError("mesh text: expected 'h'");
  const std::size_t nl = expect_count(is, "layers");
  for (std::size_t i = 0; i < nl; ++i) {
    int id = 0;
    LayerGrid l;
    parse_fields(next_data_line(is), id, l.nx, l.ny, l.y_bottom, l.thickness);
    mesh.layers.push_back(l);
  }
  const std::size_t nn = expect_count(is, "nodes");
  for (std::size_t v = 0; v < nn; ++v) {
    int id = 0, layer = 0, ix = 0, iy = 0;
    Point p;
    parse_fields(next_data_line(is), id, p.x, p.y, layer, ix, iy);
    mesh.nodes.push_back(p);
    mesh.node_layer.push_back(layer);
    mesh.node_grid.push_back({ix, iy});
    mesh.parents.push_back({id, id});
  }
  const std::size_t nt = expect_count(is, "triangles");
  for (std::size_t t = 0; t < nt; ++t) {
    int id = 0;
    Triangle tri;
    parse_fields(next_data_line(is), id, tri.v[0], tri.v[1], tri.v[2], tri.layer);
    mesh.triangles.push_back(tri);
  }
  const std::size_t ne = expect_count(is, "edges");
  for (std::size_t k = 0; k < ne; ++k) {
    BoundaryEdge e;
    std::string tag;
    parse_fields(next_data_line(is), e.a, e.b, e.layer, tag);
    if (tag == "G1") e.tag = BoundaryTag::Dirichlet;
    else if (tag == "G2") e.tag = BoundaryTag::Top;
    else if (tag == "G3") e.tag = BoundaryTag::Bottom;
    else throw InputError("mesh text: unknown tag '" + tag + "'");
    mesh.boundary_edges.push_back(e);
  }
  const std::size_t np = expect_count(is, "pairs");
  mesh.interface_pairs.assign(nl > 0 ? nl - 1 : 0, {});
  for (std::size_t k = 0; k < np; ++k) {
    std::size_t i = 0;
    int a = 0, b = 0;
    parse_fields(next_data_line(is), i, a, b);
    if (i >= mesh.interface_pairs.size()) throw InputError("mesh text: pair on missing interface");
    mesh.interface_pairs[i].emplace_back(a, b);
  }
  return mesh;
}

}  // namespace layervi
