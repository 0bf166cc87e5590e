#include "layervi/cli_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "layervi/error.hpp"
#include "layervi/text_format.hpp"

namespace layervi {

namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

class SectionReader {
 public:
  SectionReader(std::string name, const pt::ptree& node) : name_(std::move(name)), node_(node) {
    std::set<std::string> seen;
    for (const auto& [key, child] : node_) {
      if (!child.empty()) throw InputError("[" + name_ + "] " + key + ": nested keys are not allowed");
      if (!seen.insert(key).second) throw InputError("[" + name_ + "] duplicate key " + key);
    }
  }

  bool has(const std::string& key) const { return node_.find(key) != node_.not_found(); }

  std::string word(const std::string& key) {
    const auto it = node_.find(key);
    if (it == node_.not_found()) throw InputError("[" + name_ + "] missing required key " + key);
    used_.insert(key);
    std::string v = it->second.data();
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.pop_back();
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.erase(v.begin());
    return v;
  }

  double real(const std::string& key) { return parse_real(key, word(key)); }

  int integer(const std::string& key) {
    const std::string v = word(key);
    int out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw InputError("[" + name_ + "] " + key + ": expected an integer, got '" + v + "'");
    return out;
  }

  std::vector<double> reals(const std::string& key, std::size_t count) {
    const auto words = split_ws(word(key));
    if (words.size() != count)
      throw InputError("[" + name_ + "] " + key + ": expected " + std::to_string(count) + " numbers");
    std::vector<double> out;
    for (const auto& w : words) out.push_back(parse_real(key, w));
    return out;
  }

  bool boolean(const std::string& key) {
    const std::string v = word(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw InputError("[" + name_ + "] " + key + ": expected true or false");
  }

  void finish() const {
    for (const auto& [key, child] : node_)
      if (!used_.count(key)) throw InputError("[" + name_ + "] unknown key " + key);
  }

  const std::string& name() const { return name_; }

 private:
  double parse_real(const std::string& key, const std::string& v) const {
    double out = 0.0;
    if (!text::parse_double(v, out) || !std::isfinite(out))
      throw InputError("[" + name_ + "] " + key + ": expected a finite number, got '" + v + "'");
    return out;
  }

  std::string name_;
  const pt::ptree& node_;
  std::set<std::string> used_;
};

MaterialLaw read_material(SectionReader& r) {
  MaterialLaw m;
  const std::string law = r.word("law");
  if (law == "linear") {
    m.kind = MaterialKind::LinearIsotropic;
  } else if (law == "perturbed") {
    m.kind = MaterialKind::PPerturbed;
    m.gamma = r.real("gamma");
  } else {
    throw InputError("[" + r.name() + "] law must be linear or perturbed");
  }
  m.lame_lambda = r.real("lambda");
  m.lame_mu = r.real("mu");
  return m;
}

void read_friction(SectionReader& r, FrictionLaw& f) {
  const std::string gt = r.word("g_t");
  if (gt == "coulomb") {
    f.gt_kind = FrictionKind::Coulomb;
  } else if (gt == "modified_coulomb") {
    f.gt_kind = FrictionKind::ModifiedCoulomb;
    f.delta = r.real("delta");
  } else {
    throw InputError("[" + r.name() + "] g_t must be coulomb or modified_coulomb");
  }
  f.mu = r.real("mu");
}

FrictionLaw read_foundation(SectionReader& r) {
  FrictionLaw f;
  const std::string gn = r.word("g_n");
  if (gn == "power") {
    f.gn_kind = ComplianceKind::Power;
    f.m_exp = r.real("m");
  } else if (gn == "capped") {
    f.gn_kind = ComplianceKind::Capped;
    f.r0 = r.real("r0");
  } else {
    throw InputError("[foundation] g_n must be power or capped");
  }
  f.c = r.real("c");
  read_friction(r, f);
  return f;
}

SolverConfig read_solver(SectionReader& r) {
  SolverConfig s;
  if (r.has("outer_tol")) s.outer_tol = r.real("outer_tol");
  if (r.has("outer_max_iters")) s.outer_max_iters = r.integer("outer_max_iters");
  if (r.has("inner_tol")) s.inner_tol = r.real("inner_tol");
  if (r.has("inner_max_iters")) s.inner_max_iters = r.integer("inner_max_iters");
  if (r.has("inner_method")) s.inner_method = inner_method_from_string(r.word("inner_method"));
  if (r.has("regularization_eps")) s.regularization_eps = r.real("regularization_eps");
  if (r.has("seed")) {
    const std::string v = r.word("seed");
    const auto res = std::from_chars(v.data(), v.data() + v.size(), s.seed);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw InputError("[solver] seed: expected a non-negative integer");
  }
  return s;
}

// Parses "name.K" into K, or returns -1 when the prefix does not match.
int indexed_section(const std::string& section, const std::string& prefix) {
  if (section.rfind(prefix + ".", 0) != 0) return -1;
  const std::string rest = section.substr(prefix.size() + 1);
  int k = -1;
  const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), k);
  if (rest.empty() || res.ec != std::errc() || res.ptr != rest.data() + rest.size() || k < 0)
    throw InputError("bad section name [" + section + "]");
  return k;
}

template <class T>
std::vector<T> contiguous(const std::map<int, T>& items, const std::string& what) {
  std::vector<T> out;
  for (const auto& [k, v] : items) {
    if (k != static_cast<int>(out.size()))
      throw InputError(what + " sections must be numbered 0, 1, 2, ... without gaps");
    out.push_back(v);
  }
  return out;
}

std::string vec_text(const Vec2& v) { return text::num(v[0]) + " " + text::num(v[1]); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ProblemConfig::validate() const {
  if (!(width > 0.0)) throw InputError("geometry: width must be > 0");
  if (nx < 1) throw InputError("geometry: nx must be >= 1");
  if (layers.empty()) throw InputError("at least one layer is required");
  for (const auto& l : layers) {
    if (!(l.thickness > 0.0)) throw InputError("layer: thickness must be > 0");
    if (l.ny < 1) throw InputError("layer: ny must be >= 1");
    l.material.validate();
  }
  if (interfaces.size() + 1 != layers.size())
    throw InputError("interface law count must equal " + std::to_string(layers.size() - 1));
  foundation.validate();
  for (const auto& f : interfaces) f.validate();
  if (loads.f0.size() != layers.size()) throw InputError("loads: one f0 per layer is required");
  if (loads.f2.has_value() == !loads.f2_table.empty())
    throw InputError("loads: give exactly one of f2 (with f2_extent) or f2_table");
  if (loads.f2) {
    const auto& e = loads.f2_extent;
    if (!(0.0 <= e[0] && e[0] < e[1] && e[1] <= width))
      throw InputError("loads: f2_extent must satisfy 0 <= x0 < x1 <= width");
  }
  for (std::size_t k = 1; k < loads.f2_table.size(); ++k)
    if (!(loads.f2_table[k][0] > loads.f2_table[k - 1][0]))
      throw InputError("loads: f2_table abscissae must increase strictly");
  solver.validate();
  if (output.prefix.empty() || output.prefix.find('/') != std::string::npos)
    throw InputError("output: prefix must be a plain file name stem");
}

Mesh ProblemConfig::build_mesh() const {
  std::vector<LayerSpec> spec;
  for (const auto& l : layers) spec.push_back({width, l.thickness, l.ny});
  return build_layered_mesh(spec, nx);
}

ProblemData ProblemConfig::problem_data(MeshPtr mesh) const {
  ProblemData d;
  d.mesh = std::move(mesh);
  for (const auto& l : layers) d.materials.push_back(l.material);
  d.foundation = foundation;
  d.interfaces = interfaces;
  const std::vector<Vec2> f0 = loads.f0;
  d.f0 = [f0](const Point&, int layer) { return f0[layer]; };
  if (loads.f2) {
    const Vec2 t = *loads.f2;
    const auto e = loads.f2_extent;
    d.f2 = [t, e](const Point& p) { return p.x >= e[0] && p.x <= e[1] ? t : Vec2{0.0, 0.0}; };
  } else {
    const auto table = loads.f2_table;
    d.f2 = [table](const Point& p) {
      if (table.size() == 1) return p.x == table[0][0] ? Vec2{table[0][1], table[0][2]} : Vec2{0, 0};
      if (p.x < table.front()[0] || p.x > table.back()[0]) return Vec2{0.0, 0.0};
      std::size_t k = 1;
      while (k + 1 < table.size() && table[k][0] < p.x) ++k;
      const auto& a = table[k - 1];
      const auto& b = table[k];
      const double s = (p.x - a[0]) / (b[0] - a[0]);
      return Vec2{a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])};
    };
  }
  return d;
}

ProblemConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }

  ProblemConfig cfg;
  std::map<int, LayerConfig> layers;
  std::map<int, FrictionLaw> interfaces;
  std::map<int, Vec2> f0;
  bool have_geometry = false, have_foundation = false, have_loads = false;

  for (const auto& [section, node] : tree) {
    if (node.empty() && !node.data().empty())
      throw InputError("config: key '" + section + "' outside of a section");
    SectionReader r(section, node);
    if (section == "geometry") {
      have_geometry = true;
      cfg.width = r.real("width");
      cfg.nx = r.integer("nx");
    } else if (int k = indexed_section(section, "layer"); k >= 0) {
      LayerConfig l;
      l.thickness = r.real("thickness");
      l.ny = r.integer("ny");
      l.material = read_material(r);
      layers[k] = l;
    } else if (int k2 = indexed_section(section, "interface"); k2 >= 0) {
      FrictionLaw f;
      read_friction(r, f);
      interfaces[k2] = f;
    } else if (section == "foundation") {
      have_foundation = true;
      cfg.foundation = read_foundation(r);
    } else if (section == "loads") {
      have_loads = true;
      for (const auto& [key, child] : node) {
        if (const int k3 = indexed_section(key, "f0"); k3 >= 0) {
          const auto v = r.reals(key, 2);
          f0[k3] = {v[0], v[1]};
        }
      }
      if (r.has("f2")) {
        const auto v = r.reals("f2", 2);
        cfg.loads.f2 = Vec2{v[0], v[1]};
        const auto e = r.reals("f2_extent", 2);
        cfg.loads.f2_extent = {e[0], e[1]};
      }
      if (r.has("f2_table")) {
        const auto v = split_ws(r.word("f2_table"));
        if (v.empty() || v.size() % 3 != 0)
          throw InputError("[loads] f2_table: expected triples 'x t_x t_y'");
        for (std::size_t i = 0; i < v.size(); i += 3) {
          std::array<double, 3> row{};
          for (int c = 0; c < 3; ++c)
            if (!text::parse_double(v[i + c], row[c]) || !std::isfinite(row[c]))
              throw InputError("[loads] f2_table: bad number '" + v[i + c] + "'");
          cfg.loads.f2_table.push_back(row);
        }
      }
    } else if (section == "solver") {
      cfg.solver = read_solver(r);
    } else if (section == "output") {
      if (r.has("prefix")) cfg.output.prefix = r.word("prefix");
      if (r.has("vtk")) cfg.output.vtk = r.boolean("vtk");
      if (r.has("csv")) cfg.output.csv = r.boolean("csv");
    } else {
      throw InputError("config: unknown section [" + section + "]");
    }
    r.finish();
  }
  if (!have_geometry) throw InputError("config: missing section [geometry]");
  if (!have_foundation) throw InputError("config: missing section [foundation]");
  if (!have_loads) throw InputError("config: missing section [loads]");
  cfg.layers = contiguous(layers, "layer");
  cfg.interfaces = contiguous(interfaces, "interface");
  cfg.loads.f0 = contiguous(f0, "f0");
  cfg.validate();
  return cfg;
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ProblemConfig& cfg) {
  std::ostringstream os;
  auto friction = [&](const FrictionLaw& f) {
    if (f.gt_kind == FrictionKind::Coulomb) {
      os << "g_t = coulomb\n";
    } else {
      os << "g_t = modified_coulomb\ndelta = " << text::num(f.delta) << "\n";
    }
    os << "mu = " << text::num(f.mu) << "\n";
  };
  os << "[geometry]\nwidth = " << text::num(cfg.width) << "\nnx = " << cfg.nx << "\n";
  for (std::size_t k = 0; k < cfg.layers.size(); ++k) {
    const auto& l = cfg.layers[k];
    os << "\n[layer." << k << "]\nthickness = " << text::num(l.thickness) << "\nny = " << l.ny << "\n";
    if (l.material.is_linear()) {
      os << "law = linear\n";
    } else {
      os << "law = perturbed\ngamma = " << text::num(l.material.gamma) << "\n";
    }
    os << "lambda = " << text::num(l.material.lame_lambda) << "\nmu = " << text::num(l.material.lame_mu)
       << "\n";
  }
  for (std::size_t k = 0; k < cfg.interfaces.size(); ++k) {
    os << "\n[interface." << k << "]\n";
    friction(cfg.interfaces[k]);
  }
  const FrictionLaw& f = cfg.foundation;
  os << "\n[foundation]\n";
  if (f.gn_kind == ComplianceKind::Power) {
    os << "g_n = power\nm = " << text::num(f.m_exp) << "\n";
  } else {
    os << "g_n = capped\nr0 = " << text::num(f.r0) << "\n";
  }
  os << "c = " << text::num(f.c) << "\n";
  friction(f);
  os << "\n[loads]\n";
  for (std::size_t k = 0; k < cfg.loads.f0.size(); ++k)
    os << "f0." << k << " = " << vec_text(cfg.loads.f0[k]) << "\n";
  if (cfg.loads.f2) {
    os << "f2 = " << vec_text(*cfg.loads.f2) << "\nf2_extent = " << text::num(cfg.loads.f2_extent[0])
       << " " << text::num(cfg.loads.f2_extent[1]) << "\n";
  } else {
    os << "f2_table =";
    for (const auto& row : cfg.loads.f2_table)
      os << " " << text::num(row[0]) << " " << text::num(row[1]) << " " << text::num(row[2]);
    os << "\n";
  }
  const SolverConfig& s = cfg.solver;
  os << "\n[solver]\nouter_tol = " << text::num(s.outer_tol) << "\nouter_max_iters = " << s.outer_max_iters
     << "\ninner_tol = " << text::num(s.inner_tol) << "\ninner_max_iters = " << s.inner_max_iters
     << "\ninner_method = " << to_string(s.inner_method)
     << "\nregularization_eps = " << text::num(s.regularization_eps) << "\nseed = " << s.seed << "\n";
  os << "\n[output]\nprefix = " << cfg.output.prefix << "\nvtk = " << (cfg.output.vtk ? "true" : "false")
     << "\ncsv = " << (cfg.output.csv ? "true" : "false") << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// VTK and CSV

void write_vtk(std::ostream& os, const Mesh& mesh, const VtkFields& fields) {
  const int n = mesh.node_count(), t = mesh.triangle_count();
  if (fields.displacement && fields.displacement->size() != 2 * n)
    throw InputError("write_vtk: displacement size does not match the mesh");
  if (fields.stress && static_cast<int>(fields.stress->size()) != t)
    throw InputError("write_vtk: stress size does not match the mesh");
  os << "# vtk DataFile Version 3.0\nlayervi\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << n << " double\n";
  for (const auto& p : mesh.nodes) os << text::num(p.x) << " " << text::num(p.y) << " 0\n";
  os << "CELLS " << t << " " << 4 * t << "\n";
  for (const auto& tri : mesh.triangles) os << "3 " << tri.v[0] << " " << tri.v[1] << " " << tri.v[2] << "\n";
  os << "CELL_TYPES " << t << "\n";
  for (int k = 0; k < t; ++k) os << "5\n";
  os << "CELL_DATA " << t << "\nSCALARS layer int 1\nLOOKUP_TABLE default\n";
  for (const auto& tri : mesh.triangles) os << tri.layer << "\n";
  if (fields.stress) {
    os << "SCALARS stress double 3\nLOOKUP_TABLE default\n";
    for (const auto& s : *fields.stress)
      os << text::num(s.xx) << " " << text::num(s.yy) << " " << text::num(s.xy) << "\n";
  }
  if (fields.displacement) {
    const auto& u = *fields.displacement;
    os << "POINT_DATA " << n << "\nVECTORS displacement double\n";
    for (int k = 0; k < n; ++k) os << text::num(u[2 * k]) << " " << text::num(u[2 * k + 1]) << " 0\n";
  }
}

void write_csv(std::ostream& os, const CsvTable& table) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (cells[k].find_first_of(",\n\r") != std::string::npos)
        throw InputError("write_csv: cell contains a separator: " + cells[k]);
      os << (k ? "," : "") << cells[k];
    }
    os << "\n";
  };
  line(table.header);
  for (const auto& r : table.rows) {
    if (r.size() != table.header.size()) throw InputError("write_csv: ragged row");
    line(r);
  }
}

CsvTable read_csv(std::istream& is) {
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = l.find(',', start);
      cells.push_back(l.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  CsvTable t;
  std::string l;
  if (!std::getline(is, l)) throw InputError("read_csv: empty input");
  t.header = split(l);
  while (std::getline(is, l)) {
    if (l.empty()) continue;
    t.rows.push_back(split(l));
    if (t.rows.back().size() != t.header.size()) throw InputError("read_csv: ragged row");
  }
  return t;
}

namespace {
const std::vector<std::string> kConvergenceHeader = {
    "level", "h", "dofs", "error", "observed_rate", "fitted_slope",
    "interp_error", "residual", "bound_constant", "outer_iters"};
}

CsvTable to_csv(const ConvergenceTable& table) {
  CsvTable csv{kConvergenceHeader, {}};
  for (const auto& r : table.rows)
    csv.rows.push_back({std::to_string(r.level), text::num(r.h), std::to_string(r.dofs),
                        text::num(r.error), text::num(r.observed_rate), text::num(r.fitted_slope),
                        text::num(r.interp_error), text::num(r.residual),
                        text::num(r.bound_constant), std::to_string(r.outer_iters)});
  return csv;
}

ConvergenceTable convergence_table_from_csv(const CsvTable& csv) {
  if (csv.header != kConvergenceHeader) throw InputError("convergence csv: unexpected header");
  ConvergenceTable t;
  for (const auto& row : csv.rows) {
    auto real = [&](int c) {
      double v = 0.0;
      if (!text::parse_double(row[c], v)) throw InputError("convergence csv: bad number " + row[c]);
      return v;
    };
    auto whole = [&](int c) {
      int v = 0;
      const auto& s = row[c];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InputError("convergence csv: bad integer " + s);
      return v;
    };
    ConvergenceRow r;
    r.level = whole(0);
    r.h = real(1);
    r.dofs = whole(2);
    r.error = real(3);
    r.observed_rate = real(4);
    r.fitted_slope = real(5);
    r.interp_error = real(6);
    r.residual = real(7);
    r.bound_constant = real(8);
    r.outer_iters = whole(9);
    t.rows.push_back(r);
  }
  return t;
}

CsvTable to_csv(const SolverReport& report) {
  CsvTable csv{{"iteration", "difference", "contraction_ratio", "inner_iterations"}, {}};
  for (std::size_t k = 0; k < report.differences.size(); ++k) {
    const std::string ratio = k >= 1 && k - 1 < report.contraction_ratios.size()
                                  ? text::num(report.contraction_ratios[k - 1])
                                  : "";
    const std::string inner =
        k < report.inner_iterations.size() ? std::to_string(report.inner_iterations[k]) : "";
    csv.rows.push_back({std::to_string(k + 1), text::num(report.differences[k]), ratio, inner});
  }
  return csv;
}

CsvTable to_csv(const KktReport& report, const KktReport& thresholds) {
  CsvTable csv{{"entry", "value", "threshold", "status"}, {}};
  const auto e = report.entries();
  const auto t = thresholds.entries();
  for (std::size_t k = 0; k < e.size(); ++k)
    csv.rows.push_back({e[k].first, text::num(e[k].second), text::num(t[k].second),
                        e[k].second <= t[k].second ? "pass" : "fail"});
  return csv;
}

// ---------------------------------------------------------------------------
// Commands

Command command_from_string(const std::string& s) {
  if (s == "mesh") return Command::Mesh;
  if (s == "solve") return Command::Solve;
  if (s == "converge") return Command::Converge;
  if (s == "verify") return Command::Verify;
  throw InputError("unknown command '" + s + "' (mesh, solve, converge, verify)");
}

namespace {

class Outputs {
 public:
  Outputs(const ProblemConfig& cfg, const RunOptions& opts, std::ostream& log)
      : dir_(opts.out_dir), prefix_(cfg.output.prefix), log_(log) {
    std::filesystem::create_directories(dir_);
  }

  std::ofstream open(const std::string& suffix) {
    const auto path = dir_ / (prefix_ + suffix);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    log_ << "wrote " << path.string() << "\n";
    return out;
  }

  void csv(const std::string& suffix, const CsvTable& t) {
    auto out = open(suffix);
    write_csv(out, t);
  }

 private:
  std::filesystem::path dir_;
  std::string prefix_;
  std::ostream& log_;
};

constexpr double kOracleTol = 1e-7;
constexpr double kGreensTol = 1e-10;
constexpr double kSlipTol = 1e-6;  // relative to the displacement scale

void log_report(std::ostream& log, const SolverReport& r) {
  log << "outer iterations: " << r.outer_iters << ", converged: " << (r.converged ? "yes" : "no")
      << ", wall time " << text::num(r.wall_time_s) << " s\n";
  if (r.outer_iters >= 3) log << "contraction estimate: " << text::num(estimate_contraction(r)) << "\n";
  if (!r.diagnostic.empty()) log << "diagnostic: " << r.diagnostic << "\n";
}

}  // namespace

int run(Command command, const ProblemConfig& cfg, const RunOptions& opts, std::ostream& log) {
  cfg.validate();
  SolverConfig solver = cfg.solver;
  if (opts.seed) solver.seed = *opts.seed;
  Outputs out(cfg, opts, log);
  const auto mesh = std::make_shared<const Mesh>(cfg.build_mesh());

  if (command == Command::Mesh) {
    {
      auto os = out.open("_mesh.txt");
      write_mesh_text(os, *mesh);
    }
    auto os = out.open("_mesh.vtk");
    write_vtk(os, *mesh);
    log << "nodes " << mesh->node_count() << ", triangles " << mesh->triangle_count() << ", h "
        << text::num(mesh->h) << "\n";
    return 0;
  }

  if (command == Command::Converge) {
    ProblemFamily family{*mesh, [&cfg](MeshPtr m) { return cfg.problem_data(std::move(m)); },
                         "configured problem"};
    const ConvergenceTable table = convergence_study(family, opts.levels, solver);
    if (cfg.output.csv) out.csv("_convergence.csv", to_csv(table));
    {
      auto os = out.open("_convergence.dat");
      os << "# h error interp_error residual bound_constant\n";
      for (const auto& r : table.rows)
        os << text::num(r.h) << " " << text::num(r.error) << " " << text::num(r.interp_error) << " "
           << text::num(r.residual) << " " << text::num(r.bound_constant) << "\n";
    }
    log << "reference: " << table.reference << "\n";
    if (!table.complete) {
      log << "convergence study aborted: " << table.failure << "\n";
      return 2;
    }
    log << "fitted slope " << text::num(table.fitted_slope()) << ", bound constant spread "
        << text::num(table.constant_spread()) << "\n";
    return 0;
  }

  const VIProblem problem(cfg.problem_data(mesh));
  FixedPointResult res = fixed_point_solve(problem, solver, DisplacementField::zero(mesh));
  if (res.solution) {
    const KktReport kkt = kkt_check(problem, *res.solution);
    res.report.kkt_summary = kkt.entries();
  }
  log_report(log, res.report);
  if (cfg.output.csv) out.csv("_report.csv", to_csv(res.report));
  if (!res.solution) {
    log << "no solution returned\n";
    return 2;
  }
  const DisplacementField& u = *res.solution;
  const KktReport kkt = kkt_check(problem, u);
  const KktReport thr = kkt_thresholds(problem, u, solver.outer_tol);

  if (command == Command::Solve) {
    if (cfg.output.vtk) {
      const auto stress = element_stresses(problem, u.values);
      auto os = out.open("_solution.vtk");
      write_vtk(os, *mesh, {&u.values, &stress});
    }
    if (cfg.output.csv) out.csv("_kkt.csv", to_csv(kkt, thr));
    return 0;
  }

  // verify
  CsvTable checks{{"check", "value", "threshold", "status"}, {}};
  bool ok = true;
  auto record = [&](const std::string& name, double value, double threshold) {
    const bool pass = value <= threshold;
    ok = ok && pass;
    checks.rows.push_back({name, text::num(value), text::num(threshold), pass ? "pass" : "fail"});
    log << name << ": " << text::num(value) << " <= " << text::num(threshold) << " "
        << (pass ? "pass" : "FAIL") << "\n";
  };

  const int dofs = problem.dofs().free_count();
  if (dofs > kDenseDofLimit) {
    log << "oracle: skipped: dense regime exceeded (" << dofs << " free dofs > " << kDenseDofLimit
        << ")\n";
    checks.rows.push_back({"oracle", "", "", "skipped: dense regime exceeded"});
  } else if (!problem.is_linear()) {
    log << "oracle: skipped: nonlinear material law\n";
    checks.rows.push_back({"oracle", "", "", "skipped: nonlinear material law"});
  } else {
    const DisplacementField us = solve_inner_tresca(problem, u, solver);
    const DisplacementField uo = oracle_solve_dense(problem, u);
    DisplacementField d = us;
    d.values -= uo.values;
    record("oracle", energy_norm(problem, d), kOracleTol * (1.0 + energy_norm(problem, uo)));
  }
  const GreensDefect g = greens_identity_check(problem, u, 20, solver.seed);
  record("greens_identity", g.defect, kGreensTol * g.scale);
  const auto e = kkt.entries();
  const auto t = thr.entries();
  for (std::size_t k = 0; k < e.size(); ++k) record("kkt_" + e[k].first, e[k].second, t[k].second);
  const KktScales sc = kkt_scales(problem, u);
  record("case_analysis", kkt_case_analysis(problem, u, kSlipTol * sc.displacement), thr.cone);
  if (cfg.output.csv) out.csv("_verify.csv", checks);
  return ok ? 0 : 1;
}

}  // namespace layervi
