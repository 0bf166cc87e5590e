#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "layervi/assembly.hpp"
#include "layervi/verification.hpp"
#include "layervi/vi_solver.hpp"

namespace layervi {

struct LayerConfig {
  double thickness = 0.0;
  int ny = 0;
  MaterialLaw material;
  bool operator==(const LayerConfig&) const = default;
};

/// Top traction: either a constant vector on [f2_extent[0], f2_extent[1]] or a
/// piecewise-linear table of (x, t_x, t_y) rows, zero outside the table.
struct LoadConfig {
  std::vector<Vec2> f0;  // one per layer, N/m^3
  std::optional<Vec2> f2;
  std::array<double, 2> f2_extent{};
  std::vector<std::array<double, 3>> f2_table;
  bool operator==(const LoadConfig&) const = default;
};

struct OutputConfig {
  std::string prefix = "layervi";
  bool vtk = true;
  bool csv = true;
  bool operator==(const OutputConfig&) const = default;
};

/// Everything a run needs. Units are SI: m, Pa, N.
struct ProblemConfig {
  double width = 0.0;
  int nx = 0;
  std::vector<LayerConfig> layers;
  FrictionLaw foundation;
  std::vector<FrictionLaw> interfaces;
  LoadConfig loads;
  SolverConfig solver;
  OutputConfig output;

  void validate() const;
  Mesh build_mesh() const;
  ProblemData problem_data(MeshPtr mesh) const;
  bool operator==(const ProblemConfig&) const = default;
};

/// INI document; schema in README. Throws InputError.
ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::string& path);
std::string serialize_config(const ProblemConfig& cfg);

// ---------------------------------------------------------------------------
// Output

struct VtkFields {
  const Eigen::VectorXd* displacement = nullptr;  // 2 per node
  const std::vector<SymTensor2>* stress = nullptr;  // 1 per triangle
};

/// Legacy ASCII unstructured grid: triangles, layer index per cell, optional
/// displacement vectors per point and stress (xx, yy, xy) per cell.
void write_vtk(std::ostream& os, const Mesh& mesh, const VtkFields& fields = {});

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool operator==(const CsvTable&) const = default;
};

/// Comma-separated, LF terminated, no quoting (cells must not contain commas or newlines).
void write_csv(std::ostream& os, const CsvTable& table);
CsvTable read_csv(std::istream& is);

CsvTable to_csv(const ConvergenceTable& table);
ConvergenceTable convergence_table_from_csv(const CsvTable& csv);
CsvTable to_csv(const SolverReport& report);
CsvTable to_csv(const KktReport& report, const KktReport& thresholds);

// ---------------------------------------------------------------------------
// Commands

enum class Command { Mesh, Solve, Converge, Verify };

Command command_from_string(const std::string& s);

struct RunOptions {
  std::string out_dir = ".";
  int levels = 4;
  std::optional<std::uint64_t> seed;
};

/// Exit status: 0 when every requested check passed, 1 on a failed check,
/// 2 when the solver diverged or stopped without converging.
int run(Command command, const ProblemConfig& cfg, const RunOptions& opts, std::ostream& log);

}  // namespace layervi
