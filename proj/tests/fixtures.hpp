#pragma once

#include <random>

#include "layervi/assembly.hpp"

namespace layervi::testing {

/// Nondimensional three-layer pavement used across the suites; the repo's
/// canonical config is this problem scaled by 1e8 Pa.
inline ProblemData desk_problem(int nx, double mu, double foundation_c = 0.5, double delta = 40.0) {
  ProblemData d;
  d.mesh = std::make_shared<const Mesh>(
      build_layered_mesh({{1.0, 0.125, nx / 8}, {1.0, 0.25, nx / 4}, {1.0, 0.5, nx / 2}}, nx));
  d.materials = {{MaterialKind::LinearIsotropic, 2.0, 2.0, 0.0},
                 {MaterialKind::LinearIsotropic, 1.0, 1.0, 0.0},
                 {MaterialKind::LinearIsotropic, 0.5, 0.5, 0.0}};
  d.foundation = {ComplianceKind::Power, foundation_c, 1.0, 0.0, FrictionKind::Coulomb, mu, 0.0};
  const FrictionLaw iface{ComplianceKind::Power, 0.0, 1.0, 0.0, FrictionKind::ModifiedCoulomb, mu, delta};
  d.interfaces = {iface, iface};
  d.f2 = [](const Point& p) {
    return p.x > 0.375 && p.x < 0.625 ? Vec2{0.05, -0.1} : Vec2{0.0, 0.0};
  };
  return d;
}

/// Random small instance: 1-3 layers, at most 200 free dofs, friction coefficient from `mus`.
inline ProblemData random_instance(std::mt19937_64& rng, const std::vector<double>& mus = {0.0, 0.1, 0.3}) {
  std::uniform_int_distribution<int> layers_d(1, 3), nx_d(3, 6), ny_d(1, 3), pick(0, 1 << 20);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int layers = layers_d(rng);
  const int nx = nx_d(rng);
  const double mu = mus[pick(rng) % mus.size()];
  std::vector<LayerSpec> spec;
  ProblemData d;
  for (int k = 0; k < layers; ++k) {
    spec.push_back({1.0, 0.2 + 0.3 * unit(rng), ny_d(rng)});
    d.materials.push_back({MaterialKind::LinearIsotropic, 2.0 * unit(rng), 0.5 + 1.5 * unit(rng), 0.0});
  }
  d.mesh = std::make_shared<const Mesh>(build_layered_mesh(spec, nx));
  d.foundation = {ComplianceKind::Power, 0.1 + 0.9 * unit(rng), 1.0, 0.0, FrictionKind::Coulomb, mu, 0.0};
  for (int k = 0; k + 1 < layers; ++k) {
    FrictionLaw f{ComplianceKind::Power, 0.0, 1.0, 0.0, FrictionKind::Coulomb, mu, 0.0};
    if (pick(rng) % 2) {
      f.gt_kind = FrictionKind::ModifiedCoulomb;
      f.delta = 2.0 * unit(rng);
    }
    d.interfaces.push_back(f);
  }
  const double x0 = 0.1 + 0.4 * unit(rng);
  const double x1 = x0 + 0.1 + 0.3 * unit(rng);
  const Vec2 t{0.2 * (unit(rng) - 0.5), -0.2 - 0.8 * unit(rng)};
  d.f2 = [x0, x1, t](const Point& p) { return p.x > x0 && p.x < x1 ? t : Vec2{0.0, 0.0}; };
  const double g = 0.2 * unit(rng);
  d.f0 = [g](const Point&, int) { return Vec2{0.0, -g}; };
  return d;
}

}  // namespace layervi::testing
