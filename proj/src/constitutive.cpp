#include "layervi/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "layervi/error.hpp"

namespace layervi {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
}

double SymTensor2::norm() const { return std::sqrt(xx * xx + yy * yy + 2.0 * xy * xy); }

Eigen::Vector3d SymTensor2::mandel() const { return {xx, yy, kSqrt2 * xy}; }

SymTensor2 SymTensor2::from_mandel(const Eigen::Vector3d& m) { return {m[0], m[1], m[2] / kSqrt2}; }

SymTensor2 symmetric_from(const Matrix2& m) {
  const double scale = std::max({std::abs(m[0][0]), std::abs(m[1][1]), std::abs(m[0][1]),
                                 std::abs(m[1][0]), std::numeric_limits<double>::min()});
  if (std::abs(m[0][1] - m[1][0]) > 1e-12 * scale)
    throw InputError("strain tensor is not symmetric");
  return {m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0])};
}

void MaterialLaw::validate() const {
  if (!(lame_mu > 0.0)) throw InputError("material: lame_mu must be > 0");
  if (!(lame_lambda >= 0.0)) throw InputError("material: lame_lambda must be >= 0");
  if (kind == MaterialKind::PPerturbed && !(gamma >= 0.0 && gamma < 1.0))
    throw InputError("material: p-perturbed law needs 0 <= gamma < 1");
}

SymTensor2 stress_of_strain(const MaterialLaw& law, const SymTensor2& eps) {
  double shear = 2.0 * law.lame_mu;
  if (law.kind == MaterialKind::PPerturbed) shear *= 1.0 + law.gamma / (1.0 + eps.norm());
  const double vol = law.lame_lambda * eps.trace();
  return {shear * eps.xx + vol, shear * eps.yy + vol, shear * eps.xy};
}

SymTensor2 stress_of_strain(const MaterialLaw& law, const Matrix2& eps) {
  return stress_of_strain(law, symmetric_from(eps));
}

double strain_energy_density(const MaterialLaw& law, const SymTensor2& eps) {
  const double r = eps.norm();
  const double tr = eps.trace();
  double w = law.lame_mu * r * r + 0.5 * law.lame_lambda * tr * tr;
  if (law.kind == MaterialKind::PPerturbed)
    w += 2.0 * law.lame_mu * law.gamma * (r - std::log1p(r));
  return w;
}

Eigen::Matrix3d tangent_mandel(const MaterialLaw& law, const SymTensor2& eps) {
  Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
  const Eigen::Vector3d m(1.0, 1.0, 0.0);
  c += law.lame_lambda * m * m.transpose();
  if (law.kind == MaterialKind::LinearIsotropic) {
    c += 2.0 * law.lame_mu * Eigen::Matrix3d::Identity();
    return c;
  }
  const double r = eps.norm();
  const double g = law.gamma;
  c += 2.0 * law.lame_mu * (1.0 + g / (1.0 + r)) * Eigen::Matrix3d::Identity();
  if (r > 0.0) {
    const Eigen::Vector3d e = eps.mandel();
    c -= 2.0 * law.lame_mu * g / ((1.0 + r) * (1.0 + r) * r) * e * e.transpose();
  }
  return c;
}

void FrictionLaw::validate() const {
  if (!(c >= 0.0)) throw InputError("friction law: c must be >= 0");
  if (gn_kind == ComplianceKind::Power && !(m_exp >= 1.0))
    throw InputError("friction law: m_exp must be >= 1");
  if (gn_kind == ComplianceKind::Capped && !(r0 > 0.0))
    throw InputError("friction law: r0 must be > 0");
  if (!(mu >= 0.0)) throw InputError("friction law: mu must be >= 0");
  if (gt_kind == FrictionKind::ModifiedCoulomb && !(delta >= 0.0))
    throw InputError("friction law: delta must be >= 0");
}

double normal_compliance(const FrictionLaw& law, double r) {
  if (r <= 0.0) return 0.0;
  switch (law.gn_kind) {
    case ComplianceKind::Power:
      return law.m_exp == 1.0 ? law.c * r : law.c * std::pow(r, law.m_exp);
    case ComplianceKind::Capped:
      return law.c * std::min(r, law.r0);
  }
  return 0.0;
}

double normal_compliance_potential(const FrictionLaw& law, double r) {
  if (r <= 0.0) return 0.0;
  switch (law.gn_kind) {
    case ComplianceKind::Power:
      return law.c * std::pow(r, law.m_exp + 1.0) / (law.m_exp + 1.0);
    case ComplianceKind::Capped:
      if (r <= law.r0) return 0.5 * law.c * r * r;
      return 0.5 * law.c * law.r0 * law.r0 + law.c * law.r0 * (r - law.r0);
  }
  return 0.0;
}

double friction_bound(const FrictionLaw& law, double s) {
  switch (law.gt_kind) {
    case FrictionKind::Coulomb:
      return law.mu * s;
    case FrictionKind::ModifiedCoulomb:
      return law.mu * s * std::max(0.0, 1.0 - law.delta * s);
  }
  return 0.0;
}

ConstantEstimate estimate_constants(const MaterialLaw& law, int sample_count, double radius,
                                    std::uint64_t seed) {
  if (sample_count < 2) throw InputError("estimate_constants: sample_count must be >= 2");
  if (!(radius > 0.0)) throw InputError("estimate_constants: empty sampling box");
  law.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  ConstantEstimate est{0.0, std::numeric_limits<double>::infinity()};
  for (int k = 0; k < sample_count; ++k) {
    const SymTensor2 e1{u(rng), u(rng), u(rng)};
    const SymTensor2 e2{u(rng), u(rng), u(rng)};
    const SymTensor2 de = e1 - e2;
    const double dn = de.norm();
    if (dn == 0.0) continue;
    const SymTensor2 ds = stress_of_strain(law, e1) - stress_of_strain(law, e2);
    est.lipschitz = std::max(est.lipschitz, ds.norm() / dn);
    est.monotonicity = std::min(est.monotonicity, ds.dot(de) / (dn * dn));
  }
  return est;
}

ConstantEstimate estimate_constants(const FrictionLaw& law, ContactFunction which, int sample_count,
                                    double lo, double hi, std::uint64_t seed) {
  if (sample_count < 2) throw InputError("estimate_constants: sample_count must be >= 2");
  if (!(hi > lo)) throw InputError("estimate_constants: empty sampling box");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  auto f = [&](double x) {
    return which == ContactFunction::NormalCompliance ? normal_compliance(law, x)
                                                      : friction_bound(law, x);
  };
  ConstantEstimate est{0.0, std::numeric_limits<double>::infinity()};
  for (int k = 0; k < sample_count; ++k) {
    const double x1 = u(rng), x2 = u(rng);
    if (x1 == x2) continue;
    const double q = (f(x1) - f(x2)) / (x1 - x2);
    est.lipschitz = std::max(est.lipschitz, std::abs(q));
    est.monotonicity = std::min(est.monotonicity, q);
  }
  return est;
}

}  // namespace layervi
