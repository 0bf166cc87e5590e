#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Dense>

namespace layervi {

/// Symmetric 2x2 tensor stored as (xx, yy, xy).
struct SymTensor2 {
  double xx = 0.0;
  double yy = 0.0;
  double xy = 0.0;

  double trace() const { return xx + yy; }
  /// Frobenius norm, |t| = sqrt(t:t).
  double norm() const;
  double dot(const SymTensor2& o) const { return xx * o.xx + yy * o.yy + 2.0 * xy * o.xy; }

  SymTensor2 operator+(const SymTensor2& o) const { return {xx + o.xx, yy + o.yy, xy + o.xy}; }
  SymTensor2 operator-(const SymTensor2& o) const { return {xx - o.xx, yy - o.yy, xy - o.xy}; }
  SymTensor2 operator*(double s) const { return {xx * s, yy * s, xy * s}; }
  bool operator==(const SymTensor2&) const = default;

  /// Mandel vector (xx, yy, sqrt(2) xy): t:s equals the Euclidean dot product.
  Eigen::Vector3d mandel() const;
  static SymTensor2 from_mandel(const Eigen::Vector3d& m);
};

using Matrix2 = std::array<std::array<double, 2>, 2>;

/// Throws InputError unless m is symmetric (relative tolerance 1e-12).
SymTensor2 symmetric_from(const Matrix2& m);

enum class MaterialKind { LinearIsotropic, PPerturbed };

/// Elastic law of one layer.
///   linear-isotropic: sigma = 2 mu eps + lambda tr(eps) I
///   p-perturbed:      sigma = 2 mu eps (1 + gamma / (1 + |eps|)) + lambda tr(eps) I
/// The perturbed law is the gradient of a convex radial potential, so it is
/// Lipschitz with constant <= 2 mu (1 + gamma) + 2 lambda and strongly monotone
/// with constant >= 2 mu.
struct MaterialLaw {
  MaterialKind kind = MaterialKind::LinearIsotropic;
  double lame_lambda = 0.0;
  double lame_mu = 1.0;
  double gamma = 0.0;

  void validate() const;
  bool is_linear() const { return kind == MaterialKind::LinearIsotropic; }
  bool operator==(const MaterialLaw&) const = default;
};

SymTensor2 stress_of_strain(const MaterialLaw& law, const SymTensor2& eps);
SymTensor2 stress_of_strain(const MaterialLaw& law, const Matrix2& eps);

/// Stored energy density W with dW/deps = stress_of_strain.
double strain_energy_density(const MaterialLaw& law, const SymTensor2& eps);

/// d sigma / d eps in Mandel coordinates.
Eigen::Matrix3d tangent_mandel(const MaterialLaw& law, const SymTensor2& eps);

enum class ComplianceKind { Power, Capped };
enum class FrictionKind { Coulomb, ModifiedCoulomb };

/// Contact functions of one contact surface.
///   g_N power:   c (r_+)^m
///   g_N capped:  c r on [0, r0], c r0 above r0, 0 below 0
///   g_T coulomb: mu s
///   g_T modified coulomb: mu s (1 - delta s)_+
/// Interfaces between layers only use the friction part.
struct FrictionLaw {
  ComplianceKind gn_kind = ComplianceKind::Power;
  double c = 0.0;
  double m_exp = 1.0;
  double r0 = 0.0;
  FrictionKind gt_kind = FrictionKind::Coulomb;
  double mu = 0.0;
  double delta = 0.0;

  void validate() const;
  bool operator==(const FrictionLaw&) const = default;
};

double normal_compliance(const FrictionLaw& law, double r);
double friction_bound(const FrictionLaw& law, double s);

/// Antiderivative of normal_compliance vanishing at r = 0; convex.
double normal_compliance_potential(const FrictionLaw& law, double r);

struct ConstantEstimate {
  double lipschitz = 0.0;     // max sampled difference quotient
  double monotonicity = 0.0;  // min sampled monotonicity quotient
};

/// Samples pairs of strains with components uniform in [-radius, radius].
ConstantEstimate estimate_constants(const MaterialLaw& law, int sample_count, double radius,
                                    std::uint64_t seed);

enum class ContactFunction { NormalCompliance, FrictionBound };

/// Samples pairs of arguments uniform in [lo, hi].
ConstantEstimate estimate_constants(const FrictionLaw& law, ContactFunction which, int sample_count,
                                    double lo, double hi, std::uint64_t seed);

}  // namespace layervi
