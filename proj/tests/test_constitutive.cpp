#include <cmath>
#include <random>

#include <doctest.h>

#include "layervi/constitutive.hpp"
#include "layervi/error.hpp"

using namespace layervi;

namespace {

const MaterialLaw kLinear{MaterialKind::LinearIsotropic, 2.0, 3.0, 0.0};
const MaterialLaw kPerturbed{MaterialKind::PPerturbed, 2.0, 3.0, 0.5};

}  // namespace

TEST_CASE("hooke stress for simple strains") {
  const SymTensor2 s = stress_of_strain(kLinear, SymTensor2{1.0, 0.0, 0.0});
  CHECK(s.xx == doctest::Approx(8.0));
  CHECK(s.yy == doctest::Approx(2.0));
  CHECK(s.xy == 0.0);

  const SymTensor2 shear = stress_of_strain(kLinear, SymTensor2{0.0, 0.0, 0.5});
  CHECK(shear.xx == 0.0);
  CHECK(shear.xy == doctest::Approx(3.0));

  const SymTensor2 iso = stress_of_strain(kLinear, SymTensor2{1.0, 1.0, 0.0});
  CHECK(iso.xx == doctest::Approx(2.0 * 3.0 + 2.0 * 2.0));
}

TEST_CASE("matrix strains must be symmetric") {
  CHECK_THROWS_AS(symmetric_from({{{1.0, 0.2}, {0.3, 1.0}}}), InputError);
  const SymTensor2 t = symmetric_from({{{1.0, 0.25}, {0.25, -2.0}}});
  CHECK(t == SymTensor2{1.0, -2.0, 0.25});
  CHECK(stress_of_strain(kLinear, Matrix2{{{1.0, 0.0}, {0.0, 0.0}}}).xx == doctest::Approx(8.0));
}

TEST_CASE("perturbed law on a unit strain") {
  // |eps| = 1, so the shear modulus is scaled by 1 + gamma / 2.
  const SymTensor2 s = stress_of_strain(kPerturbed, SymTensor2{1.0, 0.0, 0.0});
  CHECK(s.xx == doctest::Approx(2.0 * 3.0 * 1.25 + 2.0));
  CHECK(s.yy == doctest::Approx(2.0));
}

TEST_CASE("norm and mandel coordinates") {
  const SymTensor2 t{3.0, 0.0, 2.0};
  CHECK(t.norm() == doctest::Approx(std::sqrt(9.0 + 8.0)));
  CHECK(t.mandel().squaredNorm() == doctest::Approx(t.dot(t)));
  CHECK(SymTensor2::from_mandel(t.mandel()).xy == doctest::Approx(2.0));
}

TEST_CASE("material validation") {
  CHECK_THROWS_AS((MaterialLaw{MaterialKind::LinearIsotropic, 1.0, 0.0, 0.0}.validate()), InputError);
  CHECK_THROWS_AS((MaterialLaw{MaterialKind::LinearIsotropic, -1.0, 1.0, 0.0}.validate()), InputError);
  CHECK_THROWS_AS((MaterialLaw{MaterialKind::PPerturbed, 1.0, 1.0, 1.0}.validate()), InputError);
  CHECK_NOTHROW(kPerturbed.validate());
}

TEST_CASE("contact function examples") {
  FrictionLaw power{ComplianceKind::Power, 2.0, 1.0, 0.0, FrictionKind::Coulomb, 0.5, 0.0};
  CHECK(normal_compliance(power, 0.5) == doctest::Approx(1.0));
  CHECK(normal_compliance(power, -1.0) == 0.0);
  CHECK(friction_bound(power, 3.0) == doctest::Approx(1.5));
  CHECK(normal_compliance_potential(power, 0.5) == doctest::Approx(0.25));

  power.m_exp = 2.0;
  CHECK(normal_compliance(power, 0.5) == doctest::Approx(0.5));

  const FrictionLaw capped{ComplianceKind::Capped, 2.0, 1.0, 0.1, FrictionKind::Coulomb, 0.0, 0.0};
  CHECK(normal_compliance(capped, 1.0) == doctest::Approx(0.2));
  CHECK(normal_compliance(capped, 0.05) == doctest::Approx(0.1));
  CHECK(normal_compliance(capped, -0.05) == 0.0);
  CHECK(normal_compliance_potential(capped, 0.3) == doctest::Approx(0.01 + 0.2 * 0.2));

  const FrictionLaw modified{ComplianceKind::Power, 0.0, 1.0, 0.0, FrictionKind::ModifiedCoulomb, 0.5, 2.0};
  CHECK(friction_bound(modified, 0.25) == doctest::Approx(0.0625));
  CHECK(friction_bound(modified, 1.0) == 0.0);
  CHECK(friction_bound(modified, 0.0) == 0.0);
}

TEST_CASE("friction law validation") {
  CHECK_THROWS_AS((FrictionLaw{ComplianceKind::Power, -1.0, 1.0, 0.0, FrictionKind::Coulomb, 0.1, 0.0}.validate()),
                  InputError);
  CHECK_THROWS_AS((FrictionLaw{ComplianceKind::Power, 1.0, 0.5, 0.0, FrictionKind::Coulomb, 0.1, 0.0}.validate()),
                  InputError);
  CHECK_THROWS_AS((FrictionLaw{ComplianceKind::Capped, 1.0, 1.0, 0.0, FrictionKind::Coulomb, 0.1, 0.0}.validate()),
                  InputError);
  CHECK_THROWS_AS((FrictionLaw{ComplianceKind::Power, 1.0, 1.0, 0.0, FrictionKind::Coulomb, -0.1, 0.0}.validate()),
                  InputError);
}

TEST_CASE("property: energy density is a potential of the stress") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  const double h = 1e-6;
  for (const MaterialLaw& law : {kLinear, kPerturbed}) {
    for (int k = 0; k < 50; ++k) {
      const SymTensor2 e{u(rng), u(rng), u(rng)};
      const SymTensor2 s = stress_of_strain(law, e);
      const Eigen::Vector3d m = e.mandel();
      const Eigen::Vector3d sm = s.mandel();
      for (int c = 0; c < 3; ++c) {
        Eigen::Vector3d dp = m, dm = m;
        dp[c] += h;
        dm[c] -= h;
        const double fd = (strain_energy_density(law, SymTensor2::from_mandel(dp)) -
                           strain_energy_density(law, SymTensor2::from_mandel(dm))) /
                          (2.0 * h);
        CHECK(fd == doctest::Approx(sm[c]).epsilon(1e-6));
      }
      const Eigen::Matrix3d t = tangent_mandel(law, e);
      for (int c = 0; c < 3; ++c) {
        Eigen::Vector3d dp = m, dm = m;
        dp[c] += h;
        dm[c] -= h;
        const Eigen::Vector3d fd = (stress_of_strain(law, SymTensor2::from_mandel(dp)).mandel() -
                                    stress_of_strain(law, SymTensor2::from_mandel(dm)).mandel()) /
                                   (2.0 * h);
        CHECK((fd - t.col(c)).norm() <= 1e-6 * (1.0 + t.norm()));
      }
    }
  }
}

TEST_CASE("property: sampled constants respect the closed-form hooke bounds") {
  const double lip = 2.0 * kLinear.lame_mu + 2.0 * kLinear.lame_lambda;
  const double mono = 2.0 * kLinear.lame_mu;
  const ConstantEstimate est = estimate_constants(kLinear, 20000, 1.0, 11);
  CHECK(est.lipschitz <= lip * (1.0 + 1e-12));
  CHECK(est.lipschitz >= 0.95 * lip);
  CHECK(est.monotonicity >= mono * (1.0 - 1e-12));
  CHECK(est.monotonicity <= 1.05 * mono);

  const ConstantEstimate p = estimate_constants(kPerturbed, 20000, 1.0, 12);
  CHECK(p.lipschitz <= 2.0 * kPerturbed.lame_mu * (1.0 + kPerturbed.gamma) + 2.0 * kPerturbed.lame_lambda);
  CHECK(p.monotonicity >= 2.0 * kPerturbed.lame_mu * (1.0 - 1e-12));
}

TEST_CASE("property: contact function constants") {
  const FrictionLaw power{ComplianceKind::Power, 3.0, 1.0, 0.0, FrictionKind::Coulomb, 0.4, 0.0};
  const ConstantEstimate gn = estimate_constants(power, ContactFunction::NormalCompliance, 5000, -1.0, 1.0, 5);
  CHECK(gn.lipschitz <= 3.0 * (1.0 + 1e-12));
  CHECK(gn.monotonicity >= 0.0);
  const ConstantEstimate gt = estimate_constants(power, ContactFunction::FrictionBound, 5000, 0.0, 1.0, 6);
  CHECK(gt.lipschitz == doctest::Approx(0.4));

  // (mu s (1 - delta s)_+)' = mu (1 - 2 delta s) on [0, 1/delta]
  const FrictionLaw modified{ComplianceKind::Power, 0.0, 1.0, 0.0, FrictionKind::ModifiedCoulomb, 0.5, 2.0};
  const ConstantEstimate gm =
      estimate_constants(modified, ContactFunction::FrictionBound, 20000, 0.0, 1.0, 7);
  CHECK(gm.lipschitz <= 0.5 * (1.0 + 1e-12));
  CHECK(gm.lipschitz >= 0.45);
}
