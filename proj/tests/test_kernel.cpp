#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "lcbo/kernel.hpp"
#include "test_util.hpp"

using namespace lcbo;
using testutil::fd_cross_hessian;
using testutil::fd_grad;
using testutil::random_vector;
using testutil::rel_err;

namespace {
const KernelSpec kRbf{KernelFamily::RBF, 1.0, 1.0};
const KernelSpec kMatern{KernelFamily::Matern25, 1.0, 1.0};
}  // namespace

TEST_CASE("kernel_eval closed forms") {
  Vector x(1), y(1);
  x << 0.0;
  y << 1.0;
  CHECK(kernel_eval(kRbf, x, x) == doctest::Approx(1.0));
  CHECK(kernel_eval(kRbf, x, y) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  const double s5 = std::sqrt(5.0);
  CHECK(kernel_eval(kMatern, x, y) ==
        doctest::Approx((1.0 + s5 + 5.0 / 3.0) * std::exp(-s5)).epsilon(1e-12));
}

TEST_CASE("kernel stationarity and symmetry on random pairs") {
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    KernelSpec spec{t % 2 ? KernelFamily::Matern25 : KernelFamily::RBF,
                    rng.uniform(0.1, 2.0), rng.uniform(0.2, 3.0)};
    const Vector x = random_vector(rng, 4), y = random_vector(rng, 4);
    CHECK(kernel_eval(spec, x, x) == doctest::Approx(spec.outputscale).epsilon(1e-14));
    CHECK(kernel_eval(spec, x, y) == kernel_eval(spec, y, x));
  }
}

TEST_CASE("kernel_grad1 examples") {
  Vector x(1), y(1);
  x << 1.0;
  y << 0.0;
  CHECK(kernel_grad1(kRbf, x, y)(0) == doctest::Approx(-std::exp(-0.5)).epsilon(1e-12));
  Rng rng(1);
  const Vector z = random_vector(rng, 3);
  CHECK(kernel_grad1(kMatern, z, z).norm() == 0.0);
  CHECK(kernel_grad1(kRbf, z, z).norm() == 0.0);
}

TEST_CASE("kernel_grad1 matches finite differences and is antisymmetric") {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    KernelSpec spec{t % 2 ? KernelFamily::Matern25 : KernelFamily::RBF,
                    rng.uniform(0.2, 2.0), rng.uniform(0.2, 3.0)};
    const Vector x = random_vector(rng, 3), y = random_vector(rng, 3);
    const Vector g = kernel_grad1(spec, x, y);
    const Vector g_fd =
        fd_grad([&](const Vector& v) { return kernel_eval(spec, v, y); }, x);
    CHECK(rel_err(g, g_fd) < 1e-5);
    CHECK((g + kernel_grad1(spec, y, x)).norm() < 1e-12 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("kernel_cross_hessian closed forms at the diagonal") {
  Rng rng(13);
  const Vector x = random_vector(rng, 4);
  const KernelSpec spec{KernelFamily::RBF, 0.7, 2.0};
  const Matrix H = kernel_cross_hessian(spec, x, x);
  const Matrix want = (2.0 / 0.49) * Matrix::Identity(4, 4);
  CHECK(rel_err(H, want) < 1e-12);
  CHECK(H.trace() == doctest::Approx(4.0 * 2.0 / 0.49).epsilon(1e-12));
}

TEST_CASE("kernel_cross_hessian matches nested finite differences") {
  Rng rng(14);
  SUBCASE("spec example d=2") {
    Vector x(2), y(2);
    x << 0.3, 0.1;
    y << 0.0, 0.0;
    CHECK(rel_err(kernel_cross_hessian(kRbf, x, y), fd_cross_hessian(kRbf, x, y)) < 1e-4);
  }
  for (int t = 0; t < 100; ++t) {
    KernelSpec spec{t % 2 ? KernelFamily::Matern25 : KernelFamily::RBF,
                    rng.uniform(0.3, 2.0), rng.uniform(0.2, 3.0)};
    const Vector x = random_vector(rng, 3), y = random_vector(rng, 3);
    CHECK(rel_err(kernel_cross_hessian(spec, x, y), fd_cross_hessian(spec, x, y)) < 1e-4);
  }
}

TEST_CASE("cross hessian at the diagonal is symmetric PSD") {
  Rng rng(15);
  for (int t = 0; t < 20; ++t) {
    KernelSpec spec{t % 2 ? KernelFamily::Matern25 : KernelFamily::RBF,
                    rng.uniform(0.1, 2.0), rng.uniform(0.2, 3.0)};
    const Vector x = random_vector(rng, 5);
    const Matrix H = kernel_cross_hessian(spec, x, x);
    CHECK((H - H.transpose()).norm() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("gram matrices admit a Cholesky factorization with tiny jitter") {
  Rng rng(16);
  for (auto family : {KernelFamily::RBF, KernelFamily::Matern25}) {
    KernelSpec spec{family, 0.4, 1.3};
    const Matrix X = testutil::random_matrix(rng, 50, 3);
    Matrix K = gram(spec, X);
    K.diagonal().array() += 1e-10;
    Eigen::LLT<Matrix> llt(K);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("kernel error paths") {
  Vector x(2), y(3);
  CHECK_THROWS_AS(kernel_eval(kRbf, x, y), std::invalid_argument);
  Vector bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  Vector ok(2);
  ok << 0.0, 0.0;
  CHECK_THROWS_AS(kernel_eval(kRbf, bad, ok), std::invalid_argument);
  CHECK_THROWS_AS((KernelSpec{KernelFamily::RBF, -1.0, 1.0}.validate()), std::invalid_argument);
}
