#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wphist/errors.hpp"
#include "wphist/rng.hpp"
#include "wphist/wavelet.hpp"

using namespace wphist;

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

Eigen::VectorXd random_signal(Eigen::Index n, Rng& rng) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.normal();
    return x;
}

} // namespace

TEST_CASE("daubechies filters satisfy the quadrature-mirror invariants") {
    for (int p = 1; p <= 8; ++p) {
        const WaveletFilter f = make_filter(WaveletFamily::daubechies, p);
        CAPTURE(p);
        REQUIRE(f.low_pass.size() == static_cast<std::size_t>(2 * p));
        REQUIRE(f.high_pass.size() == f.low_pass.size());

        double sum = 0.0, norm = 0.0;
        for (double t : f.low_pass) {
            sum += t;
            norm += t * t;
        }
        CHECK(std::abs(sum - kSqrt2) < 1e-10);
        CHECK(std::abs(norm - 1.0) < 1e-10);

        const std::size_t L = f.low_pass.size();
        for (std::size_t m = 1; 2 * m < L; ++m) {
            double dot = 0.0;
            for (std::size_t l = 0; l + 2 * m < L; ++l)
                dot += f.low_pass[l] * f.low_pass[l + 2 * m];
            CHECK(std::abs(dot) < 1e-10);
        }
        for (std::size_t l = 0; l < L; ++l) {
            const double sign = (l % 2 == 0) ? 1.0 : -1.0;
            CHECK(f.high_pass[l] ==
                  doctest::Approx(sign * f.low_pass[L - 1 - l]).epsilon(1e-14));
        }
    }
}

TEST_CASE("haar taps are the analytic normalization") {
    const WaveletFilter f = make_filter(WaveletFamily::daubechies, 1);
    CHECK(f.low_pass[0] == doctest::Approx(0.7071068).epsilon(1e-6));
    CHECK(f.low_pass[1] == doctest::Approx(0.7071068).epsilon(1e-6));
    CHECK(f.name == "db1");
}

TEST_CASE("invalid vanishing moment counts are rejected") {
    CHECK_THROWS_AS(make_filter(WaveletFamily::daubechies, 0),
                    InvalidParameterError);
    CHECK_THROWS_AS(make_filter(WaveletFamily::daubechies, -2),
                    InvalidParameterError);
}

TEST_CASE("filter names parse") {
    CHECK(make_filter("haar").vanishing_moments == 1);
    CHECK(make_filter("db3").vanishing_moments == 3);
    CHECK(make_filter("db3").length() == 6);
    CHECK_THROWS_AS(make_filter("sym4"), InvalidParameterError);
    CHECK_THROWS_AS(make_filter("dbx"), InvalidParameterError);
}

TEST_CASE("haar transform of a constant block") {
    Eigen::VectorXd x(4);
    x << 1, 1, 1, 1;
    const PacketDecomposition d = dwpt(x, make_filter("haar"), 1);
    CHECK(d.coefficients()(0) == doctest::Approx(kSqrt2).epsilon(1e-12));
    CHECK(d.coefficients()(1) == doctest::Approx(kSqrt2).epsilon(1e-12));
    CHECK(d.coefficients()(2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.coefficients()(3) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("length preservation and scale layout") {
    Rng rng(11);
    const Eigen::VectorXd x = random_signal(64, rng);
    const PacketDecomposition d = dwpt(x, make_filter("db3"), 3);
    CHECK(d.signal_length() == 64);
    CHECK(d.n_scales() == 8);
    CHECK(d.scale_size() == 8);
    CHECK(d.scale_of(0) == 0);
    CHECK(d.scale_of(63) == 7);
    CHECK(d.location_of(17) == 1);
    CHECK(d.scale_of(17) == 2);
}

TEST_CASE("zero levels returns the signal unchanged") {
    Rng rng(5);
    const Eigen::VectorXd x = random_signal(10, rng);
    const PacketDecomposition d = dwpt(x, make_filter("db2"), 0);
    CHECK((d.coefficients() - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shape errors") {
    Rng rng(5);
    CHECK_THROWS_AS(dwpt(random_signal(60, rng), make_filter("db3"), 3),
                    ShapeError);
    CHECK_THROWS_AS(dwpt(Eigen::VectorXd(), make_filter("haar"), 1),
                    ShapeError);
    CHECK_THROWS_AS(build_basis(make_filter("db3"), 3, 60), ShapeError);
}

TEST_CASE("transform is linear") {
    Rng rng(21);
    const WaveletFilter f = make_filter("db3");
    const Eigen::VectorXd x = random_signal(32, rng);
    const Eigen::VectorXd y = random_signal(32, rng);
    const Eigen::VectorXd lhs = dwpt_vector(2.5 * x - 1.25 * y, f, 2);
    const Eigen::VectorXd rhs =
        2.5 * dwpt_vector(x, f, 2) - 1.25 * dwpt_vector(y, f, 2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("haar preserves energy exactly and gives an orthogonal basis") {
    Rng rng(31);
    const WaveletFilter f = make_filter("haar");
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::VectorXd x = random_signal(64, rng);
        const Eigen::VectorXd w = dwpt_vector(x, f, 3);
        CHECK(std::abs(w.norm() - x.norm()) < 1e-10);
    }
    const PacketBasisMatrix basis = build_basis(f, 2, 8);
    const Eigen::MatrixXd gram = basis.matrix() * basis.matrix().transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() <
          1e-10);
}

TEST_CASE("db3 approximately preserves energy at one level") {
    Rng rng(41);
    const WaveletFilter f = make_filter("db3");
    for (Eigen::Index n : {64, 128}) {
        double dev_sum = 0.0;
        const int reps = 500;
        for (int rep = 0; rep < reps; ++rep) {
            const Eigen::VectorXd x = random_signal(n, rng);
            const Eigen::VectorXd w = dwpt_vector(x, f, 1);
            dev_sum += std::abs(w.squaredNorm() - x.squaredNorm()) /
                       x.squaredNorm();
        }
        CHECK(dev_sum / reps < 0.05);
    }
}

TEST_CASE("impulse position maps to non-decreasing locations in every scale") {
    const WaveletFilter f = make_filter("haar");
    const int levels = 3;
    const Eigen::Index n = 64;
    const Eigen::Index per_scale = n >> levels;
    Eigen::VectorXi previous = Eigen::VectorXi::Zero(1 << levels);
    for (Eigen::Index p = 0; p < n; ++p) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        x(p) = 1.0;
        const Eigen::VectorXd w = dwpt_vector(x, f, levels);
        for (Eigen::Index s = 0; s < (1 << levels); ++s) {
            Eigen::Index arg = 0;
            w.segment(s * per_scale, per_scale).cwiseAbs().maxCoeff(&arg);
            if (p > 0) CHECK(arg >= previous(s));
            previous(s) = static_cast<int>(arg);
        }
    }
}

TEST_CASE("matrix action matches the procedural transform") {
    Rng rng(51);
    const WaveletFilter f = make_filter("db3");
    const PacketBasisMatrix basis = build_basis(f, 3, 64);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::VectorXd x = random_signal(64, rng);
        const Eigen::VectorXd direct = dwpt_vector(x, f, 3);
        const Eigen::VectorXd via_matrix = basis.matrix() * x;
        CHECK((direct - via_matrix).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("round trip through the solved inverse") {
    Rng rng(61);
    const WaveletFilter f = make_filter("db3");
    const PacketBasisMatrix basis = build_basis(f, 3, 64);
    for (int rep = 0; rep < 100; ++rep) {
        const Eigen::VectorXd x = random_signal(64, rng);
        const Eigen::VectorXd back = idwpt(dwpt(x, f, 3), basis);
        CHECK((back - x).norm() / x.norm() < 1e-8);
    }
}

TEST_CASE("haar round trip is exact") {
    Eigen::VectorXd x(8);
    x << 1, 2, 3, 4, 5, 6, 7, 8;
    const WaveletFilter f = make_filter("haar");
    const PacketBasisMatrix basis = build_basis(f, 3, 8);
    const Eigen::VectorXd back = idwpt(dwpt(x, f, 3), basis);
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("inverse transform basics") {
    const WaveletFilter f = make_filter("haar");
    const PacketBasisMatrix basis = build_basis(f, 1, 4);

    const PacketDecomposition zeros(Eigen::VectorXd::Zero(4), 1);
    CHECK(idwpt(zeros, basis).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4);
    e1(0) = 1.0;
    const Eigen::VectorXd col = idwpt(PacketDecomposition(e1, 1), basis);
    CHECK(col(0) == doctest::Approx(1.0 / kSqrt2).epsilon(1e-12));
    CHECK(col(1) == doctest::Approx(1.0 / kSqrt2).epsilon(1e-12));
    CHECK(col(2) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(col(3) == doctest::Approx(0.0).epsilon(1e-12));

    const PacketDecomposition wrong(Eigen::VectorXd::Zero(8), 1);
    CHECK_THROWS_AS(idwpt(wrong, basis), ShapeError);
}
