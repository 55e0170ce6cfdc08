#include <doctest.h>

#include <cmath>

#include "dspn/acd.hpp"
#include "dspn/errors.hpp"
#include "dspn/gradkernel.hpp"
#include "support.hpp"

using namespace dspn;
using testing::random_matrix;
using testing::random_vector;

namespace {

double weighted(std::span<const double> v, std::span<const double> c) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += c[i] * v[i];
    return s;
}

}  // namespace

TEST_CASE("affine examples") {
    Tensor id = Tensor::identity(2);
    std::vector<double> x = {3, 4}, zero = {0, 0};
    CHECK(affine(id, x, zero) == Tensor::vector({3, 4}));
    std::vector<double> b = {1, 2};
    CHECK(affine(Tensor::matrix(2, 5), std::vector<double>{7, -1, 2, 0.5, 9}, b) == Tensor::vector({1, 2}));
    CHECK_THROWS_AS(affine(Tensor::matrix(2, 3), x, zero), ShapeError);
}

TEST_CASE("affine matches a naive double loop") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor w = random_matrix(3, 4, rng, 2.0);
        Tensor x = random_vector(4, rng, 2.0);
        Tensor b = random_vector(3, rng, 2.0);
        Tensor y = affine(w, x.values(), b.values());
        CHECK(oracle::max_abs_diff(oracle::vec(y), oracle::affine(oracle::mat(w), oracle::vec(x), oracle::vec(b))) <
              1e-12);
    }
}

TEST_CASE("affine is linear") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor w = random_matrix(4, 3, rng);
        Tensor x = random_vector(3, rng), y = random_vector(3, rng);
        Tensor xy = x;
        for (std::size_t i = 0; i < 3; ++i) xy[i] += y[i];
        std::vector<double> zero(4, 0.0);
        Tensor lhs = affine(w, xy.values(), zero);
        Tensor a = affine(w, x.values(), zero), b = affine(w, y.values(), zero);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(lhs[i] - (a[i] + b[i])) < 1e-12);
    }
}

TEST_CASE("softmax examples") {
    Tensor u = softmax(std::vector<double>{0, 0, 0});
    for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
    Tensor h = softmax(std::vector<double>{std::log(2.0), 0, 0});
    CHECK(std::abs(h[0] - 0.5) < 1e-15);
    CHECK(std::abs(h[1] - 0.25) < 1e-15);
    CHECK(std::abs(h[2] - 0.25) < 1e-15);
    CHECK_THROWS_AS(softmax(std::vector<double>{}), ShapeError);
    Tensor big = softmax(std::vector<double>{1000, 0});
    CHECK(big.all_finite());
    CHECK(big[0] == 1.0);
}

TEST_CASE("softmax matches exp/normalize and is shift invariant") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor v = random_vector(5, rng, 3.0);
        Tensor s = softmax(v.values());
        CHECK(oracle::max_abs_diff(oracle::vec(s), oracle::softmax(oracle::vec(v))) < 1e-12);
        Tensor shifted = v;
        double c = rng.uniform(-50, 50);
        for (double& x : shifted.values()) x += c;
        Tensor s2 = softmax(shifted.values());
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(s2[i] - s[i]) / s[i] < 1e-12);
    }
}

TEST_CASE("relu examples") {
    CHECK(relu(std::vector<double>{-1, 0, 2}) == Tensor::vector({0, 0, 2}));
    CHECK(relu(std::vector<double>{-3, -0.5}) == Tensor::vector({0, 0}));
    CHECK(relu_backward(std::vector<double>{-1, 0, 2}, std::vector<double>{5, 5, 5}) == Tensor::vector({0, 0, 5}));
}

TEST_CASE("param set") {
    ParamSet p;
    p.add("a", Tensor::matrix(2, 3, 1.0));
    p.add("b", Tensor::vector(4, 2.0));
    CHECK_THROWS(p.add("a", Tensor::vector(1)));
    CHECK_THROWS(p.value("missing"));
    CHECK(p.num_scalars() == 10);
    CHECK(p.grad("a").same_shape(p.value("a")));
    p.grad("a")[3] = 7;
    p.grad("b")[0] = -1;
    p.zero_grad();
    for (const auto& e : p.entries()) {
        for (double g : e.grad.values()) CHECK(g == 0.0);
    }
    CHECK(p.entries()[0].name == "a");
}

TEST_CASE("check_gradient on simple functions") {
    ParamSet p;
    p.add("x", Tensor::vector(std::vector<double>{3.0}));
    GradientObjective square;
    square.value = [](const ParamSet& ps) {
        long double x = ps.value("x")[0];
        return x * x;
    };
    square.gradient = [](ParamSet& ps) { ps.grad("x")[0] = 2 * ps.value("x")[0]; };
    GradientReport r = check_gradient(square, p, 1e-5);
    CHECK(r.worst_analytic == 6.0);
    CHECK(std::abs(r.worst_numeric - 6.0) < 1e-9);
    CHECK(r.max_rel_error < 1e-8);
    CHECK(p.value("x")[0] == 3.0);

    GradientObjective constant;
    constant.value = [](const ParamSet&) { return 4.0L; };
    constant.gradient = [](ParamSet&) {};
    GradientReport c = check_gradient(constant, p, 1e-5);
    CHECK(c.max_rel_error == 0.0);
    CHECK(c.worst_numeric == 0.0);

    GradientObjective bad = constant;
    bad.value = [](const ParamSet&) { return static_cast<long double>(NAN); };
    CHECK_THROWS_AS(check_gradient(bad, p, 1e-5), NumericError);
    CHECK_THROWS(check_gradient(constant, p, 0.0));
}

TEST_CASE("check_gradient flags a wrong gradient") {
    ParamSet p;
    p.add("x", Tensor::vector({1.5, -2.0}));
    GradientObjective f;
    f.value = [](const ParamSet& ps) {
        long double a = ps.value("x")[0], b = ps.value("x")[1];
        return a * a * b;
    };
    f.gradient = [](ParamSet& ps) {
        double a = ps.value("x")[0], b = ps.value("x")[1];
        ps.grad("x")[0] = 2 * a * b;
        ps.grad("x")[1] = a * a * 1.01;
    };
    GradientReport r = check_gradient(f, p, 1e-5);
    CHECK(r.max_rel_error > 1e-3);
    CHECK(r.worst_index == 1);
}

TEST_CASE("check_gradient skips coordinates near a kink") {
    GradientObjective f;
    f.value = [](const ParamSet& ps) {
        long double s = 0;
        for (double v : ps.value("x").values()) s += v > 0 ? v : 0;
        return s;
    };
    f.gradient = [](ParamSet& ps) {
        for (std::size_t i = 0; i < ps.value("x").size(); ++i) ps.grad("x")[i] = ps.value("x")[i] > 0 ? 1 : 0;
    };
    f.kinks = [](const ParamSet& ps) {
        return std::vector<double>(ps.value("x").values().begin(), ps.value("x").values().end());
    };
    ParamSet near;
    near.add("x", Tensor::vector(std::vector<double>{1e-6}));
    GradientReport r = check_gradient(f, near, 1e-5);
    CHECK(r.skipped == 1);
    CHECK(r.checked == 0);

    ParamSet far;
    far.add("x", Tensor::vector(std::vector<double>{0.5, -0.25}));
    GradientReport r2 = check_gradient(f, far, 1e-5);
    CHECK(r2.skipped == 0);
    CHECK(r2.checked == 2);
    CHECK(r2.max_rel_error < 1e-8);
}

// Each primitive composed with a random linear read-out, over 100 seeds.
TEST_CASE("primitive gradients over random seeds") {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        ParamSet p;
        p.add("w", random_matrix(3, 4, rng));
        p.add("x", random_vector(4, rng));
        p.add("b", random_vector(3, rng));
        p.add("t", random_matrix(3, 4, rng));
        const Tensor c = random_vector(3, rng);
        const Tensor c2 = random_vector(3, rng);

        GradientObjective f;
        f.value = [&](const ParamSet& ps) {
            Tensor y = affine(ps.value("w"), ps.value("x").values(), ps.value("b").values());
            Tensor s = softmax(y.values());
            Tensor r = relu(y.values());
            return static_cast<long double>(weighted(s.values(), c.values()) + weighted(r.values(), c2.values()) +
                                            0.7 * uniqueness_penalty(ps.value("t")));
        };
        f.gradient = [&](ParamSet& ps) {
            Tensor y = affine(ps.value("w"), ps.value("x").values(), ps.value("b").values());
            Tensor s = softmax(y.values());
            Tensor g = softmax_backward(s.values(), c.values());
            Tensor gr = relu_backward(y.values(), c2.values());
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += gr[i];
            affine_backward(ps.value("w"), ps.value("x").values(), g.values(), &ps.grad("w"),
                            ps.grad("x").values(), ps.grad("b").values());
            uniqueness_penalty_backward(ps.value("t"), 0.7, ps.grad("t"));
        };
        f.kinks = [&](const ParamSet& ps) {
            Tensor y = affine(ps.value("w"), ps.value("x").values(), ps.value("b").values());
            return std::vector<double>(y.values().begin(), y.values().end());
        };
        GradientReport r = check_gradient(f, p, 1e-5);
        worst = std::max(worst, r.max_rel_error);
    }
    CHECK(worst < 1e-4);
}
