#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sketchrl/approx.hpp"
#include "sketchrl/errors.hpp"
#include "sketchrl/rng.hpp"

using namespace sketchrl;

namespace {

// All 2^m tables over m = S keys (H = A = 1) with first-output entries in {0, scale}.
EnumeratedFunctionClass indicator_class(int m, double scale) {
    EnumeratedFunctionClass cls;
    cls.H = 1; cls.S = m; cls.A = 1; cls.N = 1;
    for (int mask = 0; mask < (1 << m); ++mask) {
        std::vector<double> t(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) t[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? scale : 0.0;
        cls.tables.push_back(t);
    }
    return cls;
}

// Linear class over standard-basis points e_1..e_d (one key each), weights on a grid.
EnumeratedFunctionClass basis_linear_class(int d, double step) {
    EnumeratedFunctionClass cls;
    cls.H = 1; cls.S = d; cls.A = 1; cls.N = 1;
    int total = 1;
    for (int i = 0; i < d; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
        std::vector<double> w(static_cast<std::size_t>(d));
        int c = code;
        for (int i = 0; i < d; ++i, c /= 3) w[static_cast<std::size_t>(i)] = step * (c % 3 - 1);
        cls.tables.push_back(w);  // f(e_i) = w_i
    }
    return cls;
}

}  // namespace

TEST_CASE("singleton class") {
    EnumeratedFunctionClass cls;
    cls.H = 1; cls.S = 3; cls.A = 1; cls.N = 2;
    cls.tables = {{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}};
    CHECK(epsilon_dependent({0, 1, 0}, {}, cls, 0.1));
    CHECK(eluder_dimension(cls, 0.1, EluderMode::exact) == 0);
    CHECK(eluder_dimension(cls, 0.1, EluderMode::greedy) == 0);
}

TEST_CASE("epsilon dependence on indicator class") {
    const double eps = 0.1;
    const auto cls = indicator_class(4, 2.0 * eps);
    CHECK(!epsilon_dependent({0, 2, 0}, {{0, 0, 0}, {0, 1, 0}}, cls, eps));
    CHECK(epsilon_dependent({0, 1, 0}, {{0, 0, 0}, {0, 1, 0}}, cls, eps));
}

TEST_CASE("indicator class has eluder dimension m") {
    const double eps = 0.05;
    for (int m = 1; m <= 6; ++m) {
        CAPTURE(m);
        const auto cls = indicator_class(m, 2.0 * eps);
        CHECK(eluder_dimension(cls, eps, EluderMode::exact) == m);
        CHECK(eluder_dimension(cls, eps, EluderMode::greedy) == m);
    }
}

TEST_CASE("basis linear class has eluder dimension d") {
    const double eps = 0.1;
    for (int d = 1; d <= 4; ++d) {
        CAPTURE(d);
        CHECK(eluder_dimension(basis_linear_class(d, 2.0 * eps), eps, EluderMode::exact) == d);
    }
}

TEST_CASE("greedy never exceeds exact") {
    Rng rng = make_stream(9, {});
    for (int trial = 0; trial < 40; ++trial) {
        EnumeratedFunctionClass cls;
        cls.H = 1;
        cls.S = 2 + static_cast<int>(uniform_index(3, rng));
        cls.A = 1 + static_cast<int>(uniform_index(2, rng));
        cls.N = 1 + static_cast<int>(uniform_index(2, rng));
        const int members = 2 + static_cast<int>(uniform_index(6, rng));
        for (int m = 0; m < members; ++m) {
            std::vector<double> t(cls.num_keys() * static_cast<std::size_t>(cls.N));
            for (auto& v : t) v = uniform01(rng);
            cls.tables.push_back(t);
        }
        for (double eps : {0.05, 0.2, 0.5}) {
            const int exact = eluder_dimension(cls, eps, EluderMode::exact);
            const int greedy = eluder_dimension(cls, eps, EluderMode::greedy);
            CHECK(greedy <= exact);
            CHECK(exact <= static_cast<int>(cls.num_keys()));
        }
    }
}

TEST_CASE("larger eps never lengthens the sequence on the indicator class") {
    const auto cls = indicator_class(4, 0.2);
    CHECK(eluder_dimension(cls, 0.3, EluderMode::exact) == 0);
    CHECK(eluder_dimension(cls, 0.1, EluderMode::exact, {0.1, 0.3}) == 4);
}

TEST_CASE("exact search is guarded") {
    const auto cls = indicator_class(9, 0.2);
    CHECK_THROWS_AS(eluder_dimension(cls, 0.1, EluderMode::exact), InstanceTooLarge);
    CHECK(eluder_dimension(cls, 0.1, EluderMode::greedy) == 9);
}
