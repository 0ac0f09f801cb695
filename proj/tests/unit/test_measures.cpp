#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "coupling/measures.hpp"
#include "support/gen.hpp"

using namespace coupling;
using Catch::Approx;

TEST_CASE("finite distribution validates mass and sign") {
    CHECK_NOTHROW(FiniteDistribution({0.25, 0.75}));
    CHECK_THROWS_AS(FiniteDistribution({0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(FiniteDistribution({-0.1, 1.1}), std::invalid_argument);
    CHECK_THROWS_AS(FiniteDistribution::normalized({0.0, 0.0}), std::invalid_argument);
    const auto n = FiniteDistribution::normalized({1.0, 3.0});
    CHECK(n[0] == 0.25);
    CHECK(FiniteDistribution::point_mass(3, 1)[1] == 1.0);
}

TEST_CASE("tv uses the factor-2 convention") {
    const FiniteDistribution a({1.0, 0.0}), b({0.0, 1.0});
    CHECK(tv_distance(a, b) == 2.0);
    CHECK(tv_distance(a, a) == 0.0);
    const FiniteDistribution p({0.2, 0.3, 0.5}), q({0.5, 0.3, 0.2});
    CHECK(tv_distance(p, q) == Approx(0.6).margin(1e-15));
}

TEST_CASE("tv equals twice the largest event difference") {
    gen::Gen g(101);
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 1 + g.below(12);
        const FiniteDistribution mu(g.probs(m, 0.3)), nu(g.probs(m, 0.3));
        CHECK(tv_distance(mu, nu) == Approx(tv_bruteforce(mu, nu)).margin(1e-12));
    }
}

TEST_CASE("tv is a metric") {
    gen::Gen g(102);
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 1 + g.below(20);
        const FiniteDistribution a(g.probs(m)), b(g.probs(m)), c(g.probs(m));
        CHECK(tv_distance(a, b) == tv_distance(b, a));
        CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-15);
        CHECK(tv_distance(a, b) <= 2.0);
    }
}

TEST_CASE("word indexing is lexicographic with the first symbol most significant") {
    CHECK(word_count(3, 2) == 9);
    const std::vector<int> w{2, 1, 3};
    CHECK(word_index(w, 3) == 1 * 9 + 0 * 3 + 2);
    CHECK(word_at(11, 3, 3) == w);
    for (std::size_t i = 0; i < word_count(2, 6); ++i) CHECK(word_index(word_at(i, 2, 6), 2) == i);
    CHECK_THROWS(word_count(2, 25));
}

TEST_CASE("shift pushforward sums out the first coordinate") {
    const CylinderDistribution mu(2, 2, {0.1, 0.2, 0.3, 0.4});
    const auto s = shift_pushforward(mu);
    CHECK(s.depth() == 1);
    CHECK(s[0] == Approx(0.4));
    CHECK(s[1] == Approx(0.6));
}

TEST_CASE("shift pushforward does not increase tv") {
    gen::Gen g(103);
    for (int t = 0; t < 100; ++t) {
        const int d = 2 + g.below(2), n = 2 + g.below(4);
        const std::size_t size = word_count(d, n);
        const CylinderDistribution mu(d, n, g.probs(size)), nu(d, n, g.probs(size));
        CHECK(tv_distance(shift_pushforward(mu), shift_pushforward(nu)) <= tv_distance(mu, nu) + 1e-14);
    }
}

TEST_CASE("moment tail bound") {
    const std::vector<double> samples{1.0, 2.0, 3.0};
    CHECK(moment_tail_bound(samples, 4.0) == Approx(0.5));
    CHECK(moment_tail_bound(samples, 1.0) == 1.0);
}

TEST_CASE("distribution text round trip") {
    const CylinderDistribution mu(2, 2, {0.1, 0.2, 0.3, 0.4});
    std::stringstream ss;
    write_distribution(ss, to_text(mu));
    const auto back = read_distribution(ss).as_cylinder();
    for (std::size_t i = 0; i < 4; ++i) CHECK(back[i] == mu[i]);

    std::istringstream flat("3 0\n# comment\n2 1.0\n");
    const auto f = read_distribution(flat).as_finite();
    CHECK(f.size() == 3);
    CHECK(f[1] == 1.0);
    std::istringstream bad("2 1\n1 x\n");
    CHECK_THROWS(read_distribution(bad));
}
