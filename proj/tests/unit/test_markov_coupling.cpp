#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "coupling/markov_coupling.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace coupling;
using Catch::Approx;

namespace {

StochasticMatrix symmetric(double p) { return StochasticMatrix(Matrix::from_rows({{p, 1 - p}, {1 - p, p}})); }

FiniteDistribution product(const FiniteDistribution& a, const FiniteDistribution& b) {
    std::vector<double> w(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) w[pair_index(i, j, b.size())] = a[i] * b[j];
    return FiniteDistribution::normalized(std::move(w));
}

}  // namespace

TEST_CASE("stochastic matrix validation") {
    CHECK_THROWS_AS(StochasticMatrix(Matrix::from_rows({{0.5, 0.6}, {0.5, 0.5}})), std::invalid_argument);
    CHECK_THROWS_AS(StochasticMatrix(Matrix::from_rows({{1.5, -0.5}, {0.5, 0.5}})), std::invalid_argument);
    CHECK(symmetric(0.9).rho() == Approx(0.1));
    std::istringstream in("2 2\n0.25 0.75\n1 0\n");
    const auto p = read_stochastic_matrix(in);
    CHECK(p(0, 1) == 0.75);
    CHECK_FALSE(p.positive());
}

TEST_CASE("stationary vector agrees with the eigenvector oracle") {
    gen::Gen g(301);
    for (int t = 0; t < 100; ++t) {
        const auto p = g.chain(2 + g.below(7));
        const auto lam = stationary(p);
        const auto ref = oracle::stationary(p);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(lam[i] == Approx(ref[i]).margin(1e-12));
    }
}

TEST_CASE("marginal at time n is the initial law times P^(n-1)") {
    gen::Gen g(302);
    const auto p = g.chain(4);
    const FiniteDistribution nu(g.probs(4));
    const MarkovChainSpec spec(p, nu);
    for (int n = 1; n <= 20; ++n) {
        const auto got = marginal_at(spec, n);
        const auto ref = oracle::law_after(p, nu.weights(), n - 1);
        for (std::size_t i = 0; i < 4; ++i) CHECK(got[i] == Approx(ref[i]).margin(1e-13));
    }
    CHECK_THROWS(marginal_at(spec, 0));
}

TEST_CASE("symmetric chain decays exactly like 0.8^n") {
    const auto curve = tv_decay_curve(symmetric(0.9), FiniteDistribution({1.0, 0.0}), 50);
    REQUIRE(curve.size() == 50);
    for (const auto& pt : curve) {
        CHECK(pt.tv == Approx(std::pow(0.8, pt.n)).margin(1e-12));
        CHECK(pt.bound == Approx(2 * std::pow(0.9, pt.n)).epsilon(1e-14));
    }
}

TEST_CASE("tv decay stays under 2(1-rho)^n") {
    gen::Gen g(303);
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 2 + g.below(7);
        const auto p = g.chain(d);
        const FiniteDistribution nu(g.probs(d, 0.5));
        const auto lam = oracle::stationary(p);
        for (const auto& pt : tv_decay_curve(p, nu, 60)) {
            CHECK(pt.tv <= pt.bound + 1e-10);
            if (pt.n % 15 == 0) CHECK(pt.tv == Approx(oracle::l1(lam, oracle::law_after(p, nu.weights(), pt.n))).margin(1e-12));
        }
    }
}

TEST_CASE("product chain moves the coordinates independently") {
    const auto p = StochasticMatrix(Matrix::from_rows({{0.2, 0.8}, {0.6, 0.4}}));
    const auto q = product_chain(p);
    REQUIRE(q.size() == 4);
    CHECK(q(pair_index(0, 1, 2), pair_index(1, 0, 2)) == Approx(0.8 * 0.6));
    CHECK(q.rho() == Approx(0.2 * 0.2));
}

TEST_CASE("meeting time tail agrees with the product chain oracle and the bound") {
    gen::Gen g(304);
    for (int t = 0; t < 60; ++t) {
        const std::size_t d = 2 + g.below(5);
        const auto p = g.chain(d);
        const FiniteDistribution a(g.probs(d)), b(g.probs(d));
        const auto pair = product(a, b);
        const auto tail = meeting_time_tail_exact(p, pair, 40);
        const auto ref = oracle::meeting_tail(p, pair.weights(), 40);
        for (const auto& pt : tail) {
            CHECK(pt.tail == Approx(ref[pt.n]).margin(1e-13));
            CHECK(pt.tail <= std::pow(1 - p.rho(), pt.n) + 1e-12);
        }
    }
}

TEST_CASE("all-halves chain attains the meeting bound") {
    const auto p = symmetric(0.5);
    const auto pair = product(FiniteDistribution({1, 0}), FiniteDistribution({0, 1}));
    for (const auto& pt : meeting_time_tail_exact(p, pair, 100)) CHECK(pt.tail == Approx(std::pow(0.5, pt.n)).margin(1e-12));
}

TEST_CASE("coalescing pair law agrees with the full transition matrix") {
    gen::Gen g(305);
    for (int t = 0; t < 30; ++t) {
        const std::size_t d = 2 + g.below(4);
        const auto p = g.chain(d);
        const auto pair = product(FiniteDistribution(g.probs(d)), FiniteDistribution(g.probs(d)));
        for (int n : {1, 2, 5, 17}) {
            const auto law = coalescing_pair_law(p, pair, n);
            const auto ref = oracle::coalescing_law(p, pair.weights(), n);
            for (std::size_t k = 0; k < ref.size(); ++k) CHECK(law[k] == Approx(ref[k]).margin(1e-13));
        }
    }
}

TEST_CASE("coalescing chain identities") {
    gen::Gen g(306);
    for (int t = 0; t < 40; ++t) {
        const std::size_t d = 2 + g.below(4);
        const auto p = g.chain(d);
        const FiniteDistribution a(g.probs(d)), b(g.probs(d));
        const auto pair = product(a, b);
        const auto tail = meeting_time_tail_exact(p, pair, 30);
        for (int n = 1; n <= 30; ++n) {
            const auto law = coalescing_pair_law(p, pair, n);
            // The meeting time has the same law as under independence.
            double apart = 0.0;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    if (i != j) apart += law[pair_index(i, j, d)];
            CHECK(apart == Approx(tail[static_cast<std::size_t>(n - 1)].tail).margin(1e-12));

            const auto m = coalescing_marginals_exact(p, pair, n);
            const auto x_ref = marginal_at(MarkovChainSpec(p, a), n);
            const auto y_ref = marginal_at(MarkovChainSpec(p, b), n);
            for (std::size_t j = 0; j < d; ++j) {
                CHECK(m.x[j] == Approx(x_ref[j]).margin(1e-12));
                if (n >= 2) CHECK(m.y[j] >= p.rho() - 1e-12);
                // Y is again a P-chain after the meeting (strong Markov property).
                CHECK(m.y[j] == Approx(y_ref[j]).margin(1e-12));
            }
        }
    }
}

TEST_CASE("coalesced paths never separate") {
    gen::Gen g(307);
    const auto p = g.chain(3, 0.05);
    const FiniteDistribution a({1, 0, 0}), b({0, 0, 1});
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const auto path = simulate_coalescing(p, a, b, 80, seed);
        const auto t = coupling_times(path);
        REQUIRE(t.first_meeting);
        CHECK(t.coupling == t.first_meeting);
        CHECK(*t.shift_coupling == *t.coupling - 1);
        for (std::size_t i = static_cast<std::size_t>(*t.first_meeting - 1); i < path.length(); ++i)
            CHECK(path.x()[i] == path.y()[i]);
    }
}

TEST_CASE("simulation is a function of the seed") {
    const auto p = symmetric(0.7);
    const FiniteDistribution a({1, 0}), b({0, 1});
    const auto u = simulate_coalescing(p, a, b, 50, 9), v = simulate_coalescing(p, a, b, 50, 9);
    CHECK(u.x() == v.x());
    CHECK(u.y() == v.y());
}

TEST_CASE("empirical meeting tail matches the exact tail") {
    const auto p = StochasticMatrix(Matrix::from_rows({{0.6, 0.3, 0.1}, {0.2, 0.5, 0.3}, {0.3, 0.3, 0.4}}));
    const FiniteDistribution a({1, 0, 0}), b({0, 1, 0});
    const auto tail = meeting_time_tail_exact(p, product(a, b), 10);
    const int runs = 20000;
    std::vector<int> late(11, 0);
    for (int r = 0; r < runs; ++r) {
        const auto t = coupling_times(simulate_coalescing(p, a, b, 40, 1000 + r));
        for (int n = 0; n <= 10; ++n)
            if (!t.first_meeting || *t.first_meeting > n + 1) ++late[n];
    }
    for (int n = 0; n <= 10; ++n) {
        const double q = tail[n].tail, se = std::sqrt(q * (1 - q) / runs);
        CHECK(std::abs(late[n] / double(runs) - q) <= 4 * se + 1e-12);
    }
}

TEST_CASE("coupling times of a worked example") {
    // Paths agree at time 2, separate, and agree from time 4 on.
    const PairPath path(2, {1, 2, 1, 2, 2, 1}, {2, 2, 2, 2, 2, 1});
    const auto t = coupling_times(path);
    CHECK(*t.first_meeting == 2);
    CHECK(*t.coupling == 4);
    CHECK(*t.shift_coupling == 3);
    CHECK(t.coupling_is_lower_bound);
    const auto never = coupling_times(PairPath(2, {1, 1}, {2, 2}));
    CHECK_FALSE(never.first_meeting);
    CHECK_FALSE(never.coupling);
}
