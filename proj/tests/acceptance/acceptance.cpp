// Acceptance run: every criterion at its stated tolerance and runtime limit,
// one PASS/FAIL line each. Exit status is non-zero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "coupling/dbar.hpp"
#include "coupling/harness.hpp"
#include "coupling/markov_coupling.hpp"
#include "coupling/random_instances.hpp"
#include "coupling/ruelle.hpp"
#include "coupling/transport.hpp"
#include "support/oracles.hpp"

using namespace coupling;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > limit_seconds) {
        r.pass = false;
        r.detail += "; runtime limit exceeded";
    }
    if (!r.pass) ++failures;
    std::printf("%s  %2d %-34s %s [%.2fs / %.0fs]\n", r.pass ? "PASS" : "FAIL", id, name.c_str(), r.detail.c_str(), secs,
                limit_seconds);
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

FiniteDistribution product(const FiniteDistribution& a, const FiniteDistribution& b) {
    std::vector<double> w(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) w[pair_index(i, j, b.size())] = a[i] * b[j];
    return FiniteDistribution::normalized(std::move(w));
}

// The chain suite shared by criteria 4 and 5.
std::vector<std::pair<StochasticMatrix, FiniteDistribution>> chain_suite() {
    std::vector<std::pair<StochasticMatrix, FiniteDistribution>> out;
    for (std::uint64_t k = 0; k < 200; ++k) {
        Rng rng(4000, k);
        const std::size_t d = 2 + rng.below(7);
        auto p = random::positive_chain(rng, d, 0.02);
        out.emplace_back(std::move(p), random::distribution(rng, d, 0.5));
    }
    return out;
}

Potential uniform_potential(int d) {
    return Potential(LocallyConstantFunction::constant(d, -std::log(static_cast<double>(d))), 0.5);
}

}  // namespace

int main() {
    criterion(1, "maximal coupling identity", 5, [] {
        double worst = 0.0;
        for (std::uint64_t k = 0; k < 1000; ++k) {
            Rng rng(1000, k);
            const std::size_t m = 1 + rng.below(64);
            const auto mu = random::distribution(rng, m, 0.3), nu = random::distribution(rng, m, 0.3);
            worst = std::max(worst, std::abs(2 * mismatch_mass(maximal_coupling(mu, nu).plan) - tv_distance(mu, nu)));
        }
        return Outcome{worst <= 1e-12, fmt("max |2 mismatch - tv| = %.3g", worst)};
    });

    criterion(2, "coupling lower bound", 30, [] {
        double worst = -1.0;
        for (std::uint64_t k = 0; k < 100; ++k) {
            Rng rng(2000, k);
            const std::size_t m = 1 + rng.below(64);
            const auto mu = random::distribution(rng, m, 0.3), nu = random::distribution(rng, m, 0.3);
            const double tv = tv_distance(mu, nu);
            for (int p = 0; p < 1000; ++p)
                worst = std::max(worst, tv - 2 * mismatch_mass(random::feasible_plan(rng, mu, nu)));
        }
        return Outcome{worst <= 1e-10, fmt("max (tv - 2 mismatch) = %.3g", worst)};
    });

    criterion(3, "W1 duality", 60, [] {
        double worst = 0.0;
        for (std::uint64_t k = 0; k < 200; ++k) {
            Rng rng(3000, k);
            const std::size_t m = 2 + rng.below(99);
            const auto cost = random::metric(rng, m);
            const auto mu = random::distribution(rng, m, 0.2), nu = random::distribution(rng, m, 0.2);
            const auto sol = solve_w1(mu, nu, cost);
            const auto cert = kantorovich_certificate(sol.plan, cost);
            worst = std::max({worst, std::abs(sol.value - cert.dual), std::abs(cert.primal - cert.dual)});
        }
        return Outcome{worst <= 1e-9, fmt("max |primal - dual| = %.3g", worst)};
    });

    criterion(4, "tv decay under 2(1-rho)^n", 30, [] {
        double excess = -1.0, oracle_gap = 0.0;
        for (const auto& [p, nu] : chain_suite()) {
            const auto lam = oracle::stationary(p);
            for (const auto& pt : tv_decay_curve(p, nu, 100)) {
                excess = std::max(excess, pt.tv - 2 * std::pow(1 - p.rho(), pt.n));
                if (pt.n % 25 == 0)
                    oracle_gap = std::max(oracle_gap, std::abs(pt.tv - oracle::l1(lam, oracle::law_after(p, nu.weights(), pt.n))));
            }
        }
        const StochasticMatrix sym(Matrix::from_rows({{0.9, 0.1}, {0.1, 0.9}}));
        double exact = 0.0;
        for (const auto& pt : tv_decay_curve(sym, FiniteDistribution({1.0, 0.0}), 100))
            exact = std::max(exact, std::abs(pt.tv - std::pow(0.8, pt.n)));
        const bool ok = excess <= 1e-10 && exact <= 1e-12 && oracle_gap <= 1e-10;
        return Outcome{ok, fmt("max excess %.3g", excess) + fmt(", |tv - 0.8^n| %.3g", exact) +
                               fmt(", oracle gap %.3g", oracle_gap)};
    });

    criterion(5, "meeting time tail", 10, [] {
        double excess = -1.0;
        for (const auto& [p, nu] : chain_suite()) {
            const auto lam = stationary(p);
            for (const auto& pt : meeting_time_tail_exact(p, product(nu, lam), 100))
                excess = std::max(excess, pt.tail - std::pow(1 - p.rho(), pt.n));
        }
        const StochasticMatrix half(Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}));
        double equal = 0.0;
        for (const auto& pt : meeting_time_tail_exact(half, product(FiniteDistribution({1, 0}), FiniteDistribution({0, 1})), 100))
            equal = std::max(equal, std::abs(pt.tail - std::pow(0.5, pt.n)));
        return Outcome{excess <= 1e-12 && equal <= 1e-12,
                       fmt("max excess %.3g", excess) + fmt(", all-halves |tail - 2^-n| %.3g", equal)};
    });

    criterion(6, "coalescing chain identities", 60, [] {
        double meet = 0.0, first = 0.0, second_floor = 1.0;
        for (std::uint64_t k = 0; k < 100; ++k) {
            Rng rng(6000, k);
            const std::size_t d = 2 + rng.below(4);
            const auto p = random::positive_chain(rng, d, 0.02);
            const auto a = random::distribution(rng, d), b = random::distribution(rng, d);
            const auto pair = product(a, b);
            const auto tail = meeting_time_tail_exact(p, pair, 30);
            for (int n = 1; n <= 30; ++n) {
                const auto law = coalescing_pair_law(p, pair, n);
                double apart = 0.0;
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j)
                        if (i != j) apart += law[pair_index(i, j, d)];
                meet = std::max(meet, std::abs(apart - tail[static_cast<std::size_t>(n - 1)].tail));
                const auto m = pair_marginals(law, d);
                const auto x_ref = marginal_at(MarkovChainSpec(p, a), n);
                for (std::size_t j = 0; j < d; ++j) {
                    first = std::max(first, std::abs(m.x[j] - x_ref[j]));
                    if (n >= 2) second_floor = std::min(second_floor, m.y[j] - p.rho());
                }
            }
        }
        std::size_t split = 0;
        {
            Rng rng(6100);
            const auto p = random::positive_chain(rng, 3, 0.05);
            const FiniteDistribution a({1, 0, 0}), b({0, 0, 1});
            for (std::uint64_t s = 0; s < 5000; ++s) {
                const auto t = coupling_times(simulate_coalescing(p, a, b, 60, s));
                if (t.coupling != t.first_meeting) ++split;
            }
        }
        // Search for a chain whose second marginal departs from the P-chain
        // started at the second initial law.
        double discrepancy = 0.0;
        for (std::uint64_t k = 0; k < 3000; ++k) {
            Rng rng(6200, k);
            const auto p = random::positive_chain(rng, 3, 0.01);
            const auto a = random::distribution(rng, 3, 0.3), b = random::distribution(rng, 3, 0.3);
            for (int n = 1; n <= 10; ++n) {
                const auto m = coalescing_marginals_exact(p, product(a, b), n);
                const auto y_ref = marginal_at(MarkovChainSpec(p, b), n);
                for (std::size_t j = 0; j < 3; ++j) discrepancy = std::max(discrepancy, std::abs(m.y[j] - y_ref[j]));
            }
        }
        const bool identities = meet <= 1e-12 && first <= 1e-12 && second_floor >= -1e-12 && split == 0;
        const bool witness = discrepancy > 1e-6;
        std::string detail = fmt("T1 law gap %.3g", meet) + fmt(", first marginal gap %.3g", first) +
                             fmt(", min(second - rho) %.3g", second_floor) + ", T != T1 in " + std::to_string(split) +
                             " of 5000 paths" + fmt("; counterexample search: max second-marginal discrepancy %.3g", discrepancy) +
                             (witness ? " (found)" : " (none > 1e-6: the second marginal is itself a P-chain)");
        return Outcome{identities && witness, detail};
    });

    criterion(7, "dbar closed form", 30, [] {
        double lp_gap = 0.0, mono_gap = 0.0;
        for (std::uint64_t k = 0; k < 500; ++k) {
            Rng rng(7000, k);
            const double p1 = rng.uniform(), q1 = rng.uniform();
            const BernoulliSpec p(FiniteDistribution({p1, 1 - p1})), q(FiniteDistribution({q1, 1 - q1}));
            const double closed = dbar_closed_form(p, q);
            lp_gap = std::max(lp_gap, std::abs(dbar_lp(p, q).value - closed));
            const auto j = p1 <= q1 ? monotone_joining(p, q) : monotone_joining(q, p);
            mono_gap = std::max(mono_gap, std::abs(j.off_diagonal_mass() - closed));
        }
        const BernoulliSpec p(FiniteDistribution({0.3, 0.7})), q(FiniteDistribution({0.5, 0.5}));
        const std::size_t n = 100000;
        const double h = hamming_mean(sample_joining(monotone_joining(p, q), n, 7100));
        const double se = std::sqrt(h * (1 - h) / n);
        const bool sim = std::abs(h - 0.2) <= 3 * se;
        return Outcome{lp_gap <= 1e-12 && mono_gap <= 1e-12 && sim,
                       fmt("|closed - lp| %.3g", lp_gap) + fmt(", |monotone - closed| %.3g", mono_gap) +
                           fmt(", simulated %.5f", h) + fmt(" (3 se = %.5f)", 3 * se)};
    });

    criterion(8, "bounded distortion", 30, [] {
        double excess = -1.0, tightest = 0.0;
        for (std::uint64_t k = 0; k < 1000; ++k) {
            Rng rng(8000, k);
            const int d = 2 + static_cast<int>(rng.below(2));
            const double theta = rng.uniform(0.25, 0.75);
            const auto A = random::potential(rng, d, 2, rng.uniform(0.1, 1.5), theta);
            const auto x = random::shift_point(rng, d), y = random::shift_point(rng, d);
            const int t = 1 + static_cast<int>(rng.below(6));
            const double bound = std::exp(A.M * d_theta(x, y, theta) / (1 - theta));
            const auto px = preimages(x, t), py = preimages(y, t);
            for (std::size_t j = 0; j < px.size(); ++j) {
                const double ratio = birkhoff_weight(A, px[j], t) / birkhoff_weight(A, py[j], t);
                excess = std::max(excess, ratio - bound);
                if (!(x == y)) tightest = std::max(tightest, std::log(ratio) / std::log(bound));
            }
        }
        return Outcome{excess <= 1e-10, fmt("max (ratio - bound) = %.3g", excess) +
                                            fmt(", max log ratio / log bound %.3f over distinct pairs", tightest)};
    });

    criterion(9, "Lasota-Yorke with derived C", 60, [] {
        double worst = -1e300;
        for (std::uint64_t k = 0; k < 5; ++k) {
            Rng rng(9000, k);
            const auto A = random::potential(rng, 2 + static_cast<int>(rng.below(2)), 2, rng.uniform(0.1, 1.0), 0.5);
            const auto cert = make_certificate(A);
            worst = std::max(worst, lasota_yorke_check(A, cert, 1000, 42 + k));
        }
        Rng rng(9100);
        const auto A = random::potential(rng, 2, 2, 1.0, 0.5);
        CertificateOptions opt;
        opt.C_override = 1e-9;
        bool aborted = false;
        try {
            make_certificate(A, opt);
        } catch (const std::runtime_error&) {
            aborted = true;
        }
        return Outcome{worst <= 1e-10 && aborted,
                       fmt("max violation %.3g", worst) + (aborted ? ", undersized C aborts" : ", undersized C NOT rejected")};
    });

    criterion(10, "coupling lemma", 60, [] {
        double marg = 0.0, mass = 1.0, dist = -1.0;
        for (std::uint64_t k = 0; k < 100; ++k) {
            Rng rng(10000, k);
            const int d = 2 + static_cast<int>(rng.below(2));
            const auto A = random::potential(rng, d, 1 + static_cast<int>(rng.below(2)), rng.uniform(0.05, 0.4), 0.5);
            const auto cert = make_certificate(A);
            const auto x = random::shift_point(rng, d), y = random::shift_point(rng, d);
            const auto lc = lemma_coupling(A, x, y, cert.T);
            const auto px = dual_apply(A, AtomicMeasure::dirac(x), cert.T);
            const auto py = dual_apply(A, AtomicMeasure::dirac(y), cert.T);
            const auto mx = lc.marginal_x(), my = lc.marginal_y();
            for (std::size_t j = 0; j < mx.size(); ++j) {
                marg = std::max({marg, std::abs(mx[j] - px.atoms()[j].second), std::abs(my[j] - py.atoms()[j].second)});
                dist = std::max(dist, d_theta(lc.preimages_x[j], lc.preimages_y[j], 0.5) - std::pow(0.5, cert.T));
            }
            mass = std::min(mass, lc.paired_mass() - cert.Lambda);
            dist = std::max(dist, std::pow(0.5, cert.T) - cert.delta / 2);
        }
        return Outcome{marg <= 1e-10 && mass >= -1e-12 && dist <= 0.0,
                       fmt("marginal gap %.3g", marg) + fmt(", min(paired - Lambda) %.3g", mass) +
                           fmt(", max distance excess %.3g", dist)};
    });

    criterion(11, "contraction", 300, [] {
        int point_fail = 0, measure_fail = 0;
        double worst = -1.0, tightest = 0.0;
        for (std::uint64_t k = 0; k < 100; ++k) {
            Rng rng(11000, k);
            const int d = 2 + static_cast<int>(rng.below(2));
            const auto A = random::potential(rng, d, 2, rng.uniform(0.01, 0.1), 0.5);
            const auto cert = make_certificate(A);
            const auto r = verify_pointwise_contraction(A, random::shift_point(rng, d), random::shift_point(rng, d), cert);
            worst = std::max(worst, r.lhs - r.rhs);
            if (r.rhs > 0) tightest = std::max(tightest, r.lhs / r.rhs);
            if (!r.pass) ++point_fail;
        }
        for (std::uint64_t k = 0; k < 50; ++k) {
            Rng rng(11100, k);
            const int d = 2 + static_cast<int>(rng.below(2));
            const auto A = random::potential(rng, d, 2, rng.uniform(0.01, 0.1), 0.5);
            const auto cert = make_certificate(A);
            const auto mu = random::atomic_measure(rng, d, 4), nu = random::atomic_measure(rng, d, 4);
            const auto r = verify_measure_contraction(A, mu, nu, cert);
            worst = std::max(worst, r.lhs - r.rhs);
            if (r.rhs > 0) tightest = std::max(tightest, r.lhs / r.rhs);
            if (!r.pass) ++measure_fail;
        }
        return Outcome{point_fail == 0 && measure_fail == 0,
                       std::to_string(point_fail) + "/100 pointwise and " + std::to_string(measure_fail) +
                           "/50 measure failures" + fmt(", max (lhs - rhs) %.3g", worst) +
                           fmt(", max lhs / rhs %.3f", tightest)};
    });

    criterion(12, "Gibbs fixed point", 300, [] {
        double weight_gap = 0.0, ratio_excess = -1.0;
        int ratios = 0;
        for (std::uint64_t k = 0; k < 20; ++k) {
            Rng rng(12000, k);
            const auto p = random::two_state_chain(rng, 0.4, 0.6);
            const auto A = markov_potential(p, 0.5);
            const auto cert = make_certificate(A);
            const int blocks = std::max(2, std::min(4, 22 / cert.T));
            const auto start = random::shift_point(rng, 2);
            const auto it = iterate_to_gibbs(A, AtomicMeasure::dirac(start), blocks, cert);
            const auto lam = oracle::stationary(p);
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j)
                    weight_gap = std::max(weight_gap, std::abs(it.depth2_weights[i * 2 + j] - lam[i] * p(i, j)));
            for (const auto& b : it.blocks)
                if (b.ratio) {
                    ++ratios;
                    ratio_excess = std::max(ratio_excess, *b.ratio - cert.alpha);
                }
        }
        return Outcome{weight_gap <= 1e-8 && ratio_excess <= 1e-6 && ratios > 0,
                       fmt("depth-2 weight gap %.3g", weight_gap) + fmt(", max (ratio - alpha) %.3g", ratio_excess) +
                           " over " + std::to_string(ratios) + " ratios"};
    });

    criterion(13, "determinism", 120, [] {
        namespace fs = std::filesystem;
        const auto dir = fs::temp_directory_path() / ("coupling_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "p.txt") << "3 3\n0.5 0.3 0.2\n0.2 0.6 0.2\n0.3 0.3 0.4\n";
        std::ofstream(dir / "x.txt") << "3 0\n1 1\n";
        std::ofstream(dir / "y.txt") << "3 0\n3 1\n";
        std::ofstream(dir / "a.txt") << "2 2 0.5\n1 1 0.01\n1 2 -0.02\n2 1 0.0\n2 2 0.015\n";
        const std::vector<std::pair<std::string, nlohmann::json>> cases = {
            {"tv-suite", {{"trials", 200}, {"seed", 13}}},
            {"w1-suite", {{"trials", 20}, {"max_size", 40}, {"seed", 13}}},
            {"meeting-tail", {{"matrix", "p.txt"}, {"init_x", "x.txt"}, {"init_y", "y.txt"}, {"paths", 500}, {"seed", 13}}},
            {"dbar-suite", {{"p1", 0.3}, {"q1", 0.5}, {"trials", 50}, {"samples", 20000}, {"seed", 13}}},
            {"ruelle-contract", {{"potential", "a.txt"}, {"pairs", 10}, {"measures", 3}, {"seed", 13}}},
        };
        int identical = 0;
        std::string differing;
        for (const auto& [name, params] : cases) {
            std::vector<std::string> bodies;
            for (int parallel : {1, 1, 4}) {
                auto c = harness::make_config(name, params, dir);
                c.output_dir = dir / (name + "_" + std::to_string(bodies.size()));
                std::string all;
                for (const auto& a : harness::run(c, {parallel}).artifacts) {
                    std::ifstream in(a, std::ios::binary);
                    std::stringstream ss;
                    ss << in.rdbuf();
                    all += ss.str();
                }
                bodies.push_back(all);
            }
            if (bodies[0] == bodies[1] && bodies[0] == bodies[2]) ++identical;
            else differing += " " + name;
        }
        fs::remove_all(dir);
        return Outcome{identical == static_cast<int>(cases.size()),
                       std::to_string(identical) + "/" + std::to_string(cases.size()) +
                           " stochastic experiments byte-identical across reruns and --parallel 4" + differing};
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
