#include "coupling/random_instances.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace coupling::random {

FiniteDistribution distribution(Rng& rng, std::size_t size, double sparsity) {
    std::vector<double> w(size);
    for (double& x : w) x = rng.uniform() < sparsity ? 0.0 : rng.uniform(0.01, 1.0);
    if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; })) w[rng.below(size)] = 1.0;
    return FiniteDistribution::normalized(std::move(w));
}

StochasticMatrix positive_chain(Rng& rng, std::size_t d, double floor) {
    Matrix p(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += p(i, j) = rng.uniform(floor, 1.0);
        for (std::size_t j = 0; j < d; ++j) p(i, j) /= s;
        // Put the rounding residue on the diagonal so rows sum to 1 closely.
        double t = 0.0;
        for (std::size_t j = 0; j < d; ++j) t += p(i, j);
        p(i, i) += 1.0 - t;
    }
    return StochasticMatrix(std::move(p));
}

StochasticMatrix two_state_chain(Rng& rng, double lo, double hi) {
    const double a = rng.uniform(lo, hi), b = rng.uniform(lo, hi);
    return StochasticMatrix(Matrix::from_rows({{a, 1.0 - a}, {1.0 - b, b}}));
}

CostMatrix metric(Rng& rng, std::size_t size) {
    Matrix c(size, size);
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = i + 1; j < size; ++j) c(i, j) = c(j, i) = rng.uniform(0.1, 1.0);
    for (std::size_t k = 0; k < size; ++k)
        for (std::size_t i = 0; i < size; ++i)
            for (std::size_t j = 0; j < size; ++j) c(i, j) = std::min(c(i, j), c(i, k) + c(k, j));
    return CostMatrix::metric(std::move(c));
}

CouplingPlan feasible_plan(Rng& rng, const FiniteDistribution& mu, const FiniteDistribution& nu) {
    const std::size_t m = mu.size(), k = nu.size();
    std::vector<std::size_t> ri(m), ci(k);
    std::iota(ri.begin(), ri.end(), 0);
    std::iota(ci.begin(), ci.end(), 0);
    for (std::size_t i = m; i > 1; --i) std::swap(ri[i - 1], ri[rng.below(i)]);
    for (std::size_t j = k; j > 1; --j) std::swap(ci[j - 1], ci[rng.below(j)]);

    Matrix corner(m, k);
    std::vector<double> a(mu.weights().begin(), mu.weights().end()), b(nu.weights().begin(), nu.weights().end());
    std::size_t i = 0, j = 0;
    while (i < m && j < k) {
        const double t = std::min(a[ri[i]], b[ci[j]]);
        corner(ri[i], ci[j]) += t;
        a[ri[i]] -= t;
        b[ci[j]] -= t;
        if (a[ri[i]] <= b[ci[j]]) ++i;
        else ++j;
    }
    const double w = rng.uniform();
    Matrix g(m, k);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < k; ++c) g(r, c) = w * mu[r] * nu[c] + (1.0 - w) * corner(r, c);
    return CouplingPlan(std::move(g), mu, nu);
}

Potential potential(Rng& rng, int d, int depth, double amplitude, double theta) {
    std::vector<double> t(word_count(d, depth));
    for (double& v : t) v = rng.uniform(-amplitude, amplitude);
    return normalize_potential(Potential(LocallyConstantFunction(d, depth, std::move(t)), theta));
}

ShiftPoint shift_point(Rng& rng, int d, std::size_t max_prefix, std::size_t max_cycle) {
    auto word = [&](std::size_t n) {
        std::vector<int> w(n);
        for (int& s : w) s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
        return w;
    };
    const std::size_t np = rng.below(max_prefix + 1);
    const std::size_t nc = 1 + rng.below(max_cycle);
    auto prefix = word(np);
    auto cycle = word(nc);
    return ShiftPoint(d, std::move(prefix), std::move(cycle));
}

AtomicMeasure atomic_measure(Rng& rng, int d, std::size_t atoms) {
    std::set<ShiftPoint> seen;
    std::vector<ShiftPoint> pts;
    while (pts.size() < atoms) {
        ShiftPoint x = shift_point(rng, d);
        if (seen.insert(x).second) pts.push_back(std::move(x));
    }
    const auto w = distribution(rng, atoms);
    std::vector<std::pair<ShiftPoint, double>> out;
    for (std::size_t i = 0; i < atoms; ++i) out.emplace_back(std::move(pts[i]), w[i]);
    return AtomicMeasure(std::move(out));
}

}  // namespace coupling::random
