#include "coupling/markov_coupling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "coupling/rng.hpp"
#include "coupling/transport.hpp"

namespace coupling {

namespace {

void require_positive(const StochasticMatrix& p, const char* what) {
    if (!p.positive())
        throw std::invalid_argument(std::string(what) + ": transition matrix has a zero entry");
}

std::vector<double> step(std::span<const double> v, const StochasticMatrix& p) {
    const std::size_t d = p.size();
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        if (v[i] == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) out[j] += v[i] * p(i, j);
    }
    return out;
}

// Re-sums after many steps so the validating constructor sees unit mass.
FiniteDistribution as_distribution(std::vector<double> w) {
    for (double& x : w) x = std::max(x, 0.0);
    return FiniteDistribution::normalized(std::move(w));
}

}  // namespace

StochasticMatrix::StochasticMatrix(Matrix p) : p_(std::move(p)) {
    if (!p_.square() || p_.rows() == 0)
        throw std::invalid_argument("StochasticMatrix: matrix must be square and non-empty");
    rho_ = 1.0;
    for (std::size_t i = 0; i < p_.rows(); ++i) {
        double s = 0.0;
        for (double x : p_.row(i)) {
            if (!std::isfinite(x) || x < 0.0)
                throw std::invalid_argument("StochasticMatrix: negative or non-finite entry");
            s += x;
            rho_ = std::min(rho_, x);
        }
        if (std::abs(s - 1.0) > kRowTolerance) {
            std::ostringstream os;
            os << "StochasticMatrix: row " << i << " sums to " << std::setprecision(17) << s;
            throw std::invalid_argument(os.str());
        }
    }
}

MarkovChainSpec::MarkovChainSpec(StochasticMatrix p, FiniteDistribution init)
    : matrix(std::move(p)), initial(std::move(init)) {
    if (initial.size() != matrix.size())
        throw std::invalid_argument("MarkovChainSpec: initial vector and matrix dimensions differ");
}

PairPath::PairPath(int alphabet, std::vector<int> x, std::vector<int> y)
    : alphabet_(alphabet), x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size()) throw std::invalid_argument("PairPath: paths differ in length");
    for (std::size_t i = 0; i < x_.size(); ++i)
        if (x_[i] < 1 || x_[i] > alphabet_ || y_[i] < 1 || y_[i] > alphabet_)
            throw std::invalid_argument("PairPath: symbol out of range");
}

FiniteDistribution stationary(const StochasticMatrix& p) {
    require_positive(p, "stationary");
    const std::size_t d = p.size();
    // Solve lambda (P - I) = 0 with the last equation replaced by sum = 1,
    // i.e. the system (P^T - I) lambda^T = 0 in column form.
    std::vector<std::vector<double>> a(d, std::vector<double>(d + 1, 0.0));
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) a[r][c] = p(c, r) - (r == c ? 1.0 : 0.0);
    for (std::size_t c = 0; c < d; ++c) a[d - 1][c] = 1.0;
    a[d - 1][d] = 1.0;

    for (std::size_t col = 0; col < d; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < d; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        const double diag = a[col][col];
        if (diag == 0.0) throw std::runtime_error("stationary: singular system");
        for (std::size_t r = 0; r < d; ++r) {
            if (r == col || a[r][col] == 0.0) continue;
            const double f = a[r][col] / diag;
            for (std::size_t c = col; c <= d; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<double> lambda(d);
    for (std::size_t i = 0; i < d; ++i) lambda[i] = std::max(a[i][d] / a[i][i], 0.0);

    // A few power steps remove the elimination rounding.
    auto residual = [&](const std::vector<double>& v) {
        const auto w = step(v, p);
        double r = 0.0;
        for (std::size_t i = 0; i < d; ++i) r = std::max(r, std::abs(w[i] - v[i]));
        return r;
    };
    double total = 0.0;
    for (double x : lambda) total += x;
    for (double& x : lambda) x /= total;
    for (int it = 0; it < 100 && residual(lambda) > 1e-15; ++it) {
        lambda = step(lambda, p);
        total = 0.0;
        for (double x : lambda) total += x;
        for (double& x : lambda) x /= total;
    }
    if (residual(lambda) > 1e-12) throw std::runtime_error("stationary: residual above 1e-12");
    return FiniteDistribution::normalized(std::move(lambda));
}

FiniteDistribution marginal_at(const MarkovChainSpec& spec, int n) {
    if (n < 1) throw std::invalid_argument("marginal_at: time starts at n = 1");
    std::vector<double> v(spec.initial.weights().begin(), spec.initial.weights().end());
    for (int k = 1; k < n; ++k) v = step(v, spec.matrix);
    return as_distribution(std::move(v));
}

std::vector<DecayPoint> tv_decay_curve(const StochasticMatrix& p, const FiniteDistribution& nu, int steps) {
    require_positive(p, "tv_decay_curve");
    if (steps < 0 || steps > 10000) throw std::invalid_argument("tv_decay_curve: N must lie in [0, 10000]");
    if (nu.size() != p.size()) throw std::invalid_argument("tv_decay_curve: dimension mismatch");
    const auto lambda = stationary(p);
    std::vector<double> v(nu.weights().begin(), nu.weights().end());
    std::vector<DecayPoint> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int n = 1; n <= steps; ++n) {
        v = step(v, p);
        double tv = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) tv += std::abs(lambda[i] - v[i]);
        const double bound = 2.0 * std::pow(1.0 - p.rho(), n);
        if (tv > bound + 1e-10) {
            std::ostringstream os;
            os << "tv_decay_curve: bound violated at n=" << n << " (tv " << std::setprecision(17) << tv
               << " > " << bound << ")";
            throw std::logic_error(os.str());
        }
        out.push_back({n, tv, bound});
    }
    return out;
}

StochasticMatrix product_chain(const StochasticMatrix& p) {
    const std::size_t d = p.size();
    Matrix q(d * d, d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t k = 0; k < d; ++k)
                for (std::size_t l = 0; l < d; ++l)
                    q(pair_index(i, j, d), pair_index(k, l, d)) = p(i, k) * p(j, l);
    return StochasticMatrix(std::move(q));
}

namespace {

// W -> P^T W P on a d x d array.
std::vector<double> independent_step(const std::vector<double>& w, const StochasticMatrix& p) {
    const std::size_t d = p.size();
    std::vector<double> tmp(d * d, 0.0), out(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double x = w[i * d + j];
            if (x == 0.0) continue;
            for (std::size_t l = 0; l < d; ++l) tmp[i * d + l] += x * p(j, l);
        }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t l = 0; l < d; ++l) out[k * d + l] += p(i, k) * tmp[i * d + l];
    return out;
}

std::size_t pair_dimension(const StochasticMatrix& p, const FiniteDistribution& init_pair, const char* what) {
    const std::size_t d = p.size();
    if (init_pair.size() != d * d)
        throw std::invalid_argument(std::string(what) + ": pair law must have d*d entries");
    return d;
}

}  // namespace

std::vector<TailPoint> meeting_time_tail_exact(const StochasticMatrix& p, const FiniteDistribution& init_pair,
                                               int steps) {
    require_positive(p, "meeting_time_tail_exact");
    const std::size_t d = pair_dimension(p, init_pair, "meeting_time_tail_exact");
    if (steps < 0) throw std::invalid_argument("meeting_time_tail_exact: negative N");
    std::vector<double> w(init_pair.weights().begin(), init_pair.weights().end());
    std::vector<TailPoint> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    for (int n = 0; n <= steps; ++n) {
        if (n > 0) w = independent_step(w, p);
        for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 0.0;  // absorbed at meeting
        double tail = 0.0;
        for (double x : w) tail += x;
        const double bound = std::pow(1.0 - p.rho(), n);
        if (tail > bound + 1e-12) {
            std::ostringstream os;
            os << "meeting_time_tail_exact: bound violated at n=" << n << " (" << std::setprecision(17)
               << tail << " > " << bound << ")";
            throw std::logic_error(os.str());
        }
        out.push_back({n, tail, bound});
    }
    return out;
}

PairPath simulate_coalescing(const StochasticMatrix& p, const FiniteDistribution& init_x,
                             const FiniteDistribution& init_y, int horizon, std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("simulate_coalescing: horizon must be >= 1");
    if (init_x.size() != p.size() || init_y.size() != p.size())
        throw std::invalid_argument("simulate_coalescing: dimension mismatch");
    Rng rx(seed, 0), ry(seed, 1);
    std::vector<int> xs, ys;
    xs.reserve(static_cast<std::size_t>(horizon));
    ys.reserve(static_cast<std::size_t>(horizon));
    auto x = rx.categorical(init_x.weights());
    auto y = ry.categorical(init_y.weights());
    for (int n = 1; n <= horizon; ++n) {
        if (n > 1) {
            // Once met, y follows x; this also covers a meeting at time 1.
            const bool met = x == y;
            x = rx.categorical(p.matrix().row(x));
            y = met ? x : ry.categorical(p.matrix().row(y));
        }
        xs.push_back(static_cast<int>(x) + 1);
        ys.push_back(static_cast<int>(y) + 1);
    }
    return PairPath(static_cast<int>(p.size()), std::move(xs), std::move(ys));
}

FiniteDistribution coalescing_pair_law(const StochasticMatrix& p, const FiniteDistribution& init_pair, int n) {
    require_positive(p, "coalescing_pair_law");
    const std::size_t d = pair_dimension(p, init_pair, "coalescing_pair_law");
    if (n < 1 || n > 1000) throw std::invalid_argument("coalescing_pair_law: n must lie in [1, 1000]");
    std::vector<double> w(init_pair.weights().begin(), init_pair.weights().end());
    for (int k = 1; k < n; ++k) {
        std::vector<double> off = w, diag(d, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            diag[i] = w[i * d + i];
            off[i * d + i] = 0.0;
        }
        w = independent_step(off, p);
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t l = 0; l < d; ++l) w[l * d + l] += diag[j] * p(j, l);
    }
    return as_distribution(std::move(w));
}

PairMarginals pair_marginals(const FiniteDistribution& pair_law, std::size_t d) {
    if (pair_law.size() != d * d) throw std::invalid_argument("pair_marginals: pair law must have d*d entries");
    std::vector<double> x(d, 0.0), y(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            x[i] += pair_law[i * d + j];
            y[j] += pair_law[i * d + j];
        }
    return {as_distribution(std::move(x)), as_distribution(std::move(y))};
}

PairMarginals coalescing_marginals_exact(const StochasticMatrix& p, const FiniteDistribution& init_pair, int n) {
    return pair_marginals(coalescing_pair_law(p, init_pair, n), p.size());
}

CouplingTimes coupling_times(const PairPath& path) {
    CouplingTimes t;
    const auto& x = path.x();
    const auto& y = path.y();
    const std::size_t len = path.length();
    for (std::size_t i = 0; i < len; ++i)
        if (x[i] == y[i]) {
            t.first_meeting = static_cast<std::int64_t>(i) + 1;
            break;
        }
    if (len == 0 || x[len - 1] != y[len - 1]) return t;
    std::size_t n = len;
    while (n > 1 && x[n - 2] == y[n - 2]) --n;
    t.coupling = static_cast<std::int64_t>(n);
    t.shift_coupling = static_cast<std::int64_t>(n) - 1;
    return t;
}

StochasticMatrix read_stochastic_matrix(std::istream& in) { return StochasticMatrix(read_matrix(in)); }

}  // namespace coupling
