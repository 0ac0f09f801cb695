#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "coupling/matrix.hpp"
#include "coupling/measures.hpp"

namespace coupling {

// Row-sum tolerance of a stochastic matrix.
inline constexpr double kRowTolerance = 1e-12;

/// Row-stochastic d x d matrix; rho is its minimum entry.
class StochasticMatrix {
public:
    explicit StochasticMatrix(Matrix p);

    std::size_t size() const { return p_.rows(); }
    double rho() const { return rho_; }
    bool positive() const { return rho_ > 0.0; }
    const Matrix& matrix() const { return p_; }
    double operator()(std::size_t i, std::size_t j) const { return p_(i, j); }

private:
    Matrix p_;
    double rho_ = 0.0;
};

struct MarkovChainSpec {
    MarkovChainSpec(StochasticMatrix p, FiniteDistribution init);

    StochasticMatrix matrix;
    FiniteDistribution initial;
};

/// Two equal-length symbol sequences over {1..d}.
class PairPath {
public:
    PairPath(int alphabet, std::vector<int> x, std::vector<int> y);

    int alphabet() const { return alphabet_; }
    std::size_t length() const { return x_.size(); }
    const std::vector<int>& x() const { return x_; }
    const std::vector<int>& y() const { return y_; }

private:
    int alphabet_;
    std::vector<int> x_;
    std::vector<int> y_;
};

// States of a pair chain are indexed i * d + j (0-based coordinates).
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t d) { return i * d + j; }

FiniteDistribution stationary(const StochasticMatrix& p);

/// Law at time n (n >= 1); time 1 is the initial law, so this is initial * P^(n-1).
FiniteDistribution marginal_at(const MarkovChainSpec& spec, int n);

struct DecayPoint {
    int n;
    double tv;
    double bound;
};

/// tv(lambda, nu P^n) against 2 (1 - rho)^n for n = 1..N.
std::vector<DecayPoint> tv_decay_curve(const StochasticMatrix& p, const FiniteDistribution& nu, int steps);

/// Independent pair chain: ((i,j),(k,l)) -> P_ik P_jl.
StochasticMatrix product_chain(const StochasticMatrix& p);

struct TailPoint {
    int n;
    double tail;
    double bound;
};

/// Entry n is the probability that the independent pair has not met after
/// n transitions (entry 0: off-diagonal mass of init_pair), with the bound
/// (1 - rho)^n.
std::vector<TailPoint> meeting_time_tail_exact(const StochasticMatrix& p, const FiniteDistribution& init_pair,
                                               int steps);

/// One run of the coalescing chain: independent moves until the first
/// meeting, a single shared move afterwards. Rng(seed, 0) drives x and
/// Rng(seed, 1) drives y.
PairPath simulate_coalescing(const StochasticMatrix& p, const FiniteDistribution& init_x,
                             const FiniteDistribution& init_y, int horizon, std::uint64_t seed);

/// Law of the coalescing pair chain at time n (n = 1 is init_pair).
FiniteDistribution coalescing_pair_law(const StochasticMatrix& p, const FiniteDistribution& init_pair, int n);

struct PairMarginals {
    FiniteDistribution x;
    FiniteDistribution y;
};

PairMarginals pair_marginals(const FiniteDistribution& pair_law, std::size_t d);

/// Both marginals of the coalescing chain at time n.
PairMarginals coalescing_marginals_exact(const StochasticMatrix& p, const FiniteDistribution& init_pair, int n);

/// Coupling times of a finite pair path, 1-based.
///   first_meeting: least n with x_n = y_n.
///   coupling: least n with x_m = y_m for every n <= m <= length. Only a lower
///     bound on the time of the infinite sequences, since agreement is
///     observed to the end of the path only.
///   shift_coupling: least n with sigma^n x = sigma^n y on the observed
///     window, i.e. coupling - 1.
/// Empty optionals mean "not observed within the path".
struct CouplingTimes {
    std::optional<std::int64_t> first_meeting;
    std::optional<std::int64_t> coupling;
    std::optional<std::int64_t> shift_coupling;
    bool coupling_is_lower_bound = true;
};

CouplingTimes coupling_times(const PairPath& path);

// Text format for stochastic matrices is the dense matrix format.
StochasticMatrix read_stochastic_matrix(std::istream& in);

}  // namespace coupling
