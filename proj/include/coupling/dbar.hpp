#pragma once

#include <cstdint>

#include "coupling/markov_coupling.hpp"
#include "coupling/matrix.hpp"
#include "coupling/measures.hpp"

namespace coupling {

/// Single-coordinate law of an independent Bernoulli measure on {1..m}^N.
class BernoulliSpec {
public:
    explicit BernoulliSpec(FiniteDistribution p) : p_(std::move(p)) {}

    int alphabet() const { return static_cast<int>(p_.size()); }
    const FiniteDistribution& weights() const { return p_; }
    double operator[](std::size_t i) const { return p_[i]; }

private:
    FiniteDistribution p_;
};

/// Joint law lambda_ij of (x_1, y_1) with marginals p and q (within 1e-12).
class SingleCoordinateJoining {
public:
    SingleCoordinateJoining(Matrix lambda, const BernoulliSpec& p, const BernoulliSpec& q);

    const Matrix& matrix() const { return lambda_; }
    double operator()(std::size_t i, std::size_t j) const { return lambda_(i, j); }
    // lambda{x != y}
    double off_diagonal_mass() const;

private:
    Matrix lambda_;
};

struct DbarSolution {
    double value;
    SingleCoordinateJoining joining;
};

/// |q_1 - p_1|; two-symbol alphabets only.
double dbar_closed_form(const BernoulliSpec& p, const BernoulliSpec& q);

/// Minimal off-diagonal mass over single-coordinate joinings (m <= 64), solved
/// as a transport problem with the 0/1 cost.
DbarSolution dbar_lp(const BernoulliSpec& p, const BernoulliSpec& q);

/// [[p_1, 0], [q_1 - p_1, q_2]] for m = 2 and p_1 <= q_1.
SingleCoordinateJoining monotone_joining(const BernoulliSpec& p, const BernoulliSpec& q);

/// Fraction of disagreeing coordinates of a pair path.
double hamming_mean(const PairPath& path);

/// n i.i.d. draws of (x_k, y_k) from the joining, driven by Rng(seed).
PairPath sample_joining(const SingleCoordinateJoining& joining, std::size_t n, std::uint64_t seed);

}  // namespace coupling
