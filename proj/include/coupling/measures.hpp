#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace coupling {

// Tolerance on the total mass of a probability vector.
inline constexpr double kWeightTolerance = 1e-12;

/// Probability vector over a finite index set {0, ..., m-1}.
///
/// Construction validates non-negativity and unit mass; inputs that are off
/// by more than kWeightTolerance are rejected unless the caller asks for
/// normalized().
class FiniteDistribution {
public:
    explicit FiniteDistribution(std::vector<double> weights);

    /// Rescales a non-negative vector with positive total to unit mass.
    static FiniteDistribution normalized(std::vector<double> weights);
    static FiniteDistribution point_mass(std::size_t size, std::size_t index);
    static FiniteDistribution uniform(std::size_t size);

    std::size_t size() const { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }
    std::span<const double> weights() const { return weights_; }

    friend bool operator==(const FiniteDistribution&, const FiniteDistribution&) = default;

private:
    std::vector<double> weights_;
};

/// Real-valued measure on a finite set; no sign constraint.
class SignedMeasure {
public:
    explicit SignedMeasure(std::vector<double> weights) : weights_(std::move(weights)) {}

    /// mu - nu; total() is zero up to rounding.
    static SignedMeasure difference(const FiniteDistribution& mu, const FiniteDistribution& nu);

    std::size_t size() const { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }
    std::span<const double> weights() const { return weights_; }
    double total() const;

private:
    std::vector<double> weights_;
};

/// Probability on the depth-n cylinder algebra of {1..d}^N, stored densely
/// over the d^n words of length n. Words are indexed lexicographically with
/// the first coordinate most significant.
class CylinderDistribution {
public:
    // Dense storage is limited to n * log2(d) <= kMaxBits.
    static constexpr int kMaxBits = 24;

    CylinderDistribution(int alphabet, int depth, std::vector<double> weights);

    int alphabet() const { return alphabet_; }
    int depth() const { return depth_; }
    std::size_t size() const { return weights_.size(); }
    double operator[](std::size_t word_index) const { return weights_[word_index]; }
    std::span<const double> weights() const { return weights_; }

    /// Weight of the word (x_1, ..., x_n) with symbols in 1..d.
    double weight(std::span<const int> word) const;

    /// The same weights seen as a flat distribution over d^n states.
    FiniteDistribution flatten() const { return FiniteDistribution(weights_); }

private:
    int alphabet_;
    int depth_;
    std::vector<double> weights_;
};

// Number of words d^n, throwing if it exceeds the dense-storage guard.
std::size_t word_count(int alphabet, int depth);
// Lexicographic index of a word with symbols in 1..d.
std::size_t word_index(std::span<const int> word, int alphabet);
// Inverse of word_index.
std::vector<int> word_at(std::size_t index, int alphabet, int depth);

/// Total variation with the factor-2 convention: sum_i |mu_i - nu_i|,
/// equivalently 2 sup_A (mu - nu)(A). Values lie in [0, 2].
double tv_distance(const FiniteDistribution& mu, const FiniteDistribution& nu);
double tv_distance(const CylinderDistribution& mu, const CylinderDistribution& nu);
double tv_norm(const SignedMeasure& rho);

/// 2 * max over all 2^m subsets A of (mu - nu)(A). Exponential; m <= 20.
double tv_bruteforce(const FiniteDistribution& mu, const FiniteDistribution& nu);
inline constexpr std::size_t kBruteforceMaxSize = 20;

/// Law of sigma(x) when x has law mu: sums out the first coordinate.
CylinderDistribution shift_pushforward(const CylinderDistribution& mu);

/// Markov-type tail estimate pi(T > n) <= E[psi(T)] / psi(n), clamped to 1.
double moment_tail_bound(std::span<const double> psi_of_T_samples, double psi_at_n);

// Plain-text distribution format:
//   d n                 (n = 0 for a flat state set of size d)
//   word weight         (one line per word; symbols 1..d, space separated)
// Missing words carry weight 0.
struct DistributionText {
    int alphabet = 0;
    int depth = 0;
    std::vector<double> weights;

    FiniteDistribution as_finite() const { return FiniteDistribution(weights); }
    CylinderDistribution as_cylinder() const { return {alphabet, depth, weights}; }
};

DistributionText read_distribution(std::istream& in);
void write_distribution(std::ostream& out, const DistributionText& dist);
DistributionText to_text(const FiniteDistribution& mu);
DistributionText to_text(const CylinderDistribution& mu);

}  // namespace coupling
