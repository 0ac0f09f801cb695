#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coupling/markov_coupling.hpp"
#include "coupling/shift_space.hpp"
#include "coupling/transport.hpp"

namespace coupling {

// Tolerance of the normalization L_A(1) = 1 and of atomic masses.
inline constexpr double kNormalizationTolerance = 1e-10;

/// Locally constant potential A = log J with the parameter theta of the
/// metric d_theta. M is the theta-seminorm of A.
struct Potential {
    Potential(LocallyConstantFunction log_j, double theta);

    LocallyConstantFunction A;
    double theta;
    double M;
    bool normalized;

    int alphabet() const { return A.alphabet(); }
    int depth() const { return A.depth(); }
};

/// max over depth-(m-1) words w of |sum_a e^{A(a w)} - 1|.
double normalization_defect(const LocallyConstantFunction& A);

/// A + log h - log h o sigma - log rho, with (rho, h) the leading eigenpair
/// of the transfer operator on depth-(m-1) cylinders.
Potential normalize_potential(const Potential& A);

/// Depth-2 potential log P_{x1 x2}, normalized. The result is
/// log(lambda_{x1} P_{x1 x2} / lambda_{x2}) and its Gibbs measure is the
/// stationary Markov measure of P.
Potential markov_potential(const StochasticMatrix& p, double theta);

/// (L_A psi)(x) = sum_a e^{A(a x)} psi(a x).
LocallyConstantFunction ruelle_apply(const Potential& A, const LocallyConstantFunction& psi);

/// J^t(z) = exp(sum_{k<t} A(sigma^k z)).
double birkhoff_weight(const Potential& A, const ShiftPoint& z, int t);

/// Finitely supported probability with distinct atoms and positive weights
/// (total mass 1 within kNormalizationTolerance).
class AtomicMeasure {
public:
    explicit AtomicMeasure(std::vector<std::pair<ShiftPoint, double>> atoms);
    static AtomicMeasure dirac(const ShiftPoint& x) { return AtomicMeasure({{x, 1.0}}); }

    const std::vector<std::pair<ShiftPoint, double>>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    int alphabet() const { return atoms_.front().first.alphabet(); }
    double total() const;
    FiniteDistribution weights() const;

private:
    std::vector<std::pair<ShiftPoint, double>> atoms_;
};

/// Integral of a locally constant function against an atomic measure.
double integrate(const LocallyConstantFunction& psi, const AtomicMeasure& mu);

// Guards of dual_apply: t log2(d) <= 20 and atoms * d^t <= 2^22.
inline constexpr double kMaxPreimageBits = 20.0;
inline constexpr std::size_t kMaxAtoms = std::size_t{1} << 22;

/// (L*)^t mu: each atom x becomes its d^t preimages z with weights J^t(z).
AtomicMeasure dual_apply(const Potential& A, const AtomicMeasure& mu, int t);

/// Constants certifying contraction of (L*)^T in the metric min(1, d_theta / delta).
struct ContractionCertificate {
    double theta;
    double M;
    double C;
    double alpha1;
    double delta;
    double Lambda;
    double a;
    int T;
    double alpha;
};

struct CertificateOptions {
    // Replaces the derived Lasota-Yorke constant (used to exercise the abort path).
    std::optional<double> C_override;
    int ly_trials = 1000;
    std::uint64_t ly_seed = 42;
};

/// Derives the certificate and validates C with lasota_yorke_check; throws
/// if the check finds a violation above 1e-10.
ContractionCertificate make_certificate(const Potential& A, const CertificateOptions& options = {});

/// Names of the certificate invariants that fail (empty when all hold).
std::vector<std::string> certificate_violations(const ContractionCertificate& cert);

/// Max over random phi (depth <= 4) and t = 1..T of
/// |L^t phi|_theta - (C sup|phi| + theta^t |phi|_theta).
double lasota_yorke_check(const Potential& A, const ContractionCertificate& cert, int trials, std::uint64_t seed);

/// Coupling of (L*)^T delta_x and (L*)^T delta_y: mass alpha_j on the pair
/// (z_j(x), z_j(y)), the residuals beta coupled independently.
struct LemmaCoupling {
    std::vector<ShiftPoint> preimages_x;
    std::vector<ShiftPoint> preimages_y;
    std::vector<double> alpha;
    std::vector<double> beta_x;
    std::vector<double> beta_y;
    double normalizer;  // 1 - sum alpha

    double paired_mass() const;
    std::vector<double> marginal_x() const;
    std::vector<double> marginal_y() const;
    /// Dense plan over preimage indices (j, k).
    CouplingPlan as_plan() const;
};

LemmaCoupling lemma_coupling(const Potential& A, const ShiftPoint& x, const ShiftPoint& y, int T);

/// min(1, d_theta(x, y) / delta).
double contraction_distance(const ShiftPoint& x, const ShiftPoint& y, const ContractionCertificate& cert);

/// W1 in the metric min(1, d_theta / delta), by the transport solver.
double w1_atomic(const AtomicMeasure& mu, const AtomicMeasure& nu, const ContractionCertificate& cert);

/// The same value through the ultrametric tree formula
/// W1 = sum over cylinders of |mu - nu| times half the height drop.
double w1_atomic_ultrametric(const AtomicMeasure& mu, const AtomicMeasure& nu, const ContractionCertificate& cert);

struct ContractionCheck {
    double lhs;
    double rhs;
    bool pass;
};

ContractionCheck verify_pointwise_contraction(const Potential& A, const ShiftPoint& x, const ShiftPoint& y,
                                              const ContractionCertificate& cert);
ContractionCheck verify_measure_contraction(const Potential& A, const AtomicMeasure& mu, const AtomicMeasure& nu,
                                            const ContractionCertificate& cert);

/// Weights of the Gibbs measure of a normalized potential on the d^n
/// cylinders of length n.
std::vector<double> gibbs_cylinder_weights(const Potential& A, int n);

/// W1 between an atomic measure and the Gibbs measure, truncated where the
/// remaining levels contribute below 1e-17.
double w1_to_gibbs(const Potential& A, const AtomicMeasure& mu, const ContractionCertificate& cert);

struct IterateBlock {
    int block;
    double gap;                   // W1(mu_{k-1}, mu_k)
    std::optional<double> ratio;  // gap_k / gap_{k-1}; empty once gap_{k-1} is at rounding level
    double ref_gap;               // W1(mu_k, Gibbs)
};

struct GibbsIteration {
    std::vector<IterateBlock> blocks;
    std::vector<double> depth2_weights;  // cylinder weights of the last iterate
};

// Gaps below this are rounding noise and do not define a ratio.
inline constexpr double kGapNoiseFloor = 1e-12;

/// mu_k = (L*)^{kT} mu0 for k = 1..blocks, with the W1 gaps between
/// consecutive blocks and to the Gibbs measure.
GibbsIteration iterate_to_gibbs(const Potential& A, const AtomicMeasure& mu0, int blocks,
                                const ContractionCertificate& cert);

// Potential text format: header "d m theta", then d^m lines "word value".
Potential read_potential(std::istream& in);
void write_potential(std::ostream& out, const Potential& A);

}  // namespace coupling
