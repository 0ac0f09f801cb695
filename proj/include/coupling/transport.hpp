#pragma once

#include <iosfwd>
#include <vector>

#include "coupling/matrix.hpp"
#include "coupling/measures.hpp"

namespace coupling {

// Marginal tolerance of a coupling plan.
inline constexpr double kPlanTolerance = 1e-10;

/// Joint distribution on a product of finite sets with prescribed marginals.
class CouplingPlan {
public:
    /// Validates non-negativity and that row/column sums reproduce the
    /// marginals within kPlanTolerance.
    CouplingPlan(Matrix matrix, FiniteDistribution left, FiniteDistribution right);

    /// Plan whose marginals are read off the matrix (which must have unit mass).
    static CouplingPlan from_matrix(Matrix matrix);

    const Matrix& matrix() const { return matrix_; }
    const FiniteDistribution& left() const { return left_; }
    const FiniteDistribution& right() const { return right_; }
    double operator()(std::size_t i, std::size_t j) const { return matrix_(i, j); }

private:
    Matrix matrix_;
    FiniteDistribution left_;
    FiniteDistribution right_;
};

/// Non-negative transport cost. The metric flag (square, symmetric, zero
/// diagonal, triangle inequality) is validated when requested.
class CostMatrix {
public:
    explicit CostMatrix(Matrix costs);
    static CostMatrix metric(Matrix costs);
    // 0 on the diagonal, 1 off it.
    static CostMatrix discrete(std::size_t size);

    const Matrix& matrix() const { return costs_; }
    double operator()(std::size_t i, std::size_t j) const { return costs_(i, j); }
    bool is_metric() const { return metric_; }
    std::size_t rows() const { return costs_.rows(); }
    std::size_t cols() const { return costs_.cols(); }
    double max_entry() const;

private:
    Matrix costs_;
    bool metric_ = false;
};

/// Pieces of the maximal coupling on a finite set: the overlap
/// Q = min(mu, nu) (pointwise), its mass gamma, and the residuals mu - Q and
/// nu - Q, each of mass 1 - gamma.
struct MaximalCouplingParts {
    std::vector<double> overlap;
    double gamma = 0.0;
    std::vector<double> residual_left;
    std::vector<double> residual_right;
};

struct MaximalCoupling {
    CouplingPlan plan;
    MaximalCouplingParts parts;
};

struct TransportSolution {
    double value;
    CouplingPlan plan;
};

struct KantorovichCertificate {
    std::vector<double> potential;  // 1-Lipschitz w.r.t. the cost metric
    double primal = 0.0;            // cost of the supplied plan
    double dual = 0.0;              // int phi dmu - int phi dnu
    double gap = 0.0;               // primal - dual
    // False when the supplied plan was not cyclically monotone and the
    // potential was tightened from an optimal plan instead.
    bool tight_on_plan = true;
};

CouplingPlan product_plan(const FiniteDistribution& mu, const FiniteDistribution& nu);

/// Off-diagonal mass Gamma{x != y} of a square plan.
double mismatch_mass(const CouplingPlan& plan);

/// Diagonal overlap plus the normalized product of residuals. When mu == nu
/// (gamma == 1) the plan is the pure diagonal.
MaximalCoupling maximal_coupling(const FiniteDistribution& mu, const FiniteDistribution& nu);

double plan_cost(const CouplingPlan& plan, const CostMatrix& cost);

// Support limit of the exact solver (atoms per side).
inline constexpr std::size_t kMaxTransportAtoms = 4096;

/// Exact optimal transport value and plan. Costs are scaled by 1e12 and
/// rounded, masses by 2^50; the min-cost flow then runs in integer
/// arithmetic (successive shortest paths with Johnson potentials).
TransportSolution solve_w1(const FiniteDistribution& mu, const FiniteDistribution& nu,
                           const CostMatrix& cost);

/// Dual certificate for a plan under a metric cost: a potential tight on the
/// plan's support, found by Bellman-Ford on the difference constraints
/// phi_i - phi_j <= c_ij (all pairs) and phi_i - phi_j >= c_ij (support).
/// Falls back to an optimal plan's support when the supplied plan admits no
/// tight potential; the gap then equals the plan's suboptimality.
KantorovichCertificate kantorovich_certificate(const CouplingPlan& plan, const CostMatrix& cost);

// Dense matrix text format: header "m k", then m rows of k numbers.
Matrix read_matrix(std::istream& in);
void write_matrix(std::ostream& out, const Matrix& m);

}  // namespace coupling
