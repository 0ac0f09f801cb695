#include "coupling/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace coupling {

namespace {

void check_marginal(std::span<const double> sums, const FiniteDistribution& marginal, const char* side) {
    if (sums.size() != marginal.size())
        throw std::invalid_argument(std::string("CouplingPlan: ") + side + " marginal has wrong dimension");
    for (std::size_t i = 0; i < sums.size(); ++i) {
        if (std::abs(sums[i] - marginal[i]) > kPlanTolerance) {
            std::ostringstream os;
            os << "CouplingPlan: " << side << " marginal mismatch at index " << i << " ("
               << std::setprecision(17) << sums[i] << " vs " << marginal[i] << ")";
            throw std::invalid_argument(os.str());
        }
    }
}

}  // namespace

CouplingPlan::CouplingPlan(Matrix matrix, FiniteDistribution left, FiniteDistribution right)
    : matrix_(std::move(matrix)), left_(std::move(left)), right_(std::move(right)) {
    for (double x : matrix_.data())
        if (!std::isfinite(x) || x < 0.0)
            throw std::invalid_argument("CouplingPlan: entries must be finite and non-negative");
    check_marginal(matrix_.row_sums(), left_, "left");
    check_marginal(matrix_.col_sums(), right_, "right");
}

CouplingPlan CouplingPlan::from_matrix(Matrix matrix) {
    auto left = FiniteDistribution(matrix.row_sums());
    auto right = FiniteDistribution(matrix.col_sums());
    return CouplingPlan(std::move(matrix), std::move(left), std::move(right));
}

CostMatrix::CostMatrix(Matrix costs) : costs_(std::move(costs)) {
    for (double x : costs_.data())
        if (!std::isfinite(x) || x < 0.0)
            throw std::invalid_argument("CostMatrix: entries must be finite and non-negative");
}

CostMatrix CostMatrix::metric(Matrix costs) {
    CostMatrix c(std::move(costs));
    const auto& m = c.costs_;
    if (!m.square()) throw std::invalid_argument("CostMatrix::metric: matrix must be square");
    constexpr double tol = 1e-12;
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i) {
        if (m(i, i) != 0.0) throw std::invalid_argument("CostMatrix::metric: non-zero diagonal");
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol)
                throw std::invalid_argument("CostMatrix::metric: matrix is not symmetric");
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (m(i, j) > m(i, k) + m(k, j) + tol) {
                    std::ostringstream os;
                    os << "CostMatrix::metric: triangle inequality fails for (" << i << ", " << k << ", "
                       << j << ")";
                    throw std::invalid_argument(os.str());
                }
    c.metric_ = true;
    return c;
}

CostMatrix CostMatrix::discrete(std::size_t size) {
    Matrix m(size, size, 1.0);
    for (std::size_t i = 0; i < size; ++i) m(i, i) = 0.0;
    CostMatrix c(std::move(m));
    c.metric_ = true;
    return c;
}

double CostMatrix::max_entry() const {
    double mx = 0.0;
    for (double x : costs_.data()) mx = std::max(mx, x);
    return mx;
}

CouplingPlan product_plan(const FiniteDistribution& mu, const FiniteDistribution& nu) {
    Matrix m(mu.size(), nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j) m(i, j) = mu[i] * nu[j];
    return CouplingPlan(std::move(m), mu, nu);
}

double mismatch_mass(const CouplingPlan& plan) {
    const Matrix& m = plan.matrix();
    if (!m.square()) throw std::invalid_argument("mismatch_mass: plan must be square");
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (i != j) s += m(i, j);
    return s;
}

MaximalCoupling maximal_coupling(const FiniteDistribution& mu, const FiniteDistribution& nu) {
    if (mu.size() != nu.size()) throw std::invalid_argument("maximal_coupling: dimension mismatch");
    const std::size_t n = mu.size();
    MaximalCouplingParts parts;
    parts.overlap.resize(n);
    parts.residual_left.resize(n);
    parts.residual_right.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        parts.overlap[i] = std::min(mu[i], nu[i]);
        parts.gamma += parts.overlap[i];
        parts.residual_left[i] = mu[i] - parts.overlap[i];
        parts.residual_right[i] = nu[i] - parts.overlap[i];
    }
    // The residual mass, summed directly, is more accurate than 1 - gamma.
    double residual = 0.0;
    for (double r : parts.residual_left) residual += r;

    Matrix plan(n, n);
    for (std::size_t i = 0; i < n; ++i) plan(i, i) = parts.overlap[i];
    if (residual > 0.0) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                plan(i, j) += parts.residual_left[i] * parts.residual_right[j] / residual;
    }
    return {CouplingPlan(std::move(plan), mu, nu), std::move(parts)};
}

double plan_cost(const CouplingPlan& plan, const CostMatrix& cost) {
    const Matrix& m = plan.matrix();
    if (m.rows() != cost.rows() || m.cols() != cost.cols())
        throw std::invalid_argument("plan_cost: plan and cost dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * cost(i, j);
    return s;
}

namespace {

constexpr double kCostScale = 1e12;
constexpr double kMassScale = 0x1.0p50;
constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

// Successive shortest paths on the bipartite transportation network.
// Left nodes carry supply, right nodes demand, a single sink t collects the
// demand. Reduced costs stay non-negative through Johnson potentials, so
// each augmenting path comes from a dense Dijkstra.
class FlowSolver {
public:
    FlowSolver(std::vector<std::int64_t> supply, std::vector<std::int64_t> demand,
               std::vector<std::int64_t> cost)
        : m_(supply.size()), k_(demand.size()), supply_(std::move(supply)),
          demand_(std::move(demand)), cost_(std::move(cost)), flow_(m_ * k_, 0),
          pot_left_(m_, 0), pot_right_(k_, 0) {}

    void run() {
        std::int64_t remaining = 0;
        for (auto s : supply_) remaining += s;
        const std::size_t max_iterations = 20 * (m_ + k_) + 100;
        std::size_t iterations = 0;
        while (remaining > 0) {
            if (++iterations > max_iterations) {
                std::ostringstream os;
                os << "solve_w1: flow solver did not converge after " << max_iterations
                   << " augmentations (remaining scaled supply " << remaining << ", network "
                   << m_ << "x" << k_ << ")";
                throw std::runtime_error(os.str());
            }
            remaining -= augment();
        }
        iterations_ = iterations;
    }

    std::int64_t flow(std::size_t i, std::size_t j) const { return flow_[i * k_ + j]; }
    std::size_t iterations() const { return iterations_; }

private:
    std::int64_t augment() {
        std::vector<std::int64_t> dl(m_, kInf), dr(k_, kInf);
        std::vector<char> done_l(m_, 0), done_r(k_, 0);
        std::vector<std::ptrdiff_t> pred_l(m_, -1), pred_r(k_, -1);
        std::int64_t dt = kInf;
        std::ptrdiff_t pred_t = -1;

        for (std::size_t i = 0; i < m_; ++i)
            if (supply_[i] > 0) dl[i] = -pot_left_[i];

        while (true) {
            std::int64_t best = kInf;
            std::ptrdiff_t best_node = -1;
            bool best_left = false;
            for (std::size_t i = 0; i < m_; ++i)
                if (!done_l[i] && dl[i] < best) { best = dl[i]; best_node = static_cast<std::ptrdiff_t>(i); best_left = true; }
            for (std::size_t j = 0; j < k_; ++j)
                if (!done_r[j] && dr[j] < best) { best = dr[j]; best_node = static_cast<std::ptrdiff_t>(j); best_left = false; }
            if (dt <= best) break;
            if (best_node < 0) throw std::runtime_error("solve_w1: sink unreachable in residual network");

            if (best_left) {
                const auto i = static_cast<std::size_t>(best_node);
                done_l[i] = 1;
                for (std::size_t j = 0; j < k_; ++j) {
                    if (done_r[j]) continue;
                    const std::int64_t nd = dl[i] + cost_[i * k_ + j] + pot_left_[i] - pot_right_[j];
                    if (nd < dr[j]) { dr[j] = nd; pred_r[j] = static_cast<std::ptrdiff_t>(i); }
                }
            } else {
                const auto j = static_cast<std::size_t>(best_node);
                done_r[j] = 1;
                for (std::size_t i = 0; i < m_; ++i) {
                    if (done_l[i] || flow_[i * k_ + j] <= 0) continue;
                    const std::int64_t nd = dr[j] - cost_[i * k_ + j] + pot_right_[j] - pot_left_[i];
                    if (nd < dl[i]) { dl[i] = nd; pred_l[i] = static_cast<std::ptrdiff_t>(j); }
                }
                if (demand_[j] > 0) {
                    const std::int64_t nd = dr[j] + pot_right_[j] - pot_t_;
                    if (nd < dt) { dt = nd; pred_t = static_cast<std::ptrdiff_t>(j); }
                }
            }
        }

        for (std::size_t i = 0; i < m_; ++i) pot_left_[i] += std::min(dl[i], dt);
        for (std::size_t j = 0; j < k_; ++j) pot_right_[j] += std::min(dr[j], dt);
        pot_t_ += dt;

        // Walk back from the sink to find the bottleneck.
        auto j = static_cast<std::size_t>(pred_t);
        std::int64_t amount = demand_[j];
        while (true) {
            const auto i = static_cast<std::size_t>(pred_r[j]);
            if (pred_l[i] < 0) {
                amount = std::min(amount, supply_[i]);
                break;
            }
            const auto jb = static_cast<std::size_t>(pred_l[i]);
            amount = std::min(amount, flow_[i * k_ + jb]);
            j = jb;
        }

        j = static_cast<std::size_t>(pred_t);
        demand_[j] -= amount;
        while (true) {
            const auto i = static_cast<std::size_t>(pred_r[j]);
            flow_[i * k_ + j] += amount;
            if (pred_l[i] < 0) {
                supply_[i] -= amount;
                break;
            }
            const auto jb = static_cast<std::size_t>(pred_l[i]);
            flow_[i * k_ + jb] -= amount;
            j = jb;
        }
        return amount;
    }

    std::size_t m_, k_;
    std::vector<std::int64_t> supply_, demand_, cost_, flow_;
    std::vector<std::int64_t> pot_left_, pot_right_;
    std::int64_t pot_t_ = 0;
    std::size_t iterations_ = 0;
};

std::vector<std::int64_t> scale_masses(const FiniteDistribution& d, const std::vector<std::size_t>& support) {
    std::vector<std::int64_t> out(support.size());
    for (std::size_t a = 0; a < support.size(); ++a)
        out[a] = static_cast<std::int64_t>(std::llround(d[support[a]] * kMassScale));
    return out;
}

void balance(std::vector<std::int64_t>& supply, std::vector<std::int64_t>& demand) {
    std::int64_t s = 0, t = 0;
    for (auto x : supply) s += x;
    for (auto x : demand) t += x;
    // Rounding leaves a discrepancy of a few units; absorb it in the largest entry.
    auto& side = s > t ? demand : supply;
    auto it = std::max_element(side.begin(), side.end());
    *it += (s > t ? s - t : t - s);
}

}  // namespace

TransportSolution solve_w1(const FiniteDistribution& mu, const FiniteDistribution& nu, const CostMatrix& cost) {
    if (mu.size() != cost.rows() || nu.size() != cost.cols()) {
        std::ostringstream os;
        os << "solve_w1: infeasible dimensions (" << mu.size() << " x " << nu.size() << " masses vs "
           << cost.rows() << " x " << cost.cols() << " cost)";
        throw std::invalid_argument(os.str());
    }
    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu[i] > 0.0) rows.push_back(i);
    for (std::size_t j = 0; j < nu.size(); ++j)
        if (nu[j] > 0.0) cols.push_back(j);
    if (rows.size() > kMaxTransportAtoms || cols.size() > kMaxTransportAtoms) {
        std::ostringstream os;
        os << "solve_w1: support sizes " << rows.size() << " x " << cols.size() << " exceed the limit "
           << kMaxTransportAtoms;
        throw std::invalid_argument(os.str());
    }

    const double max_cost = cost.max_entry();
    const double nodes = static_cast<double>(rows.size() + cols.size() + 2);
    if (max_cost * kCostScale * nodes > 0x1.0p61)
        throw std::invalid_argument("solve_w1: cost entries too large for exact integer scaling");

    std::vector<std::int64_t> scaled_cost(rows.size() * cols.size());
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b)
            scaled_cost[a * cols.size() + b] =
                static_cast<std::int64_t>(std::llround(cost(rows[a], cols[b]) * kCostScale));

    auto supply = scale_masses(mu, rows);
    auto demand = scale_masses(nu, cols);
    balance(supply, demand);

    FlowSolver solver(std::move(supply), std::move(demand), std::move(scaled_cost));
    solver.run();

    Matrix plan(mu.size(), nu.size());
    for (std::size_t a = 0; a < rows.size(); ++a)
        for (std::size_t b = 0; b < cols.size(); ++b)
            plan(rows[a], cols[b]) = static_cast<double>(solver.flow(a, b)) / kMassScale;
    CouplingPlan result(std::move(plan), mu, nu);
    const double value = plan_cost(result, cost);
    return {value, std::move(result)};
}

namespace {

// Shortest-path potentials for the difference constraints induced by a plan
// under a metric cost. Returns false on a negative cycle.
bool tighten_from_support(const Matrix& plan, const CostMatrix& cost, std::vector<double>& phi) {
    const std::size_t n = plan.rows();
    constexpr double eps = 1e-12;
    phi.assign(n, 0.0);  // virtual root at distance 0 from every node
    std::vector<std::size_t> relax_count(n, 0);
    std::vector<char> queued(n, 1);
    std::deque<std::size_t> queue;
    for (std::size_t v = 0; v < n; ++v) queue.push_back(v);

    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        queued[u] = 0;
        for (std::size_t v = 0; v < n; ++v) {
            if (v == u) continue;
            // Lipschitz edge u -> v: phi_v - phi_u <= c(v, u).
            double w = cost(v, u);
            // Support edge u -> v: phi_v - phi_u <= -c(u, v).
            if (plan(u, v) > 0.0) w = std::min(w, -cost(u, v));
            if (phi[u] + w < phi[v] - eps) {
                phi[v] = phi[u] + w;
                if (++relax_count[v] > n) return false;
                if (!queued[v]) {
                    queued[v] = 1;
                    queue.push_back(v);
                }
            }
        }
    }
    return true;
}

}  // namespace

KantorovichCertificate kantorovich_certificate(const CouplingPlan& plan, const CostMatrix& cost) {
    if (!cost.is_metric())
        throw std::invalid_argument("kantorovich_certificate: the Lipschitz dual needs a metric cost");
    if (plan.matrix().rows() != cost.rows() || plan.matrix().cols() != cost.cols())
        throw std::invalid_argument("kantorovich_certificate: plan and cost dimensions differ");

    KantorovichCertificate cert;
    cert.primal = plan_cost(plan, cost);
    if (!tighten_from_support(plan.matrix(), cost, cert.potential)) {
        cert.tight_on_plan = false;
        const auto optimal = solve_w1(plan.left(), plan.right(), cost);
        if (!tighten_from_support(optimal.plan.matrix(), cost, cert.potential))
            throw std::runtime_error("kantorovich_certificate: optimal plan admits no tight potential");
    }
    for (std::size_t i = 0; i < cert.potential.size(); ++i)
        cert.dual += cert.potential[i] * (plan.left()[i] - plan.right()[i]);
    cert.gap = cert.primal - cert.dual;
    return cert;
}

Matrix read_matrix(std::istream& in) {
    std::size_t rows = 0, cols = 0;
    if (!(in >> rows >> cols)) throw std::invalid_argument("read_matrix: missing 'm k' header");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            if (!(in >> m(i, j))) throw std::invalid_argument("read_matrix: truncated matrix body");
    return m;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << ' ' << m.cols() << '\n' << std::setprecision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
        out << '\n';
    }
}

}  // namespace coupling
