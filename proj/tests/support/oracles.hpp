#pragma once

// Independent reference computations for the tests. These use Eigen and
// direct enumeration and share no code paths with the library beyond its
// data types.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "coupling/markov_coupling.hpp"
#include "coupling/ruelle.hpp"
#include "coupling/shift_space.hpp"
#include "coupling/transport.hpp"

namespace oracle {

inline Eigen::MatrixXd to_eigen(const coupling::Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

inline std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
    Eigen::VectorXd e(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) e(i) = v[i];
    return e;
}

inline double l1(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

/// Left Perron vector of P from the eigen-decomposition of P^T.
inline std::vector<double> stationary(const coupling::StochasticMatrix& p) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(p.matrix()).transpose());
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < es.eigenvalues().size(); ++k)
        if (std::abs(es.eigenvalues()(k) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = k;
    Eigen::VectorXd v = es.eigenvectors().col(best).real();
    v /= v.sum();
    return to_vec(v);
}

/// nu P^n by repeated dense products.
inline std::vector<double> law_after(const coupling::StochasticMatrix& p, std::span<const double> nu, int n) {
    Eigen::RowVectorXd r = to_eigen(nu).transpose();
    const Eigen::MatrixXd P = to_eigen(p.matrix());
    for (int k = 0; k < n; ++k) r = r * P;
    return to_vec(r.transpose());
}

/// P(no meeting within the first n transitions) from the d^2-state product
/// chain with the diagonal made absorbing-and-removed.
inline std::vector<double> meeting_tail(const coupling::StochasticMatrix& p, std::span<const double> pair, int steps) {
    const Eigen::MatrixXd P = to_eigen(p.matrix());
    const Eigen::Index d = P.rows();
    Eigen::MatrixXd K(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index k = 0; k < d; ++k)
                for (Eigen::Index l = 0; l < d; ++l) K(i * d + j, k * d + l) = i == j ? 0.0 : P(i, k) * P(j, l);
    Eigen::RowVectorXd r = to_eigen(pair).transpose();
    auto alive = [&] {
        double s = 0.0;
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                if (i != j) s += r(i * d + j);
        return s;
    };
    std::vector<double> out{alive()};
    for (int n = 1; n <= steps; ++n) {
        r = r * K;
        out.push_back(alive());
    }
    return out;
}

/// Law at time n (n = 1 is the initial law) of the coalescing pair chain,
/// from its full transition matrix.
inline std::vector<double> coalescing_law(const coupling::StochasticMatrix& p, std::span<const double> pair, int n) {
    const Eigen::MatrixXd P = to_eigen(p.matrix());
    const Eigen::Index d = P.rows();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d * d, d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index k = 0; k < d; ++k)
                for (Eigen::Index l = 0; l < d; ++l)
                    if (i != j) K(i * d + j, k * d + l) = P(i, k) * P(j, l);
                    else if (k == l) K(i * d + j, k * d + l) = P(i, k);
    Eigen::RowVectorXd r = to_eigen(pair).transpose();
    for (int k = 1; k < n; ++k) r = r * K;
    return to_vec(r.transpose());
}

/// Exact transport optimum by enumerating the basic feasible solutions of
/// the transportation polytope. Tiny instances only (m * k <= 12).
inline double w1_vertices(std::span<const double> mu, std::span<const double> nu, const Eigen::MatrixXd& cost) {
    const int m = static_cast<int>(mu.size()), k = static_cast<int>(nu.size());
    const int cells = m * k, basis = m + k - 1;
    Eigen::VectorXd rhs(m + k);
    for (int i = 0; i < m; ++i) rhs(i) = mu[i];
    for (int j = 0; j < k; ++j) rhs(m + j) = nu[j];
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(cells, 0);
    std::fill(pick.end() - basis, pick.end(), 1);
    do {
        std::vector<int> cols;
        for (int c = 0; c < cells; ++c)
            if (pick[c]) cols.push_back(c);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m + k, basis);
        for (int t = 0; t < basis; ++t) {
            a(cols[t] / k, t) = 1.0;
            a(m + cols[t] % k, t) = 1.0;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (lu.rank() != basis) continue;
        const Eigen::VectorXd x = lu.solve(rhs);
        if ((a * x - rhs).cwiseAbs().maxCoeff() > 1e-12 || x.minCoeff() < -1e-14) continue;
        double c = 0.0;
        for (int t = 0; t < basis; ++t) c += x(t) * cost(cols[t] / k, cols[t] % k);
        best = std::min(best, c);
    } while (std::next_permutation(pick.begin(), pick.end()));
    return best;
}

/// W1 on the real line: integral of |F - G| between sorted points.
inline double w1_line(std::vector<double> points, std::span<const double> mu, std::span<const double> nu) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a] < points[b]; });
    double F = 0.0, s = 0.0;
    for (std::size_t t = 0; t + 1 < order.size(); ++t) {
        F += mu[order[t]] - nu[order[t]];
        s += std::abs(F) * (points[order[t + 1]] - points[order[t]]);
    }
    return s;
}

/// (L_A psi)(x) by summing over the explicit preimages a x.
inline double ruelle_at(const coupling::Potential& A, const coupling::LocallyConstantFunction& psi,
                        const coupling::ShiftPoint& x) {
    double s = 0.0;
    for (int a = 1; a <= A.alphabet(); ++a) {
        const int w[1] = {a};
        const auto z = x.prepend(w);
        s += std::exp(A.A(z)) * psi(z);
    }
    return s;
}

/// Spectral radius of the transfer matrix on depth-(m-1) words,
/// M(u, v) = e^{A(u b)} when v = u_2..u_{m-1} b.
inline double transfer_radius(const coupling::LocallyConstantFunction& A) {
    const int d = A.alphabet(), r = A.depth() - 1;
    if (r == 0) {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += std::exp(A[a]);
        return s;
    }
    const int n = static_cast<int>(std::pow(d, r));
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (int u = 0; u < n; ++u)
        for (int b = 0; b < d; ++b) M(u, (u * d) % n + b) += std::exp(A[u * d + b]);
    Eigen::EigenSolver<Eigen::MatrixXd> es(M);
    double rho = 0.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) rho = std::max(rho, std::abs(es.eigenvalues()(k)));
    return rho;
}

/// lambda_{a1} prod P_{a_i a_{i+1}} for a word with symbols 1..d.
inline double markov_word_weight(const coupling::StochasticMatrix& p, const std::vector<double>& lambda,
                                 const std::vector<int>& w) {
    double v = lambda[w[0] - 1];
    for (std::size_t i = 1; i < w.size(); ++i) v *= p(w[i - 1] - 1, w[i] - 1);
    return v;
}

}  // namespace oracle
