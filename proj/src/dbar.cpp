#include "coupling/dbar.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "coupling/rng.hpp"
#include "coupling/transport.hpp"

namespace coupling {

namespace {

constexpr double kJoiningTolerance = 1e-12;

}  // namespace

SingleCoordinateJoining::SingleCoordinateJoining(Matrix lambda, const BernoulliSpec& p, const BernoulliSpec& q)
    : lambda_(std::move(lambda)) {
    const auto m = static_cast<std::size_t>(p.alphabet());
    if (lambda_.rows() != m || lambda_.cols() != static_cast<std::size_t>(q.alphabet()))
        throw std::invalid_argument("SingleCoordinateJoining: matrix dimensions differ from the marginals");
    for (double x : lambda_.data())
        if (!(x >= 0.0)) throw std::invalid_argument("SingleCoordinateJoining: negative entry");
    const auto rows = lambda_.row_sums();
    const auto cols = lambda_.col_sums();
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (std::abs(rows[i] - p[i]) > kJoiningTolerance)
            throw std::invalid_argument("SingleCoordinateJoining: first marginal differs from p");
    for (std::size_t j = 0; j < cols.size(); ++j)
        if (std::abs(cols[j] - q[j]) > kJoiningTolerance)
            throw std::invalid_argument("SingleCoordinateJoining: second marginal differs from q");
}

double SingleCoordinateJoining::off_diagonal_mass() const {
    double s = 0.0;
    for (std::size_t i = 0; i < lambda_.rows(); ++i)
        for (std::size_t j = 0; j < lambda_.cols(); ++j)
            if (i != j) s += lambda_(i, j);
    return s;
}

double dbar_closed_form(const BernoulliSpec& p, const BernoulliSpec& q) {
    if (p.alphabet() != 2 || q.alphabet() != 2)
        throw std::invalid_argument(
            "dbar_closed_form: the closed form holds for two symbols only; use dbar_lp for m > 2");
    return std::abs(q[0] - p[0]);
}

DbarSolution dbar_lp(const BernoulliSpec& p, const BernoulliSpec& q) {
    if (p.alphabet() != q.alphabet()) throw std::invalid_argument("dbar_lp: alphabets differ");
    if (p.alphabet() > 64) throw std::invalid_argument("dbar_lp: alphabet size exceeds 64");
    const auto m = static_cast<std::size_t>(p.alphabet());
    auto sol = solve_w1(p.weights(), q.weights(), CostMatrix::discrete(m));
    return {sol.value, SingleCoordinateJoining(sol.plan.matrix(), p, q)};
}

SingleCoordinateJoining monotone_joining(const BernoulliSpec& p, const BernoulliSpec& q) {
    if (p.alphabet() != 2 || q.alphabet() != 2)
        throw std::invalid_argument("monotone_joining: defined for two symbols only");
    if (p[0] > q[0])
        throw std::invalid_argument("monotone_joining: requires p_1 <= q_1; swap the arguments");
    Matrix lambda = Matrix::from_rows({{p[0], 0.0}, {q[0] - p[0], q[1]}});
    return SingleCoordinateJoining(std::move(lambda), p, q);
}

double hamming_mean(const PairPath& path) {
    if (path.length() == 0) throw std::invalid_argument("hamming_mean: empty path");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < path.length(); ++i)
        if (path.x()[i] != path.y()[i]) ++diff;
    return static_cast<double>(diff) / static_cast<double>(path.length());
}

PairPath sample_joining(const SingleCoordinateJoining& joining, std::size_t n, std::uint64_t seed) {
    const Matrix& lam = joining.matrix();
    Rng rng(seed);
    std::vector<int> xs(n), ys(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto cell = rng.categorical(lam.data());
        xs[k] = static_cast<int>(cell / lam.cols()) + 1;
        ys[k] = static_cast<int>(cell % lam.cols()) + 1;
    }
    return PairPath(static_cast<int>(lam.rows()), std::move(xs), std::move(ys));
}

}  // namespace coupling
