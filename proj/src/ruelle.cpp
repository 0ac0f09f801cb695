#include "coupling/ruelle.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "coupling/rng.hpp"

namespace coupling {

namespace {

std::size_t ipow(std::size_t d, int n) {
    std::size_t r = 1;
    for (int i = 0; i < n; ++i) r *= d;
    return r;
}

void require_normalized(const Potential& A, const char* what) {
    if (!A.normalized) throw std::invalid_argument(std::string(what) + ": potential is not normalized");
}

void require_alphabet(const Potential& A, int d, const char* what) {
    if (A.alphabet() != d) throw std::invalid_argument(std::string(what) + ": alphabet sizes differ");
}

void check_preimage_guard(int d, int t, std::size_t atoms, const char* what) {
    if (t < 1) throw std::invalid_argument(std::string(what) + ": t must be >= 1");
    if (static_cast<double>(t) * std::log2(static_cast<double>(d)) > kMaxPreimageBits + 1e-9) {
        std::ostringstream os;
        os << what << ": t*log2(d) = " << t * std::log2(static_cast<double>(d)) << " exceeds " << kMaxPreimageBits;
        throw std::invalid_argument(os.str());
    }
    if (atoms * ipow(static_cast<std::size_t>(d), t) > kMaxAtoms) {
        std::ostringstream os;
        os << what << ": " << atoms << " atoms times d^t exceeds the atom guard " << kMaxAtoms;
        throw std::invalid_argument(os.str());
    }
}

// Height of the cylinder tree at common-prefix length L in the metric
// min(1, d_theta / delta): two points sharing exactly L symbols sit at
// distance min(1, theta^(L+1) / delta).
struct Heights {
    double theta;
    double delta;
    double operator()(std::size_t L) const {
        return std::min(1.0, std::pow(theta, static_cast<double>(L) + 1.0) / delta);
    }
};

// W1 between two measures on the leaves of an ultrametric tree, fed leaf by
// leaf in sequence order with the common-prefix length to the previous leaf.
class UltrametricW1 {
public:
    explicit UltrametricW1(Heights h) : h_(h) {}

    void add(double diff, std::optional<std::size_t> lcp_prev) {
        if (!have_leaf_) {
            have_leaf_ = true;
            cur_ = diff;
            cur_left_ = std::nullopt;
            return;
        }
        const std::size_t l = *lcp_prev;
        const std::size_t parent = cur_left_ ? std::max(*cur_left_, l) : l;
        total_ += std::abs(cur_) * h_(parent) / 2.0;
        double pending = cur_;
        while (!stack_.empty() && stack_.back().level > l) {
            Node node = stack_.back();
            stack_.pop_back();
            node.diff += pending;
            const std::size_t up = stack_.empty() ? l : std::max(l, stack_.back().level);
            total_ += std::abs(node.diff) * (h_(up) - h_(node.level)) / 2.0;
            pending = node.diff;
        }
        if (!stack_.empty() && stack_.back().level == l) stack_.back().diff += pending;
        else stack_.push_back({l, pending});
        cur_ = diff;
        cur_left_ = l;
    }

    double finish() {
        if (!have_leaf_) return 0.0;
        double pending = cur_;
        if (cur_left_) total_ += std::abs(cur_) * h_(*cur_left_) / 2.0;
        while (!stack_.empty()) {
            Node node = stack_.back();
            stack_.pop_back();
            node.diff += pending;
            if (!stack_.empty()) total_ += std::abs(node.diff) * (h_(stack_.back().level) - h_(node.level)) / 2.0;
            pending = node.diff;
        }
        return total_;
    }

private:
    struct Node {
        std::size_t level;
        double diff;
    };
    Heights h_;
    std::vector<Node> stack_;
    bool have_leaf_ = false;
    double cur_ = 0.0;
    std::optional<std::size_t> cur_left_;
    double total_ = 0.0;
};

// Levels beyond this contribute less than 1e-17 to a W1 value.
std::size_t truncation_level(const Heights& h) {
    std::size_t L = 0;
    while (h(L) >= 1e-17) ++L;
    return L;
}

// Index of the first n symbols of v x, where v is the word with index
// v_index and length s.
std::size_t prefix_index(std::size_t v_index, int s, const ShiftPoint& x, int n, std::size_t d) {
    if (s >= n) return v_index / ipow(d, s - n);
    std::size_t idx = v_index;
    for (int i = 1; i <= n - s; ++i) idx = idx * d + static_cast<std::size_t>(x.at(static_cast<std::size_t>(i)) - 1);
    return idx;
}

// Stationary weights of the Gibbs measure on the d^(m-1) words of length
// m - 1: the fixed point of pi(u) = sum_b e^{A(u b)} pi(u_2..u_{m-1} b).
std::vector<double> gibbs_base(const Potential& A) {
    const auto d = static_cast<std::size_t>(A.alphabet());
    const int r = A.depth() - 1;
    if (r == 0) return {1.0};
    const std::size_t n = ipow(d, r);
    const auto table = A.A.table();
    std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
    for (int it = 0; it < 100000; ++it) {
        for (std::size_t u = 0; u < n; ++u) {
            const std::size_t tail = (u * d) % n;  // u_2..u_{m-1} followed by b
            double s = 0.0;
            for (std::size_t b = 0; b < d; ++b) s += std::exp(table[u * d + b]) * pi[tail + b];
            next[u] = s;
        }
        double total = 0.0, change = 0.0;
        for (double v : next) total += v;
        for (std::size_t u = 0; u < n; ++u) {
            next[u] /= total;
            change = std::max(change, std::abs(next[u] - pi[u]));
        }
        pi.swap(next);
        if (change <= 1e-15) return pi;
    }
    throw std::runtime_error("gibbs_base: power iteration did not converge in 1e5 steps");
}

// Forward transition of the Gibbs measure seen as an order-(m-1) chain:
// probability that symbol b follows the context word u of length m - 1.
struct ForwardChain {
    std::size_t d;
    int r;
    std::size_t contexts;
    std::vector<double> prob;  // contexts x d

    ForwardChain(const Potential& A, const std::vector<double>& pi)
        : d(static_cast<std::size_t>(A.alphabet())), r(A.depth() - 1), contexts(ipow(d, r)), prob(contexts * d) {
        const auto table = A.A.table();
        for (std::size_t u = 0; u < contexts; ++u)
            for (std::size_t b = 0; b < d; ++b) {
                if (r == 0) {
                    prob[b] = std::exp(table[b]);
                    continue;
                }
                const std::size_t next = (u * d + b) % contexts;
                prob[u * d + b] = std::exp(table[u * d + b]) * pi[next] / pi[u];
            }
    }

    std::size_t advance(std::size_t u, std::size_t b) const { return r == 0 ? 0 : (u * d + b) % contexts; }
};

// Gibbs weight of each prefix x_1..x_L of a point, L = 1..Lmax.
std::vector<double> gibbs_prefix_weights(const std::vector<double>& pi, const ForwardChain& fc, const ShiftPoint& x,
                                         std::size_t Lmax) {
    std::vector<double> out(Lmax + 1, 1.0);
    const auto r = static_cast<std::size_t>(fc.r);
    std::size_t ctx = 0;
    for (std::size_t L = 1; L <= Lmax; ++L) {
        const auto b = static_cast<std::size_t>(x.at(L) - 1);
        if (L <= r) {
            ctx = ctx * fc.d + b;
            if (L == r) {
                out[L] = pi[ctx];
            } else {
                // Marginal of pi over the remaining r - L symbols.
                const std::size_t span = ipow(fc.d, static_cast<int>(r - L));
                double s = 0.0;
                for (std::size_t k = 0; k < span; ++k) s += pi[ctx * span + k];
                out[L] = s;
            }
        } else {
            out[L] = out[L - 1] * fc.prob[ctx * fc.d + b];
            ctx = fc.advance(ctx, b);
        }
    }
    return out;
}


// A(sigma^k z) read from the coordinates z_{k+1}..z_{k+m}.
double value_after_shift(const LocallyConstantFunction& f, const ShiftPoint& z, std::size_t k) {
    const auto d = static_cast<std::size_t>(f.alphabet());
    std::size_t idx = 0;
    for (std::size_t i = 1; i <= static_cast<std::size_t>(f.depth()); ++i)
        idx = idx * d + static_cast<std::size_t>(z.at(k + i) - 1);
    return f[idx];
}

// Common-prefix length of the words with indices p and p + 1 (length s).
std::size_t consecutive_word_lcp(std::size_t p, int s, std::size_t d) {
    std::size_t trailing = 0;
    while (p % d == d - 1) {
        ++trailing;
        p /= d;
    }
    return static_cast<std::size_t>(s) - trailing - 1;
}

}  // namespace

Potential::Potential(LocallyConstantFunction log_j, double theta_)
    : A(std::move(log_j)), theta(theta_), M(theta_seminorm(A, theta_)),
      normalized(normalization_defect(A) <= kNormalizationTolerance) {}

double normalization_defect(const LocallyConstantFunction& A) {
    const auto d = static_cast<std::size_t>(A.alphabet());
    const std::size_t tails = ipow(d, A.depth() - 1);
    const auto table = A.table();
    double defect = 0.0;
    for (std::size_t w = 0; w < tails; ++w) {
        double s = 0.0;
        for (std::size_t a = 0; a < d; ++a) s += std::exp(table[a * tails + w]);
        defect = std::max(defect, std::abs(s - 1.0));
    }
    return defect;
}

Potential normalize_potential(const Potential& A) {
    const auto d = static_cast<std::size_t>(A.alphabet());
    const int m = A.depth();
    const auto table = A.A.table();
    std::vector<double> out(table.begin(), table.end());
    if (m == 1) {
        double z = 0.0;
        for (double v : table) z += std::exp(v);
        for (double& v : out) v -= std::log(z);
        return Potential(LocallyConstantFunction(A.alphabet(), 1, std::move(out)), A.theta);
    }

    // (L h)(u) = sum_a e^{A(a u)} h(a u_1..u_{m-2}) on words u of length m - 1.
    const std::size_t n = ipow(d, m - 1);
    const std::size_t head = n / d;
    std::vector<double> h(n, 1.0), g(n);
    double rho = 0.0;
    bool converged = false;
    for (int it = 0; it < 100000; ++it) {
        for (std::size_t u = 0; u < n; ++u) {
            double s = 0.0;
            for (std::size_t a = 0; a < d; ++a) s += std::exp(table[a * n + u]) * h[a * head + u / d];
            g[u] = s;
        }
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            lo = std::min(lo, g[u] / h[u]);
            hi = std::max(hi, g[u] / h[u]);
        }
        // Collatz-Wielandt bounds bracket the leading eigenvalue.
        if (hi - lo <= 1e-13 * hi) {
            rho = 0.5 * (lo + hi);
            converged = true;
            break;
        }
        double top = 0.0;
        for (double v : g) top = std::max(top, v);
        for (std::size_t u = 0; u < n; ++u) h[u] = g[u] / top;
    }
    if (!converged) throw std::runtime_error("normalize_potential: power iteration did not converge in 1e5 steps");

    for (std::size_t x = 0; x < out.size(); ++x)
        out[x] += std::log(h[x / d]) - std::log(h[x % n]) - std::log(rho);
    Potential result(LocallyConstantFunction(A.alphabet(), m, std::move(out)), A.theta);
    if (!result.normalized) throw std::runtime_error("normalize_potential: result fails the normalization check");
    return result;
}

Potential markov_potential(const StochasticMatrix& p, double theta) {
    if (!p.positive()) throw std::invalid_argument("markov_potential: transition matrix has a zero entry");
    const std::size_t d = p.size();
    std::vector<double> table(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) table[i * d + j] = std::log(p(i, j));
    return normalize_potential(Potential(LocallyConstantFunction(static_cast<int>(d), 2, std::move(table)), theta));
}

LocallyConstantFunction ruelle_apply(const Potential& A, const LocallyConstantFunction& psi) {
    require_alphabet(A, psi.alphabet(), "ruelle_apply");
    const auto d = static_cast<std::size_t>(A.alphabet());
    const int m = A.depth(), k = psi.depth();
    const int r = std::max(std::max(m, k) - 1, 1);
    const std::size_t n = ipow(d, r);
    const std::size_t a_div = ipow(d, r + 1 - m), p_div = ipow(d, r + 1 - k);
    const auto table = A.A.table();
    std::vector<double> out(n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
        double s = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            const std::size_t w = a * n + u;  // the word a u of length r + 1
            s += std::exp(table[w / a_div]) * psi[w / p_div];
        }
        out[u] = s;
    }
    return {A.alphabet(), r, std::move(out)};
}


double birkhoff_weight(const Potential& A, const ShiftPoint& z, int t) {
    if (t < 1) throw std::invalid_argument("birkhoff_weight: t must be >= 1");
    require_alphabet(A, z.alphabet(), "birkhoff_weight");
    double s = 0.0;
    for (int k = 0; k < t; ++k) s += value_after_shift(A.A, z, static_cast<std::size_t>(k));
    return std::exp(s);
}

AtomicMeasure::AtomicMeasure(std::vector<std::pair<ShiftPoint, double>> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw std::invalid_argument("AtomicMeasure: no atoms");
    const int d = atoms_.front().first.alphabet();
    double total = 0.0;
    for (const auto& [x, w] : atoms_) {
        if (x.alphabet() != d) throw std::invalid_argument("AtomicMeasure: atoms over different alphabets");
        if (!std::isfinite(w) || w <= 0.0) throw std::invalid_argument("AtomicMeasure: weights must be positive");
        total += w;
    }
    if (std::abs(total - 1.0) > kNormalizationTolerance) {
        std::ostringstream os;
        os << "AtomicMeasure: weights sum to " << std::setprecision(17) << total;
        throw std::invalid_argument(os.str());
    }
    std::vector<const ShiftPoint*> pts;
    pts.reserve(atoms_.size());
    for (const auto& a : atoms_) pts.push_back(&a.first);
    std::sort(pts.begin(), pts.end(), [](const ShiftPoint* a, const ShiftPoint* b) { return *a < *b; });
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (*pts[i] == *pts[i - 1])
            throw std::invalid_argument("AtomicMeasure: duplicate atom " + pts[i]->to_string());
}

double AtomicMeasure::total() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.second;
    return s;
}

FiniteDistribution AtomicMeasure::weights() const {
    std::vector<double> w;
    w.reserve(atoms_.size());
    for (const auto& a : atoms_) w.push_back(a.second);
    return FiniteDistribution::normalized(std::move(w));
}

double integrate(const LocallyConstantFunction& psi, const AtomicMeasure& mu) {
    double s = 0.0;
    for (const auto& [x, w] : mu.atoms()) s += w * psi(x);
    return s;
}

AtomicMeasure dual_apply(const Potential& A, const AtomicMeasure& mu, int t) {
    require_alphabet(A, mu.alphabet(), "dual_apply");
    check_preimage_guard(A.alphabet(), t, mu.size(), "dual_apply");
    std::vector<std::pair<ShiftPoint, double>> out;
    out.reserve(mu.size() * ipow(static_cast<std::size_t>(A.alphabet()), t));
    for (const auto& [x, w] : mu.atoms())
        for (auto& z : preimages(x, t)) {
            const double j = birkhoff_weight(A, z, t);
            out.emplace_back(std::move(z), w * j);
        }
    return AtomicMeasure(std::move(out));
}

std::vector<std::string> certificate_violations(const ContractionCertificate& c) {
    std::vector<std::string> bad;
    if (!(c.alpha1 > 0.0 && c.alpha1 < 1.0)) bad.emplace_back("alpha1 in (0,1)");
    if (c.C > 0.0 && !(c.delta < (1.0 - c.alpha1) / (2.0 * c.C))) bad.emplace_back("delta < (1-alpha1)/(2C)");
    if (!(c.delta > 0.0)) bad.emplace_back("delta > 0");
    if (c.T < 1) bad.emplace_back("T >= 1");
    if (!(std::pow(c.theta, c.T) <= c.delta / 2.0)) bad.emplace_back("theta^T <= delta/2");
    if (!(c.Lambda > 0.0 && c.Lambda <= 1.0)) bad.emplace_back("Lambda in (0,1]");
    if (c.a != c.Lambda) bad.emplace_back("a = Lambda");
    if (c.alpha != std::max(1.0 - c.a / 2.0, (1.0 + c.alpha1) / 2.0)) bad.emplace_back("alpha formula");
    if (!(c.alpha < 1.0)) bad.emplace_back("alpha < 1");
    return bad;
}

ContractionCertificate make_certificate(const Potential& A, const CertificateOptions& options) {
    require_normalized(A, "make_certificate");
    ContractionCertificate c{};
    c.theta = A.theta;
    c.M = A.M;
    const double th = A.theta;
    c.C = options.C_override ? *options.C_override : c.M * th * std::exp(c.M * th) / (1.0 - th);
    c.alpha1 = th;
    c.delta = c.C > 0.0 ? std::min((1.0 - c.alpha1) / (4.0 * c.C), th) : th;
    c.Lambda = std::exp(-c.M * th / (1.0 - th));
    c.a = c.Lambda;
    c.T = std::max(1, static_cast<int>(std::ceil(std::log(c.delta / 2.0) / std::log(th))));
    while (std::pow(th, c.T) > c.delta / 2.0) ++c.T;
    while (c.T > 1 && std::pow(th, c.T - 1) <= c.delta / 2.0) --c.T;
    c.alpha = std::max(1.0 - c.a / 2.0, (1.0 + c.alpha1) / 2.0);

    if (const auto bad = certificate_violations(c); !bad.empty())
        throw std::runtime_error("make_certificate: invariant fails: " + bad.front());
    const double ly = lasota_yorke_check(A, c, options.ly_trials, options.ly_seed);
    if (ly > 1e-10) {
        std::ostringstream os;
        os << "make_certificate: Lasota-Yorke inequality violated by " << std::setprecision(17) << ly
           << " with C = " << c.C;
        throw std::runtime_error(os.str());
    }
    return c;
}

double lasota_yorke_check(const Potential& A, const ContractionCertificate& cert, int trials, std::uint64_t seed) {
    require_normalized(A, "lasota_yorke_check");
    Rng rng(seed);
    const int d = A.alphabet();
    double worst = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < trials; ++trial) {
        const int depth = 1 + static_cast<int>(rng.below(4));
        std::vector<double> table(word_count(d, depth));
        for (double& v : table) v = rng.uniform(-1.0, 1.0);
        LocallyConstantFunction phi(d, depth, std::move(table));
        double sup = 0.0;
        for (double v : phi.table()) sup = std::max(sup, std::abs(v));
        const double semi = theta_seminorm(phi, cert.theta);
        LocallyConstantFunction psi = phi;
        for (int t = 1; t <= cert.T; ++t) {
            psi = ruelle_apply(A, psi);
            const double excess =
                theta_seminorm(psi, cert.theta) - (cert.C * sup + std::pow(cert.theta, t) * semi);
            worst = std::max(worst, excess);
        }
    }
    return trials > 0 ? worst : 0.0;
}

double LemmaCoupling::paired_mass() const {
    double s = 0.0;
    for (double a : alpha) s += a;
    return s;
}

std::vector<double> LemmaCoupling::marginal_x() const {
    std::vector<double> m(alpha.size());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = alpha[j] + beta_x[j];
    return m;
}

std::vector<double> LemmaCoupling::marginal_y() const {
    std::vector<double> m(alpha.size());
    for (std::size_t j = 0; j < m.size(); ++j) m[j] = alpha[j] + beta_y[j];
    return m;
}

CouplingPlan LemmaCoupling::as_plan() const {
    const std::size_t n = alpha.size();
    Matrix g(n, n);
    for (std::size_t j = 0; j < n; ++j) g(j, j) = alpha[j];
    if (normalizer > 0.0)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) g(j, k) += beta_x[j] * beta_y[k] / normalizer;
    return CouplingPlan(std::move(g), FiniteDistribution::normalized(marginal_x()),
                        FiniteDistribution::normalized(marginal_y()));
}

LemmaCoupling lemma_coupling(const Potential& A, const ShiftPoint& x, const ShiftPoint& y, int T) {
    require_normalized(A, "lemma_coupling");
    require_alphabet(A, x.alphabet(), "lemma_coupling");
    require_alphabet(A, y.alphabet(), "lemma_coupling");
    check_preimage_guard(A.alphabet(), T, 1, "lemma_coupling");
    const auto d = static_cast<std::size_t>(A.alphabet());
    const int r = A.depth() - 1;
    const std::size_t n = ipow(d, T), contexts = ipow(d, r);

    // J^T(w u...) depends on the continuation only through its first m-1 symbols u.
    auto weight = [&](std::size_t w, std::size_t u) {
        std::vector<int> word = word_at(w, A.alphabet(), T);
        const auto tail = word_at(u, A.alphabet(), r);
        word.insert(word.end(), tail.begin(), tail.end());
        double s = 0.0;
        for (int k = 0; k < T; ++k) s += A.A.on_word(std::span<const int>(word).subspan(static_cast<std::size_t>(k)));
        return std::exp(s);
    };
    auto context_of = [&](const ShiftPoint& p) {
        std::size_t u = 0;
        for (int i = 1; i <= r; ++i) u = u * d + static_cast<std::size_t>(p.at(static_cast<std::size_t>(i)) - 1);
        return u;
    };
    const std::size_t ux = context_of(x), uy = context_of(y);

    LemmaCoupling lc;
    lc.preimages_x = preimages(x, T);
    lc.preimages_y = preimages(y, T);
    lc.alpha.resize(n);
    lc.beta_x.resize(n);
    lc.beta_y.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t u = 0; u < contexts; ++u) lo = std::min(lo, weight(j, u));
        lc.alpha[j] = lo;
        lc.beta_x[j] = weight(j, ux) - lo;
        lc.beta_y[j] = weight(j, uy) - lo;
    }
    lc.normalizer = 0.0;
    for (double b : lc.beta_x) lc.normalizer += b;
    return lc;
}

double contraction_distance(const ShiftPoint& x, const ShiftPoint& y, const ContractionCertificate& cert) {
    return std::min(1.0, d_theta(x, y, cert.theta) / cert.delta);
}

double w1_atomic(const AtomicMeasure& mu, const AtomicMeasure& nu, const ContractionCertificate& cert) {
    if (mu.size() > kMaxTransportAtoms || nu.size() > kMaxTransportAtoms)
        throw std::invalid_argument("w1_atomic: supports exceed the transport limit");
    Matrix cost(mu.size(), nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        for (std::size_t j = 0; j < nu.size(); ++j)
            cost(i, j) = contraction_distance(mu.atoms()[i].first, nu.atoms()[j].first, cert);
    return solve_w1(mu.weights(), nu.weights(), CostMatrix(std::move(cost))).value;
}

double w1_atomic_ultrametric(const AtomicMeasure& mu, const AtomicMeasure& nu, const ContractionCertificate& cert) {
    std::vector<std::pair<const ShiftPoint*, double>> leaves;
    leaves.reserve(mu.size() + nu.size());
    for (const auto& [x, w] : mu.atoms()) leaves.emplace_back(&x, w);
    for (const auto& [x, w] : nu.atoms()) leaves.emplace_back(&x, -w);
    std::stable_sort(leaves.begin(), leaves.end(),
                     [](const auto& a, const auto& b) { return sequence_less(*a.first, *b.first); });
    UltrametricW1 acc(Heights{cert.theta, cert.delta});
    std::size_t i = 0;
    std::optional<std::size_t> lcp_prev;
    const ShiftPoint* prev = nullptr;
    while (i < leaves.size()) {
        double diff = leaves[i].second;
        std::size_t j = i + 1;
        while (j < leaves.size() && *leaves[j].first == *leaves[i].first) diff += leaves[j++].second;
        if (prev) lcp_prev = common_prefix(*prev, *leaves[i].first);
        acc.add(diff, lcp_prev);
        prev = leaves[i].first;
        i = j;
    }
    return acc.finish();
}

ContractionCheck verify_pointwise_contraction(const Potential& A, const ShiftPoint& x, const ShiftPoint& y,
                                              const ContractionCertificate& cert) {
    const auto px = dual_apply(A, AtomicMeasure::dirac(x), cert.T);
    const auto py = dual_apply(A, AtomicMeasure::dirac(y), cert.T);
    ContractionCheck c{};
    c.lhs = w1_atomic(px, py, cert);
    c.rhs = cert.alpha * contraction_distance(x, y, cert);
    c.pass = c.lhs <= c.rhs + 1e-9;
    return c;
}

ContractionCheck verify_measure_contraction(const Potential& A, const AtomicMeasure& mu, const AtomicMeasure& nu,
                                            const ContractionCertificate& cert) {
    ContractionCheck c{};
    c.lhs = w1_atomic(dual_apply(A, mu, cert.T), dual_apply(A, nu, cert.T), cert);
    c.rhs = cert.alpha * w1_atomic(mu, nu, cert);
    c.pass = c.lhs <= c.rhs + 1e-9;
    return c;
}

std::vector<double> gibbs_cylinder_weights(const Potential& A, int n) {
    require_normalized(A, "gibbs_cylinder_weights");
    if (n < 1) throw std::invalid_argument("gibbs_cylinder_weights: n must be >= 1");
    const auto d = static_cast<std::size_t>(A.alphabet());
    const int r = A.depth() - 1;
    std::vector<double> g = gibbs_base(A);
    if (n < r) {
        const std::size_t span = ipow(d, r - n);
        std::vector<double> out(word_count(A.alphabet(), n), 0.0);
        for (std::size_t u = 0; u < g.size(); ++u) out[u / span] += g[u];
        return out;
    }
    // G(a w) = e^{A(a w_1..w_{m-1})} G(w) once |w| >= m - 1.
    const auto table = A.A.table();
    for (int L = r; L < n; ++L) {
        const std::size_t size = g.size();
        const std::size_t div = ipow(d, L - r);
        std::vector<double> next(size * d);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t w = 0; w < size; ++w)
                next[a * size + w] = std::exp(table[a * ipow(d, r) + w / div]) * g[w];
        g.swap(next);
    }
    return g;
}

double w1_to_gibbs(const Potential& A, const AtomicMeasure& mu, const ContractionCertificate& cert) {
    require_normalized(A, "w1_to_gibbs");
    require_alphabet(A, mu.alphabet(), "w1_to_gibbs");
    const Heights h{cert.theta, cert.delta};
    const std::size_t Lmax = truncation_level(h);
    const auto pi = gibbs_base(A);
    const ForwardChain fc(A, pi);

    std::vector<std::size_t> order(mu.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto& atoms = mu.atoms();
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sequence_less(atoms[a].first, atoms[b].first); });
    std::vector<std::size_t> lcp(order.size(), 0);
    for (std::size_t k = 1; k < order.size(); ++k) lcp[k] = *common_prefix(atoms[order[k - 1]].first, atoms[order[k]].first);
    std::vector<std::vector<double>> gw(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) gw[k] = gibbs_prefix_weights(pi, fc, atoms[order[k]].first, Lmax);

    double total = 0.0;
    for (std::size_t L = 1; L <= Lmax; ++L) {
        double level = 0.0, covered = 0.0;
        for (std::size_t k = 0; k < order.size();) {
            double mass = atoms[order[k]].second;
            std::size_t j = k + 1;
            while (j < order.size() && lcp[j] >= L) mass += atoms[order[j++]].second;
            level += std::abs(mass - gw[k][L]);
            covered += gw[k][L];
            k = j;
        }
        level += std::max(0.0, 1.0 - covered);
        total += level * (h(L - 1) - h(L)) / 2.0;
    }
    return total;
}

namespace {

// Iterates of a measure under (L*)^t stored as weights over prepended
// words: atom i of mu0 becomes v x_i with weight weights[i][index(v)].
struct WordIterate {
    std::vector<ShiftPoint> points;
    std::vector<std::vector<double>> weights;
    int length = 0;
};

void prepend_step(WordIterate& it, const Potential& A, const std::vector<double>& exp_table) {
    const auto d = static_cast<std::size_t>(A.alphabet());
    const int r = A.depth() - 1;
    const std::size_t ctx_size = ipow(d, r);
    for (std::size_t i = 0; i < it.points.size(); ++i) {
        const auto& old = it.weights[i];
        std::vector<double> next(old.size() * d);
        for (std::size_t v = 0; v < old.size(); ++v) {
            const std::size_t ctx = r == 0 ? 0 : prefix_index(v, it.length, it.points[i], r, d);
            for (std::size_t a = 0; a < d; ++a) next[a * old.size() + v] = old[v] * exp_table[a * ctx_size + ctx];
        }
        it.weights[i].swap(next);
    }
    ++it.length;
}

AtomicMeasure explicit_measure(const WordIterate& it, int d) {
    std::vector<std::pair<ShiftPoint, double>> atoms;
    for (std::size_t i = 0; i < it.points.size(); ++i)
        for (std::size_t v = 0; v < it.weights[i].size(); ++v)
            atoms.emplace_back(it.points[i].prepend(word_at(v, d, it.length)), it.weights[i][v]);
    return AtomicMeasure(std::move(atoms));
}

// Leaves v y with y in Y = {x_i} U {u x_i : |u| = T}: the support of the
// iterate at word length s together with the next one at s + T.
struct BlockLeaves {
    struct Leaf {
        ShiftPoint point;
        std::vector<std::size_t> current;                           // i: atom v x_i
        std::vector<std::pair<std::size_t, std::size_t>> next;      // (i, u): atom v u x_i
    };
    std::vector<Leaf> leaves;
    std::vector<std::size_t> lcp;  // lcp[q] = common prefix of leaves q-1 and q
};

BlockLeaves block_leaves(const std::vector<ShiftPoint>& xs, int T, int d) {
    std::vector<BlockLeaves::Leaf> raw;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        raw.push_back({xs[i], {i}, {}});
        const std::size_t n = word_count(d, T);
        for (std::size_t u = 0; u < n; ++u) raw.push_back({xs[i].prepend(word_at(u, d, T)), {}, {{i, u}}});
    }
    std::stable_sort(raw.begin(), raw.end(),
                     [](const auto& a, const auto& b) { return sequence_less(a.point, b.point); });
    BlockLeaves out;
    for (auto& leaf : raw) {
        if (!out.leaves.empty() && out.leaves.back().point == leaf.point) {
            auto& back = out.leaves.back();
            back.current.insert(back.current.end(), leaf.current.begin(), leaf.current.end());
            back.next.insert(back.next.end(), leaf.next.begin(), leaf.next.end());
            continue;
        }
        out.lcp.push_back(out.leaves.empty() ? 0 : *common_prefix(out.leaves.back().point, leaf.point));
        out.leaves.push_back(std::move(leaf));
    }
    return out;
}

double block_gap(const BlockLeaves& bl, const WordIterate& before, const WordIterate& after, int T, std::size_t d,
                 const Heights& h) {
    UltrametricW1 acc(h);
    const int s = before.length;
    const std::size_t groups = ipow(d, s), spread = ipow(d, T);
    for (std::size_t v = 0; v < groups; ++v) {
        for (std::size_t q = 0; q < bl.leaves.size(); ++q) {
            const auto& leaf = bl.leaves[q];
            double diff = 0.0;
            for (std::size_t i : leaf.current) diff += before.weights[i][v];
            for (const auto& [i, u] : leaf.next) diff -= after.weights[i][v * spread + u];
            std::optional<std::size_t> lcp;
            if (q > 0) lcp = static_cast<std::size_t>(s) + bl.lcp[q];
            else if (v > 0) lcp = consecutive_word_lcp(v - 1, s, d);
            acc.add(diff, lcp);
        }
    }
    return acc.finish();
}

double block_ref_gap(const WordIterate& it, const Potential& A, const ForwardChain& fc,
                     const ContractionCertificate& cert) {
    const auto d = static_cast<std::size_t>(A.alphabet());
    const int r = A.depth() - 1;
    const int s = it.length;
    if (s < r || s == 0) return w1_to_gibbs(A, explicit_measure(it, A.alphabet()), cert);

    const Heights h{cert.theta, cert.delta};
    const std::size_t Lmax = truncation_level(h);
    std::vector<double> level_sum(Lmax + 1, 0.0);

    // Levels 1..s: every cylinder of length L carries mass.
    const std::size_t groups = ipow(d, s);
    std::vector<double> mass(groups, 0.0);
    for (const auto& w : it.weights)
        for (std::size_t v = 0; v < groups; ++v) mass[v] += w[v];
    const std::vector<double> g_s = gibbs_cylinder_weights(A, s);
    {
        std::vector<double> m = mass, g = g_s;
        for (int L = s; L >= 1; --L) {
            if (static_cast<std::size_t>(L) <= Lmax) {
                double acc = 0.0;
                for (std::size_t c = 0; c < m.size(); ++c) acc += std::abs(m[c] - g[c]);
                level_sum[static_cast<std::size_t>(L)] = acc;
            }
            if (L == 1) break;
            std::vector<double> mc(m.size() / d, 0.0), gc(g.size() / d, 0.0);
            for (std::size_t c = 0; c < m.size(); ++c) {
                mc[c / d] += m[c];
                gc[c / d] += g[c];
            }
            m.swap(mc);
            g.swap(gc);
        }
    }

    // Levels s+1..Lmax: cylinders v p with p a prefix of some x_i.
    if (Lmax > static_cast<std::size_t>(s)) {
        const std::size_t depth = Lmax - static_cast<std::size_t>(s);
        const std::size_t K = it.points.size();
        std::vector<std::size_t> order(K);
        for (std::size_t i = 0; i < K; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return sequence_less(it.points[a], it.points[b]); });
        std::vector<std::size_t> lcp(K, 0);
        for (std::size_t k = 1; k < K; ++k) lcp[k] = *common_prefix(it.points[order[k - 1]], it.points[order[k]]);
        // F[ctx][k][l]: Gibbs forward weight of the first l symbols of x_order[k] after context ctx.
        std::vector<std::vector<std::vector<double>>> F(fc.contexts,
                                                        std::vector<std::vector<double>>(K, std::vector<double>(depth + 1, 1.0)));
        for (std::size_t ctx = 0; ctx < fc.contexts; ++ctx)
            for (std::size_t k = 0; k < K; ++k) {
                std::size_t c = ctx;
                for (std::size_t l = 1; l <= depth; ++l) {
                    const auto b = static_cast<std::size_t>(it.points[order[k]].at(l) - 1);
                    F[ctx][k][l] = F[ctx][k][l - 1] * fc.prob[c * fc.d + b];
                    c = fc.advance(c, b);
                }
            }
        for (std::size_t l = 1; l <= depth; ++l) {
            double acc = 0.0, covered = 0.0;
            for (std::size_t v = 0; v < groups; ++v) {
                const std::size_t ctx = r == 0 ? 0 : v % fc.contexts;
                for (std::size_t k = 0; k < K;) {
                    double mu = it.weights[order[k]][v];
                    std::size_t j = k + 1;
                    while (j < K && lcp[j] >= l) mu += it.weights[order[j++]][v];
                    const double g = g_s[v] * F[ctx][k][l];
                    acc += std::abs(mu - g);
                    covered += g;
                    k = j;
                }
            }
            level_sum[static_cast<std::size_t>(s) + l] = acc + std::max(0.0, 1.0 - covered);
        }
    }

    double total = 0.0;
    for (std::size_t L = 1; L <= Lmax; ++L) total += level_sum[L] * (h(L - 1) - h(L)) / 2.0;
    return total;
}

}  // namespace

GibbsIteration iterate_to_gibbs(const Potential& A, const AtomicMeasure& mu0, int blocks,
                                const ContractionCertificate& cert) {
    require_normalized(A, "iterate_to_gibbs");
    require_alphabet(A, mu0.alphabet(), "iterate_to_gibbs");
    if (blocks < 1) throw std::invalid_argument("iterate_to_gibbs: need at least one block");
    const auto d = static_cast<std::size_t>(A.alphabet());
    const int T = cert.T;
    {
        std::size_t atoms = mu0.size();
        for (int k = 0; k < blocks * T; ++k) {
            atoms *= d;
            if (atoms > kMaxAtoms) {
                std::ostringstream os;
                os << "iterate_to_gibbs: " << blocks << " blocks of T = " << T
                   << " exceed the atom guard " << kMaxAtoms;
                throw std::invalid_argument(os.str());
            }
        }
    }

    const auto table = A.A.table();
    std::vector<double> exp_table(table.size());
    for (std::size_t k = 0; k < table.size(); ++k) exp_table[k] = std::exp(table[k]);
    const Heights h{cert.theta, cert.delta};
    const auto pi = gibbs_base(A);
    const ForwardChain fc(A, pi);

    WordIterate it;
    for (const auto& [x, w] : mu0.atoms()) {
        it.points.push_back(x);
        it.weights.push_back({w});
    }
    const BlockLeaves bl = block_leaves(it.points, T, A.alphabet());

    GibbsIteration result;
    for (int k = 1; k <= blocks; ++k) {
        WordIterate before = it;
        for (int step = 0; step < T; ++step) prepend_step(it, A, exp_table);
        IterateBlock row{};
        row.block = k;
        row.gap = block_gap(bl, before, it, T, d, h);
        if (!result.blocks.empty() && result.blocks.back().gap > kGapNoiseFloor)
            row.ratio = row.gap / result.blocks.back().gap;
        row.ref_gap = block_ref_gap(it, A, fc, cert);
        result.blocks.push_back(row);
    }

    result.depth2_weights.assign(d * d, 0.0);
    for (std::size_t i = 0; i < it.points.size(); ++i)
        for (std::size_t v = 0; v < it.weights[i].size(); ++v)
            result.depth2_weights[prefix_index(v, it.length, it.points[i], 2, d)] += it.weights[i][v];
    return result;
}

Potential read_potential(std::istream& in) {
    std::string line;
    int d = 0, m = 0;
    double theta = 0.0;
    bool header = false;
    std::vector<double> table;
    std::vector<char> seen;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> tok;
        double v;
        while (ls >> v) tok.push_back(v);
        if (!ls.eof()) throw std::invalid_argument("read_potential: malformed line '" + line + "'");
        if (tok.empty()) continue;
        if (!header) {
            if (tok.size() != 3) throw std::invalid_argument("read_potential: header must be 'd m theta'");
            d = static_cast<int>(tok[0]);
            m = static_cast<int>(tok[1]);
            theta = tok[2];
            if (d < 1 || m < 1 || d != tok[0] || m != tok[1]) throw std::invalid_argument("read_potential: invalid header");
            table.assign(word_count(d, m), 0.0);
            seen.assign(table.size(), 0);
            header = true;
            continue;
        }
        if (tok.size() != static_cast<std::size_t>(m) + 1)
            throw std::invalid_argument("read_potential: expected a word of length m followed by a value");
        std::vector<int> word(static_cast<std::size_t>(m));
        for (std::size_t i = 0; i < word.size(); ++i) {
            word[i] = static_cast<int>(tok[i]);
            if (word[i] != tok[i]) throw std::invalid_argument("read_potential: non-integer symbol");
        }
        const std::size_t idx = word_index(word, d);
        table[idx] = tok.back();
        seen[idx] = 1;
    }
    if (!header) throw std::invalid_argument("read_potential: missing header");
    for (char s : seen)
        if (!s) throw std::invalid_argument("read_potential: table is missing words");
    return Potential(LocallyConstantFunction(d, m, std::move(table)), theta);
}

void write_potential(std::ostream& out, const Potential& A) {
    out << A.alphabet() << ' ' << A.depth() << ' ' << std::setprecision(17) << A.theta << '\n';
    const auto table = A.A.table();
    for (std::size_t i = 0; i < table.size(); ++i) {
        for (int s : word_at(i, A.alphabet(), A.depth())) out << s << ' ';
        out << table[i] << '\n';
    }
}

}  // namespace coupling
