#include "coupling/measures.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace coupling {

namespace {

void validate_probability(std::span<const double> w, const char* what) {
    if (w.empty()) throw std::invalid_argument(std::string(what) + ": empty weight vector");
    double total = 0.0;
    for (double x : w) {
        if (!std::isfinite(x) || x < 0.0)
            throw std::invalid_argument(std::string(what) + ": negative or non-finite weight");
        total += x;
    }
    if (std::abs(total - 1.0) > kWeightTolerance) {
        std::ostringstream os;
        os << what << ": weights sum to " << std::setprecision(17) << total
           << ", expected 1 within " << kWeightTolerance;
        throw std::invalid_argument(os.str());
    }
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        std::ostringstream os;
        os << what << ": dimension mismatch (" << a << " vs " << b << ")";
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

FiniteDistribution::FiniteDistribution(std::vector<double> weights) : weights_(std::move(weights)) {
    validate_probability(weights_, "FiniteDistribution");
}

FiniteDistribution FiniteDistribution::normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double x : weights) {
        if (!std::isfinite(x) || x < 0.0)
            throw std::invalid_argument("FiniteDistribution::normalized: negative or non-finite weight");
        total += x;
    }
    if (!(total > 0.0)) throw std::invalid_argument("FiniteDistribution::normalized: zero total mass");
    for (double& x : weights) x /= total;
    return FiniteDistribution(std::move(weights));
}

FiniteDistribution FiniteDistribution::point_mass(std::size_t size, std::size_t index) {
    if (index >= size) throw std::invalid_argument("FiniteDistribution::point_mass: index out of range");
    std::vector<double> w(size, 0.0);
    w[index] = 1.0;
    return FiniteDistribution(std::move(w));
}

FiniteDistribution FiniteDistribution::uniform(std::size_t size) {
    if (size == 0) throw std::invalid_argument("FiniteDistribution::uniform: empty set");
    return FiniteDistribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

SignedMeasure SignedMeasure::difference(const FiniteDistribution& mu, const FiniteDistribution& nu) {
    require_same_size(mu.size(), nu.size(), "SignedMeasure::difference");
    std::vector<double> w(mu.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = mu[i] - nu[i];
    return SignedMeasure(std::move(w));
}

double SignedMeasure::total() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

std::size_t word_count(int alphabet, int depth) {
    if (alphabet < 1) throw std::invalid_argument("word_count: alphabet size must be >= 1");
    if (depth < 0) throw std::invalid_argument("word_count: negative depth");
    if (alphabet > 1 &&
        static_cast<double>(depth) * std::log2(static_cast<double>(alphabet)) >
            CylinderDistribution::kMaxBits + 1e-9) {
        std::ostringstream os;
        os << "word_count: d^n with d=" << alphabet << ", n=" << depth
           << " exceeds the dense guard n*log2(d) <= " << CylinderDistribution::kMaxBits;
        throw std::invalid_argument(os.str());
    }
    std::size_t count = 1;
    for (int i = 0; i < depth; ++i) count *= static_cast<std::size_t>(alphabet);
    return count;
}

std::size_t word_index(std::span<const int> word, int alphabet) {
    std::size_t idx = 0;
    for (int s : word) {
        if (s < 1 || s > alphabet) throw std::invalid_argument("word_index: symbol out of range");
        idx = idx * static_cast<std::size_t>(alphabet) + static_cast<std::size_t>(s - 1);
    }
    return idx;
}

std::vector<int> word_at(std::size_t index, int alphabet, int depth) {
    std::vector<int> w(static_cast<std::size_t>(depth));
    for (int i = depth - 1; i >= 0; --i) {
        w[static_cast<std::size_t>(i)] = static_cast<int>(index % static_cast<std::size_t>(alphabet)) + 1;
        index /= static_cast<std::size_t>(alphabet);
    }
    return w;
}

CylinderDistribution::CylinderDistribution(int alphabet, int depth, std::vector<double> weights)
    : alphabet_(alphabet), depth_(depth), weights_(std::move(weights)) {
    if (depth < 1) throw std::invalid_argument("CylinderDistribution: depth must be >= 1");
    if (weights_.size() != word_count(alphabet, depth))
        throw std::invalid_argument("CylinderDistribution: weight vector must have d^n entries");
    validate_probability(weights_, "CylinderDistribution");
}

double CylinderDistribution::weight(std::span<const int> word) const {
    if (static_cast<int>(word.size()) != depth_)
        throw std::invalid_argument("CylinderDistribution::weight: word length differs from depth");
    return weights_[word_index(word, alphabet_)];
}

double tv_distance(const FiniteDistribution& mu, const FiniteDistribution& nu) {
    require_same_size(mu.size(), nu.size(), "tv_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu[i] - nu[i]);
    return s;
}

double tv_distance(const CylinderDistribution& mu, const CylinderDistribution& nu) {
    if (mu.alphabet() != nu.alphabet() || mu.depth() != nu.depth())
        throw std::invalid_argument("tv_distance: cylinder distributions differ in alphabet or depth");
    return tv_distance(mu.flatten(), nu.flatten());
}

double tv_norm(const SignedMeasure& rho) {
    double s = 0.0;
    for (double x : rho.weights()) s += std::abs(x);
    return s;
}

double tv_bruteforce(const FiniteDistribution& mu, const FiniteDistribution& nu) {
    require_same_size(mu.size(), nu.size(), "tv_bruteforce");
    const std::size_t m = mu.size();
    if (m > kBruteforceMaxSize) {
        std::ostringstream os;
        os << "tv_bruteforce: m=" << m << " exceeds the subset-enumeration guard m <= "
           << kBruteforceMaxSize;
        throw std::invalid_argument(os.str());
    }
    std::vector<double> diff(m);
    for (std::size_t i = 0; i < m; ++i) diff[i] = mu[i] - nu[i];

    // Gray-code walk over all subsets; each step toggles one element.
    double current = 0.0;
    double best = 0.0;
    std::vector<bool> in(m, false);
    const std::uint64_t subsets = std::uint64_t{1} << m;
    for (std::uint64_t k = 1; k < subsets; ++k) {
        const auto bit = static_cast<std::size_t>(std::countr_zero(k));
        if (in[bit]) current -= diff[bit];
        else current += diff[bit];
        in[bit] = !in[bit];
        best = std::max(best, current);
    }
    return 2.0 * best;
}

CylinderDistribution shift_pushforward(const CylinderDistribution& mu) {
    if (mu.depth() < 2) throw std::invalid_argument("shift_pushforward: depth must be >= 2");
    const std::size_t tail = word_count(mu.alphabet(), mu.depth() - 1);
    std::vector<double> out(tail, 0.0);
    for (std::size_t a = 0; a < static_cast<std::size_t>(mu.alphabet()); ++a)
        for (std::size_t r = 0; r < tail; ++r) out[r] += mu[a * tail + r];
    return CylinderDistribution(mu.alphabet(), mu.depth() - 1, std::move(out));
}

double moment_tail_bound(std::span<const double> psi_of_T_samples, double psi_at_n) {
    if (psi_of_T_samples.empty()) throw std::invalid_argument("moment_tail_bound: empty sample list");
    if (!(psi_at_n > 0.0)) throw std::invalid_argument("moment_tail_bound: psi(n) must be positive");
    double sum = 0.0;
    for (double s : psi_of_T_samples) {
        if (!(s >= 0.0)) throw std::invalid_argument("moment_tail_bound: samples must be non-negative");
        sum += s;
    }
    const double mean = sum / static_cast<double>(psi_of_T_samples.size());
    return std::min(1.0, mean / psi_at_n);
}

DistributionText read_distribution(std::istream& in) {
    std::string line;
    DistributionText out;
    bool have_header = false;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> tokens;
        double v;
        while (ls >> v) tokens.push_back(v);
        if (!ls.eof()) throw std::invalid_argument("read_distribution: malformed line '" + line + "'");
        if (tokens.empty()) continue;
        if (!have_header) {
            if (tokens.size() != 2) throw std::invalid_argument("read_distribution: header must be 'd n'");
            out.alphabet = static_cast<int>(tokens[0]);
            out.depth = static_cast<int>(tokens[1]);
            if (out.alphabet < 1 || out.depth < 0 || tokens[0] != out.alphabet || tokens[1] != out.depth)
                throw std::invalid_argument("read_distribution: invalid header");
            out.weights.assign(out.depth == 0 ? static_cast<std::size_t>(out.alphabet)
                                              : word_count(out.alphabet, out.depth),
                               0.0);
            have_header = true;
            continue;
        }
        const std::size_t word_len = out.depth == 0 ? 1 : static_cast<std::size_t>(out.depth);
        if (tokens.size() != word_len + 1)
            throw std::invalid_argument("read_distribution: expected word of length " +
                                        std::to_string(word_len) + " followed by a weight");
        std::vector<int> word(word_len);
        for (std::size_t i = 0; i < word_len; ++i) {
            word[i] = static_cast<int>(tokens[i]);
            if (word[i] != tokens[i]) throw std::invalid_argument("read_distribution: non-integer symbol");
        }
        out.weights[word_index(word, out.alphabet)] = tokens.back();
    }
    if (!have_header) throw std::invalid_argument("read_distribution: missing header");
    return out;
}

void write_distribution(std::ostream& out, const DistributionText& dist) {
    out << dist.alphabet << ' ' << dist.depth << '\n';
    const int len = dist.depth == 0 ? 1 : dist.depth;
    out << std::setprecision(17);
    for (std::size_t i = 0; i < dist.weights.size(); ++i) {
        for (int s : word_at(i, dist.alphabet, len)) out << s << ' ';
        out << dist.weights[i] << '\n';
    }
}

DistributionText to_text(const FiniteDistribution& mu) {
    return {static_cast<int>(mu.size()), 0, {mu.weights().begin(), mu.weights().end()}};
}

DistributionText to_text(const CylinderDistribution& mu) {
    return {mu.alphabet(), mu.depth(), {mu.weights().begin(), mu.weights().end()}};
}

}  // namespace coupling
