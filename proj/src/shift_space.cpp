#include "coupling/shift_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "coupling/measures.hpp"

namespace coupling {

namespace {

void check_symbols(const std::vector<int>& w, int d, const char* what) {
    for (int s : w)
        if (s < 1 || s > d) throw std::invalid_argument(std::string(what) + ": symbol out of range");
}

std::size_t primitive_period(const std::vector<int>& c) {
    const std::size_t n = c.size();
    for (std::size_t k = 1; k < n; ++k) {
        if (n % k != 0) continue;
        bool ok = true;
        for (std::size_t i = k; i < n && ok; ++i) ok = c[i] == c[i - k];
        if (ok) return k;
    }
    return n;
}

void check_theta(double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0, 1)");
}

}  // namespace

ShiftPoint::ShiftPoint(int alphabet, std::vector<int> prefix, std::vector<int> cycle)
    : alphabet_(alphabet), prefix_(std::move(prefix)), cycle_(std::move(cycle)) {
    if (alphabet_ < 1) throw std::invalid_argument("ShiftPoint: alphabet size must be >= 1");
    if (cycle_.empty()) throw std::invalid_argument("ShiftPoint: cycle must be non-empty");
    check_symbols(prefix_, alphabet_, "ShiftPoint");
    check_symbols(cycle_, alphabet_, "ShiftPoint");

    cycle_.resize(primitive_period(cycle_));
    // Absorb the prefix tail into the cycle while it repeats the cycle's end.
    while (!prefix_.empty() && prefix_.back() == cycle_.back()) {
        prefix_.pop_back();
        std::rotate(cycle_.rbegin(), cycle_.rbegin() + 1, cycle_.rend());
    }
}

ShiftPoint ShiftPoint::parse(std::string_view text) {
    const auto colon = text.find(':');
    const auto bar = text.find('|');
    if (colon == std::string_view::npos || bar == std::string_view::npos || bar < colon)
        throw std::invalid_argument("ShiftPoint::parse: expected 'd:prefix|cycle'");
    const int d = std::stoi(std::string(text.substr(0, colon)));
    auto symbols = [d](std::string_view part) {
        std::vector<int> out;
        if (part.empty()) return out;
        if (d > 9 || part.find(',') != std::string_view::npos) {
            std::stringstream ss{std::string(part)};
            std::string tok;
            while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
        } else {
            for (char c : part) {
                if (c < '0' || c > '9') throw std::invalid_argument("ShiftPoint::parse: non-digit symbol");
                out.push_back(c - '0');
            }
        }
        return out;
    };
    return ShiftPoint(d, symbols(text.substr(colon + 1, bar - colon - 1)), symbols(text.substr(bar + 1)));
}

std::string ShiftPoint::to_string() const {
    std::ostringstream os;
    const char* sep = alphabet_ > 9 ? "," : "";
    auto put = [&](const std::vector<int>& w) {
        for (std::size_t i = 0; i < w.size(); ++i) os << (i ? sep : "") << w[i];
    };
    os << alphabet_ << ':';
    put(prefix_);
    os << '|';
    put(cycle_);
    return os.str();
}

std::vector<int> ShiftPoint::unroll(std::size_t n) const {
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = at(i + 1);
    return out;
}

ShiftPoint ShiftPoint::prepend(std::span<const int> word) const {
    std::vector<int> p(word.begin(), word.end());
    p.insert(p.end(), prefix_.begin(), prefix_.end());
    return ShiftPoint(alphabet_, std::move(p), cycle_);
}

std::optional<std::size_t> first_disagreement(const ShiftPoint& x, const ShiftPoint& y) {
    if (x.alphabet() != y.alphabet()) throw std::invalid_argument("first_disagreement: alphabets differ");
    if (x == y) return std::nullopt;
    const std::size_t horizon =
        x.prefix().size() + y.prefix().size() + std::lcm(x.cycle().size(), y.cycle().size());
    for (std::size_t i = 1; i <= horizon; ++i)
        if (x.at(i) != y.at(i)) return i;
    throw std::logic_error("first_disagreement: distinct canonical forms agree on the comparison horizon");
}

std::optional<std::size_t> common_prefix(const ShiftPoint& x, const ShiftPoint& y) {
    const auto n = first_disagreement(x, y);
    if (!n) return std::nullopt;
    return *n - 1;
}

bool sequence_less(const ShiftPoint& x, const ShiftPoint& y) {
    const auto n = first_disagreement(x, y);
    return n && x.at(*n) < y.at(*n);
}

double d_theta(const ShiftPoint& x, const ShiftPoint& y, double theta) {
    check_theta(theta);
    const auto n = first_disagreement(x, y);
    return n ? std::pow(theta, static_cast<double>(*n)) : 0.0;
}

ShiftPoint shift_apply(const ShiftPoint& x) {
    if (!x.prefix().empty())
        return ShiftPoint(x.alphabet(), {x.prefix().begin() + 1, x.prefix().end()}, x.cycle());
    std::vector<int> c = x.cycle();
    std::rotate(c.begin(), c.begin() + 1, c.end());
    return ShiftPoint::periodic(x.alphabet(), std::move(c));
}

std::vector<ShiftPoint> preimages(const ShiftPoint& x, int t) {
    if (t < 1) throw std::invalid_argument("preimages: t must be >= 1");
    const std::size_t count = word_count(x.alphabet(), t);
    std::vector<ShiftPoint> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) out.push_back(x.prepend(word_at(k, x.alphabet(), t)));
    return out;
}

LocallyConstantFunction::LocallyConstantFunction(int alphabet, int depth, std::vector<double> table)
    : alphabet_(alphabet), depth_(depth), table_(std::move(table)) {
    if (depth_ < 1) throw std::invalid_argument("LocallyConstantFunction: depth must be >= 1");
    if (table_.size() != word_count(alphabet_, depth_))
        throw std::invalid_argument("LocallyConstantFunction: table must have d^m entries");
    for (double v : table_)
        if (!std::isfinite(v)) throw std::invalid_argument("LocallyConstantFunction: non-finite table entry");
}

double LocallyConstantFunction::on_word(std::span<const int> word) const {
    if (word.size() < static_cast<std::size_t>(depth_))
        throw std::invalid_argument("LocallyConstantFunction: word shorter than depth");
    return table_[word_index(word.first(static_cast<std::size_t>(depth_)), alphabet_)];
}

double LocallyConstantFunction::operator()(const ShiftPoint& x) const {
    std::size_t idx = 0;
    for (int i = 1; i <= depth_; ++i) idx = idx * static_cast<std::size_t>(alphabet_) + static_cast<std::size_t>(x.at(static_cast<std::size_t>(i)) - 1);
    return table_[idx];
}

LocallyConstantFunction LocallyConstantFunction::refined(int depth) const {
    if (depth < depth_) throw std::invalid_argument("LocallyConstantFunction::refined: depth must not decrease");
    const std::size_t extra = word_count(alphabet_, depth - depth_);
    std::vector<double> t(table_.size() * extra);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = table_[i / extra];
    return {alphabet_, depth, std::move(t)};
}

LocallyConstantFunction LocallyConstantFunction::scaled(double c) const {
    std::vector<double> t = table_;
    for (double& v : t) v *= c;
    return {alphabet_, depth_, std::move(t)};
}

double var_n(const LocallyConstantFunction& f, int n) {
    if (n < 0) throw std::invalid_argument("var_n: negative n");
    if (n >= f.depth()) return 0.0;
    // Words sharing their first n symbols form contiguous blocks.
    const std::size_t block = word_count(f.alphabet(), f.depth() - n);
    double v = 0.0;
    const auto t = f.table();
    for (std::size_t start = 0; start < t.size(); start += block) {
        const auto [lo, hi] = std::minmax_element(t.begin() + static_cast<std::ptrdiff_t>(start),
                                                  t.begin() + static_cast<std::ptrdiff_t>(start + block));
        v = std::max(v, *hi - *lo);
    }
    return v;
}

double theta_seminorm(const LocallyConstantFunction& f, double theta) {
    check_theta(theta);
    double s = 0.0;
    for (int n = 0; n < f.depth(); ++n) s = std::max(s, var_n(f, n) / std::pow(theta, n));
    return s;
}

double theta_lipschitz_constant(const LocallyConstantFunction& f, double theta) {
    return theta_seminorm(f, theta) / theta;
}

}  // namespace coupling
