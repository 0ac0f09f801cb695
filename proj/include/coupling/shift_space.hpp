#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace coupling {

/// Eventually periodic point of {1..d}^N: prefix followed by cycle repeated
/// forever. Coordinates are 1-based, x = (x_1, x_2, ...).
///
/// The stored form is canonical: the cycle is primitive (not a power of a
/// shorter word) and the prefix is as short as possible, which fixes the
/// rotation of the cycle. Two points are the same sequence iff their
/// canonical forms are equal, so == is sequence equality.
class ShiftPoint {
public:
    ShiftPoint(int alphabet, std::vector<int> prefix, std::vector<int> cycle);

    static ShiftPoint periodic(int alphabet, std::vector<int> cycle) { return {alphabet, {}, std::move(cycle)}; }

    /// Parses `d:prefix|cycle`, e.g. `2:122|12`. For d <= 9 symbols are
    /// single digits; larger alphabets separate symbols by commas.
    static ShiftPoint parse(std::string_view text);
    std::string to_string() const;

    int alphabet() const { return alphabet_; }
    const std::vector<int>& prefix() const { return prefix_; }
    const std::vector<int>& cycle() const { return cycle_; }

    /// x_i for i >= 1.
    int at(std::size_t i) const {
        if (i <= prefix_.size()) return prefix_[i - 1];
        return cycle_[(i - 1 - prefix_.size()) % cycle_.size()];
    }
    std::vector<int> unroll(std::size_t n) const;

    /// The point w x.
    ShiftPoint prepend(std::span<const int> word) const;

    // Ordering of representations; not the lexicographic order of sequences.
    friend bool operator==(const ShiftPoint&, const ShiftPoint&) = default;
    friend auto operator<=>(const ShiftPoint&, const ShiftPoint&) = default;

private:
    int alphabet_;
    std::vector<int> prefix_;
    std::vector<int> cycle_;
};

/// Index (1-based) of the first coordinate where x and y differ; empty if x == y.
std::optional<std::size_t> first_disagreement(const ShiftPoint& x, const ShiftPoint& y);

/// Length of the longest common prefix; empty if x == y.
std::optional<std::size_t> common_prefix(const ShiftPoint& x, const ShiftPoint& y);

/// Lexicographic order of the sequences themselves.
bool sequence_less(const ShiftPoint& x, const ShiftPoint& y);

/// theta^N with N the first disagreement, 0 for x == y.
double d_theta(const ShiftPoint& x, const ShiftPoint& y, double theta);

/// sigma(x): drops x_1.
ShiftPoint shift_apply(const ShiftPoint& x);

/// The d^t points w x, |w| = t, ordered lexicographically by w.
std::vector<ShiftPoint> preimages(const ShiftPoint& x, int t);

/// Function of the first m coordinates, tabulated over the d^m words
/// (lexicographic index, first symbol most significant).
class LocallyConstantFunction {
public:
    LocallyConstantFunction(int alphabet, int depth, std::vector<double> table);

    static LocallyConstantFunction constant(int alphabet, double value) {
        return {alphabet, 1, std::vector<double>(static_cast<std::size_t>(alphabet), value)};
    }

    int alphabet() const { return alphabet_; }
    int depth() const { return depth_; }
    std::span<const double> table() const { return table_; }
    double operator[](std::size_t word_index) const { return table_[word_index]; }

    /// Value on any word of length >= depth (only the first depth symbols are read).
    double on_word(std::span<const int> word) const;
    double operator()(const ShiftPoint& x) const;

    /// Same function tabulated at a larger depth.
    LocallyConstantFunction refined(int depth) const;
    LocallyConstantFunction scaled(double c) const;

private:
    int alphabet_;
    int depth_;
    std::vector<double> table_;
};

/// sup |f(x) - f(y)| over x, y sharing their first n coordinates.
double var_n(const LocallyConstantFunction& f, int n);

/// max_n var_n(f) / theta^n.
double theta_seminorm(const LocallyConstantFunction& f, double theta);

/// Smallest L with |f(x) - f(y)| <= L d_theta(x, y). Since points at distance
/// theta^N share exactly N - 1 coordinates this is theta_seminorm / theta.
double theta_lipschitz_constant(const LocallyConstantFunction& f, double theta);

}  // namespace coupling
