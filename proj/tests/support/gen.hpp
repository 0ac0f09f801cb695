#pragma once

// Seeded generators for property tests, separate from the library's own
// instance generators.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "coupling/markov_coupling.hpp"
#include "coupling/ruelle.hpp"
#include "coupling/shift_space.hpp"

namespace gen {

struct Gen {
    explicit Gen(std::uint64_t seed) : eng(seed) {}

    double unif() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
    double unif(double lo, double hi) { return lo + (hi - lo) * unif(); }
    int below(int n) { return static_cast<int>(eng() % static_cast<std::uint64_t>(n)); }

    std::vector<double> probs(std::size_t m, double zero_rate = 0.0) {
        std::vector<double> w(m);
        double s = 0.0;
        for (auto& x : w) s += x = unif() < zero_rate ? 0.0 : unif(0.001, 1.0);
        if (s == 0.0) {
            w[0] = 1.0;
            s = 1.0;
        }
        for (auto& x : w) x /= s;
        return w;
    }

    coupling::StochasticMatrix chain(std::size_t d, double floor = 0.02) {
        coupling::Matrix p(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += p(i, j) = unif(floor, 1.0);
            double t = 0.0;
            for (std::size_t j = 0; j + 1 < d; ++j) t += p(i, j) /= s;
            p(i, d - 1) = 1.0 - t;
        }
        return coupling::StochasticMatrix(std::move(p));
    }

    std::vector<int> word(int d, std::size_t n) {
        std::vector<int> w(n);
        for (auto& s : w) s = 1 + below(d);
        return w;
    }

    coupling::ShiftPoint point(int d, int max_prefix = 5, int max_cycle = 4) {
        auto pre = word(d, static_cast<std::size_t>(below(max_prefix + 1)));
        auto cyc = word(d, static_cast<std::size_t>(1 + below(max_cycle)));
        return {d, std::move(pre), std::move(cyc)};
    }

    coupling::LocallyConstantFunction function(int d, int depth, double amp = 1.0) {
        std::vector<double> t(static_cast<std::size_t>(std::pow(d, depth)));
        for (auto& v : t) v = unif(-amp, amp);
        return {d, depth, std::move(t)};
    }

    coupling::Potential potential(int d, int depth, double amp, double theta) {
        return coupling::normalize_potential(coupling::Potential(function(d, depth, amp), theta));
    }

    std::mt19937_64 eng;
};

}  // namespace gen
