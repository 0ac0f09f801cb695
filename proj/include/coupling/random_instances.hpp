#pragma once

#include <cstddef>
#include <vector>

#include "coupling/markov_coupling.hpp"
#include "coupling/measures.hpp"
#include "coupling/rng.hpp"
#include "coupling/ruelle.hpp"
#include "coupling/shift_space.hpp"
#include "coupling/transport.hpp"

// Seeded generators for the verification suites. Every instance is a pure
// function of the generator state, so a suite is reproducible from its seed.
namespace coupling::random {

/// Uniform weights renormalized; some entries are zeroed with probability
/// sparsity (at least one entry stays positive).
FiniteDistribution distribution(Rng& rng, std::size_t size, double sparsity = 0.0);

/// Positive stochastic matrix with entries proportional to U[floor, 1].
StochasticMatrix positive_chain(Rng& rng, std::size_t d, double floor = 0.05);

/// Two-state chain with P_11, P_22 drawn from [lo, hi].
StochasticMatrix two_state_chain(Rng& rng, double lo, double hi);

/// Shortest-path metric of a random weighted complete graph.
CostMatrix metric(Rng& rng, std::size_t size);

/// A feasible plan with the given marginals: a random mixture of the product
/// plan and a north-west-corner plan over a random ordering.
CouplingPlan feasible_plan(Rng& rng, const FiniteDistribution& mu, const FiniteDistribution& nu);

/// Table uniform in [-amplitude, amplitude], then normalized.
Potential potential(Rng& rng, int d, int depth, double amplitude, double theta);

ShiftPoint shift_point(Rng& rng, int d, std::size_t max_prefix = 4, std::size_t max_cycle = 3);

/// Distinct random atoms with random positive weights.
AtomicMeasure atomic_measure(Rng& rng, int d, std::size_t atoms);

}  // namespace coupling::random
