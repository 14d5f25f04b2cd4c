#pragma once

// Stochastic unraveling of a Kraus family into pure-state trajectories.
//
// Given |psi>, branch i is realized with probability p_i = w_i ||K_i psi||^2
// and the state jumps to K_i psi / ||K_i psi||. Averaging the resulting
// projectors over trajectories estimates the mean (ensemble) state.
//
// Random streams: trajectory k of a run with master seed s uses an
// mt19937_64 engine seeded with  s ^ splitmix64(k)  and consumes exactly one
// 53-bit uniform draw per step. Results therefore depend only on
// (family, psi0, n_steps, s, k) and not on scheduling.

#include <cstdint>
#include <functional>
#include <vector>

#include "collapse/linops.hpp"
#include "collapse/random.hpp"
#include "collapse/semigroup.hpp"

namespace collapse::unravel {

inline constexpr double kZeroBranchEpsilon = 1e-14;
inline constexpr double kProbabilitySumTolerance = 1e-10;

struct BranchOutcome {
  std::size_t branch_index;
  double probability;
  StateVector post_state;
};

struct TrajectoryStep {
  std::size_t branch_index;
  double probability;
  StateVector post_state;
};

struct TrajectoryRecord {
  std::uint64_t seed;
  std::vector<TrajectoryStep> steps;
  StateVector initial_state;

  const StateVector& final_state() const { return steps.empty() ? initial_state : steps.back().post_state; }
  std::vector<std::size_t> branch_indices() const;
};

struct SamplerConfig {
  std::uint64_t master_seed = 0;
  std::size_t n_trajectories = 1;
  double zero_branch_epsilon = kZeroBranchEpsilon;
  unsigned threads = 1;
};

/// Inversion sampling over precomputed branch probabilities: the first branch
/// whose cumulative probability is >= draw, skipping branches below
/// `zero_branch_epsilon`. Returns the selected index.
std::size_t select_branch(const std::vector<double>& probabilities, double draw,
                          double zero_branch_epsilon = kZeroBranchEpsilon);

/// One stochastic update of `psi` by the family, driven by `draw` in [0, 1).
BranchOutcome sample_branch(const KrausFamily& f, const StateVector& psi, double draw,
                            double zero_branch_epsilon = kZeroBranchEpsilon);

/// n_steps successive updates with draws from mt19937_64(seed).
TrajectoryRecord run_trajectory(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps,
                                std::uint64_t seed, double zero_branch_epsilon = kZeroBranchEpsilon);

/// Final states of all trajectories of a run, ordered by trajectory index.
std::vector<TrajectoryRecord> run_trajectories(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps,
                                               const SamplerConfig& cfg);

/// Average of |psi_final><psi_final| over trajectories, summed in index order.
DensityOperator estimate_ensemble(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps,
                                  const SamplerConfig& cfg);

/// Exact mean state after n_steps applications of the channel.
DensityOperator exact_ensemble(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps);

/// Trace distance between the Monte Carlo estimate and the exact mean state.
double ensemble_consistency(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps,
                            const SamplerConfig& cfg);

}  // namespace collapse::unravel
