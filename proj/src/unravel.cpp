#include "collapse/unravel.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace collapse::unravel {

std::vector<std::size_t> TrajectoryRecord::branch_indices() const {
  std::vector<std::size_t> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.branch_index);
  return out;
}

std::size_t select_branch(const std::vector<double>& probabilities, double draw, double zero_branch_epsilon) {
  double total = 0.0;
  for (double p : probabilities) total += p;
  if (std::abs(total - 1.0) > kProbabilitySumTolerance)
    throw InconsistencyError("branch probabilities sum to " + std::to_string(total) + ", not 1");

  std::size_t last_eligible = probabilities.size();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    cumulative += probabilities[i];
    if (probabilities[i] < zero_branch_epsilon) continue;
    last_eligible = i;
    if (draw <= cumulative) return i;
  }
  if (last_eligible == probabilities.size())
    throw InconsistencyError("every branch probability is below the zero-branch threshold");
  // draw beyond the rounded total
  return last_eligible;
}

BranchOutcome sample_branch(const KrausFamily& f, const StateVector& psi, double draw, double zero_branch_epsilon) {
  f.require_complete();
  if (f.dim() != psi.dim()) throw ValidationError("sample_branch: dimension mismatch", "dim");
  if (!(draw >= 0.0 && draw < 1.0)) throw ValidationError("random draw must lie in [0,1)", "draw");

  std::vector<ComplexVector> images;
  std::vector<double> probs;
  images.reserve(f.size());
  probs.reserve(f.size());
  for (const auto& b : f.branches()) {
    images.push_back(b.op * psi.amplitudes());
    probs.push_back(b.weight * images.back().squaredNorm());
  }
  const std::size_t i = select_branch(probs, draw, zero_branch_epsilon);
  return {i, probs[i], StateVector(std::move(images[i]))};
}

TrajectoryRecord run_trajectory(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps,
                                std::uint64_t seed, double zero_branch_epsilon) {
  TrajectoryRecord rec{seed, {}, psi0};
  rec.steps.reserve(n_steps);
  rng::Engine eng(seed);
  const StateVector* current = &psi0;
  for (std::size_t s = 0; s < n_steps; ++s) {
    auto out = sample_branch(f, *current, rng::uniform01(eng), zero_branch_epsilon);
    rec.steps.push_back({out.branch_index, out.probability, std::move(out.post_state)});
    current = &rec.steps.back().post_state;
  }
  return rec;
}

namespace {

/// Runs fn(k) for k in [begin, end) on up to `threads` threads; the first
/// exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_range(std::size_t begin, std::size_t end, unsigned threads, Fn&& fn) {
  const std::size_t n = end - begin;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::size_t>(n, 1u << 16))));
  if (threads == 1) {
    for (std::size_t k = begin; k < end; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k = begin + t; k < end; k += threads) fn(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void check_run(const KrausFamily& f, const StateVector& psi0, const SamplerConfig& cfg) {
  if (cfg.n_trajectories == 0) throw ValidationError("n_trajectories must be at least 1", "n_trajectories");
  f.require_complete();
  if (f.dim() != psi0.dim()) throw ValidationError("initial state dimension mismatch", "dim");
}

}  // namespace

std::vector<TrajectoryRecord> run_trajectories(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps,
                                               const SamplerConfig& cfg) {
  check_run(f, psi0, cfg);
  std::vector<TrajectoryRecord> out(cfg.n_trajectories, TrajectoryRecord{0, {}, psi0});
  parallel_range(0, cfg.n_trajectories, cfg.threads, [&](std::size_t k) {
    out[k] = run_trajectory(f, psi0, n_steps, rng::stream_seed(cfg.master_seed, k), cfg.zero_branch_epsilon);
  });
  return out;
}

DensityOperator estimate_ensemble(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps,
                                  const SamplerConfig& cfg) {
  check_run(f, psi0, cfg);
  constexpr std::size_t kBlock = 4096;
  ComplexMatrix acc = ComplexMatrix::Zero(f.dim(), f.dim());
  std::vector<ComplexVector> finals(std::min(kBlock, cfg.n_trajectories));
  for (std::size_t begin = 0; begin < cfg.n_trajectories; begin += kBlock) {
    const std::size_t end = std::min(begin + kBlock, cfg.n_trajectories);
    parallel_range(begin, end, cfg.threads, [&](std::size_t k) {
      finals[k - begin] = run_trajectory(f, psi0, n_steps, rng::stream_seed(cfg.master_seed, k),
                                         cfg.zero_branch_epsilon)
                              .final_state()
                              .amplitudes();
    });
    for (std::size_t k = begin; k < end; ++k) acc.noalias() += finals[k - begin] * finals[k - begin].adjoint();
  }
  acc /= static_cast<double>(cfg.n_trajectories);
  return DensityOperator(std::move(acc), DensityOperator::PositiveByConstruction{});
}

DensityOperator exact_ensemble(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps) {
  DensityOperator rho = DensityOperator::pure(psi0);
  for (std::size_t s = 0; s < n_steps; ++s) rho = apply_channel(f, rho);
  return rho;
}

double ensemble_consistency(const KrausFamily& f, const StateVector& psi0, std::size_t n_steps,
                            const SamplerConfig& cfg) {
  return trace_distance(estimate_ensemble(f, psi0, n_steps, cfg), exact_ensemble(f, psi0, n_steps));
}

}  // namespace collapse::unravel
