// SPDX-License-Identifier: Apache-2.0
//
// Comparison methods: running-mean (SWA) and exponential (EMA) weight
// averaging over the same candidate order as the pools, pruned back to the
// target sparsity after every update, and logit ensembles.
#pragma once

#include <vector>

#include "lotpool/data.hpp"
#include "lotpool/imp.hpp"
#include "lotpool/pools.hpp"
#include "lotpool/store.hpp"

namespace lotpool {

/// Running arithmetic mean: absorbing x as the (n+1)-th model applies
/// mean <- n/(n+1) * mean + 1/(n+1) * x.
class SwaState {
  public:
    explicit SwaState(ParamSet first);

    void absorb(const ParamSet& x);
    const ParamSet& mean() const noexcept { return mean_; }
    ParamSet& mean() noexcept { return mean_; }
    std::size_t count() const noexcept { return n_; }

  private:
    ParamSet mean_;
    std::size_t n_ = 1;
};

/// shadow <- decay * shadow + (1 - decay) * x, decay in (0,1).
class EmaState {
  public:
    EmaState(ParamSet initial, double decay);

    void update(const ParamSet& x);
    const ParamSet& shadow() const noexcept { return shadow_; }
    ParamSet& shadow() noexcept { return shadow_; }
    double decay() const noexcept { return decay_; }

  private:
    ParamSet shadow_;
    double decay_;
};

inline constexpr double kDefaultEmaDecay = 0.95;

struct AveragingOptions {
    std::optional<std::size_t> limit;
    CandidateSet candidates = CandidateSet::both;
};

/// Unconditionally absorbs every candidate, pruning to the target kept count after each step.
PoolOutcome swa_pool(const ImpRun& run, int t, const Dataset& valset, const AveragingOptions& options = {});
PoolOutcome ema_pool(const ImpRun& run, int t, double decay, const Dataset& valset,
                     const AveragingOptions& options = {});

struct EnsembleResult {
    double accuracy = 0.0;
    std::size_t members = 0;
    std::size_t forward_passes_per_sample = 0;
    std::size_t total_forward_passes = 0;
};

/// Averages raw logits across members; argmax ties go to the lowest class.
EnsembleResult output_ensemble(const std::vector<const Checkpoint*>& members, const Dataset& data);

/// Iterations of a k-member ensemble around t: t itself, then the k-1 nearest by adjacency.
std::vector<int> ensemble_members(const ImpRun& run, int t, std::size_t k);

}  // namespace lotpool
