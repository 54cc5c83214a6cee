// SPDX-License-Identifier: Apache-2.0
//
// Lottery pools: greedy, sparsity-preserving weight interpolation of one IMP
// checkpoint with the other checkpoints of the same run.
//
// Starting from best = checkpoint_t, each candidate theta_i (in adjacency
// order) is blended as alpha * best + (1 - alpha) * theta_i for every alpha
// in the coefficient pool and pruned back to the kept-weight count of
// checkpoint_t. The alpha with the highest validation accuracy wins (first
// in pool order on ties) and replaces best when its accuracy is >= the
// incumbent's.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lotpool/data.hpp"
#include "lotpool/imp.hpp"
#include "lotpool/mask.hpp"
#include "lotpool/store.hpp"

namespace lotpool {

enum class PruneMode { during, after };
std::string to_string(PruneMode m);
PruneMode prune_mode_from_string(const std::string& s);

/// Which checkpoints other than t are eligible. `both` uses every other
/// iteration; `nearest_below` keeps only t-1 on the low side plus all of t+1..T.
enum class CandidateSet { both, nearest_below };

/// Iteration indices ordered by |i - t| ascending, lower index first on ties.
struct CandidatePool {
    int target = 0;
    std::vector<int> order;
};

CandidatePool order_candidates(int last_iteration, int t, std::optional<std::size_t> limit = std::nullopt,
                               CandidateSet set = CandidateSet::both);
CandidatePool order_candidates(const ImpRun& run, int t, std::optional<std::size_t> limit = std::nullopt,
                               CandidateSet set = CandidateSet::both);

/// Distinct interpolation coefficients in (0,1), searched in the given order.
class CoefficientPool {
  public:
    explicit CoefficientPool(std::vector<double> values);

    /// {0.05, 0.1, 0.2, ..., 0.9, 0.95}: eleven values.
    static CoefficientPool standard();
    /// Ablation pools of size 1, 3 or 7 ({0.5}, {0.05,0.5,0.95}, {0.05,0.1,0.3,0.5,0.7,0.9,0.95}); 11 is standard().
    static CoefficientPool of_size(int count);
    static CoefficientPool parse(const std::string& csv);

    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }

  private:
    std::vector<double> values_;
};

/// One line of the search log.
struct SearchRecord {
    int candidate = 0;      // IMP iteration of the candidate
    double alpha = 0.0;     // winning coefficient (weight on the incumbent)
    double val_before = 0.0;
    double val_after = 0.0;  // validation score of the winning blend
    bool accepted = false;
    double density = 0.0;    // density of the winning blend
};

/// Search log as line-delimited JSON.
std::string to_json_lines(const std::vector<SearchRecord>& log);

/// Validation score of a parameter set; higher is better. mask may be null.
using Scorer = std::function<double(const ParamSet& params, const Mask* mask)>;

struct GreedyResult {
    ParamSet params;
    Mask mask;
    double score = 0.0;
    std::vector<SearchRecord> log;
};

/// The search engine behind every pooling entry point, independent of how
/// scores are computed. `keep` is the kept-weight count to prune back to.
GreedyResult greedy_interpolate(const ParamSet& start, const Mask& start_mask,
                                const std::vector<const ParamSet*>& candidates,
                                const std::vector<int>& candidate_ids, const CoefficientPool& coeffs,
                                std::size_t keep, PruneMode mode, const Scorer& scorer, int threads = 1);

struct PoolOptions {
    PruneMode prune_mode = PruneMode::during;
    std::optional<std::size_t> limit;
    CandidateSet candidates = CandidateSet::both;
    int threads = 1;
};

struct PoolOutcome {
    Checkpoint result;
    double val_accuracy = 0.0;
    double original_val_accuracy = 0.0;
    std::vector<SearchRecord> log;
};

PoolOutcome pool_interpolate(const ImpRun& run, int t, const CoefficientPool& coeffs, const Dataset& valset,
                             const PoolOptions& options = {});

/// Fixed coefficient 0.5 with pruning inside the loop.
PoolOutcome pool_average(const ImpRun& run, int t, const Dataset& valset, const PoolOptions& options = {});

/// pool_interpolate on the dense checkpoint t = 0; the result stays dense.
PoolOutcome strengthen_dense(const ImpRun& run, const CoefficientPool& coeffs, const Dataset& valset,
                             const PoolOptions& options = {});

}  // namespace lotpool
