// SPDX-License-Identifier: Apache-2.0
#include "lotpool/pools.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "json.hpp"

#include "lotpool/errors.hpp"
#include "lotpool/model.hpp"
#include "lotpool/parallel.hpp"
#include "lotpool/pruning.hpp"

namespace lotpool {

std::string to_string(PruneMode m) { return m == PruneMode::during ? "during" : "after"; }

PruneMode prune_mode_from_string(const std::string& s) {
    if (s == "during") return PruneMode::during;
    if (s == "after") return PruneMode::after;
    throw DomainError("unknown prune mode '" + s + "' (expected during or after)");
}

CandidatePool order_candidates(int last_iteration, int t, std::optional<std::size_t> limit, CandidateSet set) {
    if (last_iteration < 0) throw DomainError("run has no checkpoints");
    if (t < 0 || t > last_iteration)
        throw DomainError("target iteration " + std::to_string(t) + " outside [0, " + std::to_string(last_iteration) +
                          "]");
    if (limit && *limit > static_cast<std::size_t>(last_iteration))
        throw DomainError("candidate limit " + std::to_string(*limit) + " exceeds T = " +
                          std::to_string(last_iteration));
    CandidatePool pool;
    pool.target = t;
    for (int i = 0; i <= last_iteration; ++i) {
        if (i == t) continue;
        if (set == CandidateSet::nearest_below && i < t - 1) continue;
        pool.order.push_back(i);
    }
    std::stable_sort(pool.order.begin(), pool.order.end(),
                     [t](int a, int b) { return std::abs(a - t) < std::abs(b - t); });
    if (limit && pool.order.size() > *limit) pool.order.resize(*limit);
    return pool;
}

CandidatePool order_candidates(const ImpRun& run, int t, std::optional<std::size_t> limit, CandidateSet set) {
    return order_candidates(run.last_iteration(), t, limit, set);
}

CoefficientPool::CoefficientPool(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DomainError("coefficient pool is empty");
    std::set<double> seen;
    for (double a : values_) {
        if (!(a > 0.0 && a < 1.0)) throw DomainError("interpolation coefficients must lie in (0,1)");
        if (!seen.insert(a).second) throw DomainError("duplicate interpolation coefficient " + std::to_string(a));
    }
}

CoefficientPool CoefficientPool::standard() {
    return CoefficientPool({0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95});
}

CoefficientPool CoefficientPool::of_size(int count) {
    switch (count) {
        case 1: return CoefficientPool({0.5});
        case 3: return CoefficientPool({0.05, 0.5, 0.95});
        case 7: return CoefficientPool({0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95});
        case 11: return standard();
        default: throw DomainError("no coefficient pool of size " + std::to_string(count) + " (known: 1, 3, 7, 11)");
    }
}

CoefficientPool CoefficientPool::parse(const std::string& csv) {
    std::vector<double> values;
    std::istringstream is(csv);
    std::string part;
    while (std::getline(is, part, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != part.size()) throw DomainError("bad coefficient '" + part + "'");
        values.push_back(v);
    }
    return CoefficientPool(std::move(values));
}

std::string to_json_lines(const std::vector<SearchRecord>& log) {
    std::string out;
    for (const auto& r : log) {
        nlohmann::json j = {{"candidate", r.candidate}, {"alpha", r.alpha},       {"val_before", r.val_before},
                            {"val_after", r.val_after}, {"accepted", r.accepted}, {"density", r.density}};
        out += j.dump() + '\n';
    }
    return out;
}

GreedyResult greedy_interpolate(const ParamSet& start, const Mask& start_mask,
                                const std::vector<const ParamSet*>& candidates,
                                const std::vector<int>& candidate_ids, const CoefficientPool& coeffs,
                                std::size_t keep, PruneMode mode, const Scorer& scorer, int threads) {
    if (candidates.size() != candidate_ids.size()) throw DomainError("candidate ids do not match candidates");
    require_aligned(start, start_mask);
    for (const ParamSet* c : candidates) require_aligned(start, *c);

    GreedyResult best{start, start_mask, scorer(start, &start_mask), {}};
    const auto& alphas = coeffs.values();

    struct Trial {
        ParamSet params;
        Mask mask;
        double score = 0.0;
    };

    for (std::size_t c = 0; c < candidates.size(); ++c) {
        std::vector<Trial> trials(alphas.size());
        auto run_trial = [&](std::size_t k) {
            ParamSet blend = lerp(best.params, *candidates[c], alphas[k]);
            Trial tr;
            if (mode == PruneMode::during) {
                Pruned pr = prune_to_count(blend, keep);
                tr.params = std::move(pr.params);
                tr.mask = std::move(pr.mask);
                tr.score = scorer(tr.params, &tr.mask);
            } else {
                tr.params = std::move(blend);
                tr.score = scorer(tr.params, nullptr);
            }
            return tr;
        };

        // Sequentially only the running winner is held; in parallel every trial has its own slot.
        Trial winner;
        std::size_t win = 0;
        if (threads > 1) {
            parallel_for(alphas.size(), threads, [&](std::size_t k) { trials[k] = run_trial(k); });
            for (std::size_t k = 1; k < alphas.size(); ++k)
                if (trials[k].score > trials[win].score) win = k;
            winner = std::move(trials[win]);
        } else {
            for (std::size_t k = 0; k < alphas.size(); ++k) {
                Trial tr = run_trial(k);
                if (k == 0 || tr.score > winner.score) {
                    winner = std::move(tr);
                    win = k;
                }
            }
        }

        SearchRecord rec;
        rec.candidate = candidate_ids[c];
        rec.alpha = alphas[win];
        rec.val_before = best.score;
        rec.val_after = winner.score;
        rec.accepted = winner.score >= best.score;
        rec.density = mode == PruneMode::during ? winner.mask.density() : density_of(winner.params);
        best.log.push_back(rec);
        if (rec.accepted) {
            best.params = std::move(winner.params);
            if (mode == PruneMode::during) best.mask = std::move(winner.mask);
            best.score = winner.score;
        }
    }

    if (mode == PruneMode::after) {
        bool changed = false;
        for (const auto& r : best.log) changed = changed || r.accepted;
        if (changed) {
            Pruned pr = prune_to_count(best.params, keep);
            best.params = std::move(pr.params);
            best.mask = std::move(pr.mask);
            best.score = scorer(best.params, &best.mask);
        } else {
            best.params = start;
            best.mask = start_mask;
            best.score = scorer(start, &start_mask);
        }
    }
    return best;
}

namespace {

PoolOutcome run_pool(const ImpRun& run, int t, const CoefficientPool& coeffs, const Dataset& valset,
                     const PoolOptions& options, const std::string& method) {
    valset.validate();
    const CandidatePool pool = order_candidates(run, t, options.limit, options.candidates);
    const Checkpoint& target = run.checkpoints[static_cast<std::size_t>(t)];
    std::vector<const ParamSet*> cands;
    for (int i : pool.order) cands.push_back(&run.checkpoints[static_cast<std::size_t>(i)].params);

    const Scorer scorer = [&valset](const ParamSet& p, const Mask* m) { return evaluate(p, m, valset).accuracy; };
    GreedyResult g = greedy_interpolate(target.params, target.mask, cands, pool.order, coeffs, target.mask.kept(),
                                        options.prune_mode, scorer, options.threads);

    PoolOutcome out;
    out.original_val_accuracy = g.log.empty() ? g.score : g.log.front().val_before;
    out.val_accuracy = g.score;
    out.log = std::move(g.log);
    out.result.params = std::move(g.params);
    out.result.mask = std::move(g.mask);
    out.result.meta = target.meta;
    out.result.meta.density = out.result.mask.density();
    out.result.meta.extra["method"] = method;
    out.result.meta.extra["target_iteration"] = std::to_string(t);
    out.result.meta.extra["prune_mode"] = to_string(options.prune_mode);
    out.result.meta.extra["coefficient_count"] = std::to_string(coeffs.size());
    out.result.meta.extra["candidate_count"] = std::to_string(pool.order.size());
    out.result.meta.extra["val_accuracy"] = format_double(out.val_accuracy);
    return out;
}

}  // namespace

PoolOutcome pool_interpolate(const ImpRun& run, int t, const CoefficientPool& coeffs, const Dataset& valset,
                             const PoolOptions& options) {
    return run_pool(run, t, coeffs, valset, options, "pool_interp");
}

PoolOutcome pool_average(const ImpRun& run, int t, const Dataset& valset, const PoolOptions& options) {
    PoolOptions o = options;
    o.prune_mode = PruneMode::during;
    return run_pool(run, t, CoefficientPool({0.5}), valset, o, "pool_avg");
}

PoolOutcome strengthen_dense(const ImpRun& run, const CoefficientPool& coeffs, const Dataset& valset,
                             const PoolOptions& options) {
    if (run.checkpoints.empty() || run.checkpoints.front().mask.kept() != run.checkpoints.front().mask.total())
        throw DomainError("run has no dense checkpoint at t = 0");
    return run_pool(run, 0, coeffs, valset, options, "pool_dense");
}

}  // namespace lotpool
