// SPDX-License-Identifier: Apache-2.0
#include "lotpool/baselines.hpp"

#include "lotpool/errors.hpp"
#include "lotpool/model.hpp"
#include "lotpool/pruning.hpp"

namespace lotpool {

SwaState::SwaState(ParamSet first) : mean_(std::move(first)) {}

void SwaState::absorb(const ParamSet& x) {
    const double n = static_cast<double>(n_);
    mean_ = scale_add(mean_, x, n / (n + 1.0), 1.0 / (n + 1.0));
    ++n_;
}

EmaState::EmaState(ParamSet initial, double decay) : shadow_(std::move(initial)), decay_(decay) {
    if (!(decay > 0.0 && decay < 1.0)) throw DomainError("EMA decay must lie in (0,1)");
}

void EmaState::update(const ParamSet& x) { shadow_ = scale_add(shadow_, x, decay_, 1.0 - decay_); }

namespace {

template <typename Step>
PoolOutcome run_averaging(const ImpRun& run, int t, const Dataset& valset, const AveragingOptions& options,
                          const std::string& method, ParamSet& state, Step&& step) {
    valset.validate();
    const CandidatePool pool = order_candidates(run, t, options.limit, options.candidates);
    const Checkpoint& target = run.checkpoints[static_cast<std::size_t>(t)];
    const std::size_t keep = target.mask.kept();

    PoolOutcome out;
    out.original_val_accuracy = evaluate(target.params, &target.mask, valset).accuracy;
    Mask mask = target.mask;
    double score = out.original_val_accuracy;
    for (int i : pool.order) {
        const double alpha = step(run.checkpoints[static_cast<std::size_t>(i)].params);
        Pruned pr = prune_to_count(state, keep);
        state = std::move(pr.params);
        mask = std::move(pr.mask);
        const double after = evaluate(state, &mask, valset).accuracy;
        out.log.push_back({i, alpha, score, after, true, mask.density()});
        score = after;
    }
    out.val_accuracy = score;
    out.result.params = state;
    out.result.mask = std::move(mask);
    out.result.meta = target.meta;
    out.result.meta.density = out.result.mask.density();
    out.result.meta.extra["method"] = method;
    out.result.meta.extra["target_iteration"] = std::to_string(t);
    out.result.meta.extra["candidate_count"] = std::to_string(pool.order.size());
    out.result.meta.extra["val_accuracy"] = format_double(out.val_accuracy);
    return out;
}

}  // namespace

PoolOutcome swa_pool(const ImpRun& run, int t, const Dataset& valset, const AveragingOptions& options) {
    (void)order_candidates(run, t, options.limit, options.candidates);
    SwaState swa(run.checkpoints[static_cast<std::size_t>(t)].params);
    return run_averaging(run, t, valset, options, "swa", swa.mean(), [&swa](const ParamSet& x) {
        const double n = static_cast<double>(swa.count());
        swa.absorb(x);
        return n / (n + 1.0);
    });
}

PoolOutcome ema_pool(const ImpRun& run, int t, double decay, const Dataset& valset, const AveragingOptions& options) {
    (void)order_candidates(run, t, options.limit, options.candidates);
    EmaState ema(run.checkpoints[static_cast<std::size_t>(t)].params, decay);
    auto out = run_averaging(run, t, valset, options, "ema", ema.shadow(), [&ema](const ParamSet& x) {
        ema.update(x);
        return ema.decay();
    });
    out.result.meta.extra["decay"] = format_double(decay);
    return out;
}

EnsembleResult output_ensemble(const std::vector<const Checkpoint*>& members, const Dataset& data) {
    if (members.empty()) throw DomainError("ensemble needs at least one member");
    data.validate();
    const std::size_t n = data.size();
    std::vector<double> sum;
    std::size_t classes = 0;
    for (const Checkpoint* m : members) {
        const Tensor z = dataset_logits(m->params, &m->mask, data);
        if (sum.empty()) {
            classes = z.shape()[1];
            sum.assign(n * classes, 0.0);
        } else if (z.shape()[1] != classes) {
            throw AlignmentError("ensemble members disagree on the number of classes");
        }
        const auto zd = z.data();
        for (std::size_t i = 0; i < zd.size(); ++i) sum[i] += zd[i];
    }
    const double k = static_cast<double>(members.size());
    std::size_t correct = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = sum.data() + r * classes;
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (row[j] / k > row[best] / k) best = j;
        correct += static_cast<int>(best) == data.labels[r];
    }
    EnsembleResult res;
    res.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    res.members = members.size();
    res.forward_passes_per_sample = members.size();
    res.total_forward_passes = members.size() * n;
    return res;
}

std::vector<int> ensemble_members(const ImpRun& run, int t, std::size_t k) {
    if (k == 0) throw DomainError("ensemble size must be >= 1");
    if (k > run.checkpoints.size())
        throw DomainError("ensemble of " + std::to_string(k) + " members exceeds the run's " +
                          std::to_string(run.checkpoints.size()) + " checkpoints");
    std::vector<int> out{t};
    const CandidatePool pool = order_candidates(run, t, k - 1);
    out.insert(out.end(), pool.order.begin(), pool.order.end());
    return out;
}

}  // namespace lotpool
