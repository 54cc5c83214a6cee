// SPDX-License-Identifier: Apache-2.0
#include "lotpool/analysis.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "lotpool/errors.hpp"
#include "lotpool/model.hpp"
#include "lotpool/parallel.hpp"
#include "lotpool/pruning.hpp"

namespace lotpool {

Heatmap pairwise_heatmap(const ImpRun& run, const Dataset& testset, int threads) {
    testset.validate();
    const std::size_t n = run.checkpoints.size();
    Heatmap h{SquareMatrix(n), SquareMatrix(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) h.densities[i] = run.checkpoints[i].mask.density();

    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) cells.emplace_back(i, j);

    parallel_for(cells.size(), threads, [&](std::size_t c) {
        const auto [i, j] = cells[c];
        const Checkpoint& a = run.checkpoints[i];
        const Checkpoint& b = run.checkpoints[j];
        double acc;
        double density;
        if (i == j) {
            acc = evaluate(a.params, &a.mask, testset).accuracy;
            density = a.mask.density();
        } else {
            const std::size_t keep = std::min(a.mask.kept(), b.mask.kept());
            const Pruned pr = prune_to_count(lerp(a.params, b.params, 0.5), keep);
            acc = evaluate(pr.params, &pr.mask, testset).accuracy;
            density = pr.mask.density();
        }
        h.accuracy.at(i, j) = h.accuracy.at(j, i) = acc;
        h.cell_density.at(i, j) = h.cell_density.at(j, i) = density;
    });
    return h;
}

double adjacent_mean(const SquareMatrix& m) {
    if (m.n < 2) throw DomainError("adjacent mean needs at least two checkpoints");
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < m.n; ++i) sum += m.at(i, i + 1) + m.at(i + 1, i);
    return sum / static_cast<double>(2 * (m.n - 1));
}

std::vector<PathPoint> interpolation_path(const Checkpoint& a, const Checkpoint& b, const Dataset& testset) {
    require_aligned(a.params, b.params);
    testset.validate();
    const std::size_t keep = std::min(a.mask.kept(), b.mask.kept());
    std::vector<PathPoint> rows;
    for (int k = 0; k <= 10; ++k) {
        const double alpha = k / 10.0;
        EvalResult r;
        if (k == 10) {
            r = evaluate(a.params, &a.mask, testset);
        } else if (k == 0) {
            r = evaluate(b.params, &b.mask, testset);
        } else {
            const Pruned pr = prune_to_count(lerp(a.params, b.params, alpha), keep);
            r = evaluate(pr.params, &pr.mask, testset);
        }
        rows.push_back({alpha, r.mean_loss, 1.0 - r.accuracy});
    }
    return rows;
}

SquareMatrix disagreement_matrix(const ImpRun& run, const Dataset& testset, int threads) {
    testset.validate();
    const std::size_t n = run.checkpoints.size();
    std::vector<std::vector<int>> preds(n);
    parallel_for(n, threads, [&](std::size_t i) {
        preds[i] = predict(run.checkpoints[i].params, &run.checkpoints[i].mask, testset);
    });
    SquareMatrix m(n);
    const double total = static_cast<double>(testset.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t differ = 0;
            for (std::size_t s = 0; s < testset.size(); ++s) differ += preds[i][s] != preds[j][s];
            m.at(i, j) = m.at(j, i) = static_cast<double>(differ) / total;
        }
    return m;
}

std::string to_string(AblationMode m) { return m == AblationMode::candidate_count ? "candidate_count" : "coeff_count"; }

AblationMode ablation_mode_from_string(const std::string& s) {
    if (s == "candidate_count") return AblationMode::candidate_count;
    if (s == "coeff_count") return AblationMode::coeff_count;
    throw DomainError("unknown ablation mode '" + s + "' (expected candidate_count or coeff_count)");
}

std::vector<AblationRow> ablate(const ImpRun& run, AblationMode mode, const std::vector<int>& arms,
                                const Dataset& valset, const Dataset& testset, const PoolOptions& base) {
    if (arms.empty()) throw DomainError("ablation needs at least one arm");
    // Validate every arm before doing any work.
    for (int arm : arms) {
        if (mode == AblationMode::coeff_count) {
            (void)CoefficientPool::of_size(arm);
        } else if (arm < 0 || arm > run.last_iteration()) {
            throw DomainError("candidate-count arm " + std::to_string(arm) + " outside [0, T = " +
                              std::to_string(run.last_iteration()) + "]");
        }
    }
    std::vector<AblationRow> rows;
    for (int arm : arms) {
        for (int t = 0; t <= run.last_iteration(); ++t) {
            PoolOptions opts = base;
            PoolOutcome out;
            if (mode == AblationMode::candidate_count) {
                opts.limit = static_cast<std::size_t>(arm);
                out = pool_interpolate(run, t, CoefficientPool::standard(), valset, opts);
            } else {
                out = pool_interpolate(run, t, CoefficientPool::of_size(arm), valset, opts);
            }
            const double test_acc = evaluate(out.result.params, &out.result.mask, testset).accuracy;
            rows.push_back({mode, arm, t, out.result.mask.density(), out.val_accuracy, test_acc, std::move(out.result)});
        }
    }
    return rows;
}

std::vector<MethodRow> compare_methods(const ImpRun& run, const Dataset& valset, const Dataset& testset,
                                       const CoefficientPool& coeffs, double ema_decay, const PoolOptions& options) {
    std::vector<MethodRow> rows;
    AveragingOptions avg{options.limit, options.candidates};
    auto add = [&](int t, const std::string& method, const Checkpoint& ck, double val) {
        rows.push_back({t, ck.mask.density(), method, val, evaluate(ck.params, &ck.mask, testset).accuracy});
    };
    for (int t = 0; t <= run.last_iteration(); ++t) {
        const Checkpoint& orig = run.checkpoints[static_cast<std::size_t>(t)];
        add(t, "original", orig, evaluate(orig.params, &orig.mask, valset).accuracy);
        auto interp = pool_interpolate(run, t, coeffs, valset, options);
        add(t, "pool_interp", interp.result, interp.val_accuracy);
        auto avg_out = pool_average(run, t, valset, options);
        add(t, "pool_avg", avg_out.result, avg_out.val_accuracy);
        auto swa = swa_pool(run, t, valset, avg);
        add(t, "swa", swa.result, swa.val_accuracy);
        auto ema = ema_pool(run, t, ema_decay, valset, avg);
        add(t, "ema", ema.result, ema.val_accuracy);
    }
    return rows;
}

std::vector<AggregateRow> aggregate_seeds(const std::vector<std::vector<MethodRow>>& per_seed) {
    std::map<std::pair<int, std::string>, std::vector<const MethodRow*>> groups;
    std::vector<std::pair<int, std::string>> order;
    for (const auto& seed_rows : per_seed)
        for (const auto& r : seed_rows) {
            auto key = std::make_pair(r.t, r.method);
            if (!groups.count(key)) order.push_back(key);
            groups[key].push_back(&r);
        }
    std::vector<AggregateRow> out;
    for (const auto& key : order) {
        const auto& g = groups[key];
        AggregateRow a;
        a.t = key.first;
        a.method = key.second;
        a.seeds = g.size();
        double sum = 0.0, dsum = 0.0;
        for (const auto* r : g) {
            sum += r->test_acc;
            dsum += r->density;
        }
        a.mean = sum / static_cast<double>(g.size());
        a.density = dsum / static_cast<double>(g.size());
        double var = 0.0;
        for (const auto* r : g) var += (r->test_acc - a.mean) * (r->test_acc - a.mean);
        a.stddev = g.size() > 1 ? std::sqrt(var / static_cast<double>(g.size() - 1)) : 0.0;
        out.push_back(a);
    }
    return out;
}

std::vector<EnsembleRow> ensemble_comparison_at(const ImpRun& run, int t, std::size_t k, const Dataset& valset,
                                                const Dataset& testset, const CoefficientPool& coeffs,
                                                const PoolOptions& options) {
    if (t < 0 || t > run.last_iteration()) throw DomainError("iteration " + std::to_string(t) + " is out of range");
    const Checkpoint& orig = run.checkpoints[static_cast<std::size_t>(t)];
    const double density = orig.mask.density();
    std::vector<EnsembleRow> rows;
    rows.push_back({t, density, "original", 1, 1, evaluate(orig.params, &orig.mask, testset).accuracy});

    std::vector<const Checkpoint*> members;
    for (int i : ensemble_members(run, t, k)) members.push_back(&run.checkpoints[static_cast<std::size_t>(i)]);
    const EnsembleResult ens = output_ensemble(members, testset);
    rows.push_back({t, density, "output_ensemble", ens.members, ens.forward_passes_per_sample, ens.accuracy});

    const PoolOutcome pooled = pool_interpolate(run, t, coeffs, valset, options);
    rows.push_back({t, density, "pool_interp", 1, 1,
                    evaluate(pooled.result.params, &pooled.result.mask, testset).accuracy});
    return rows;
}

std::vector<EnsembleRow> ensemble_comparison(const ImpRun& run, std::size_t k, const Dataset& valset,
                                             const Dataset& testset, const CoefficientPool& coeffs,
                                             const PoolOptions& options) {
    std::vector<EnsembleRow> rows;
    for (int t = 0; t <= run.last_iteration(); ++t) {
        auto part = ensemble_comparison_at(run, t, k, valset, testset, coeffs, options);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.precision(17);
    return out;
}

}  // namespace

void write_heatmap_csv(const Heatmap& h, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "i,j,density_i,density_j,cell_density,accuracy\n";
    for (std::size_t i = 0; i < h.accuracy.n; ++i)
        for (std::size_t j = 0; j < h.accuracy.n; ++j)
            out << i << ',' << j << ',' << h.densities[i] << ',' << h.densities[j] << ',' << h.cell_density.at(i, j)
                << ',' << h.accuracy.at(i, j) << '\n';
}

void write_path_csv(const std::vector<PathPoint>& rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "alpha,loss,error\n";
    for (const auto& r : rows) out << r.alpha << ',' << r.loss << ',' << r.error << '\n';
}

void write_disagreement_csv(const SquareMatrix& m, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "i,j,fraction\n";
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j) out << i << ',' << j << ',' << m.at(i, j) << '\n';
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "mode,arm,t,density,val_acc,test_acc\n";
    for (const auto& r : rows)
        out << to_string(r.mode) << ',' << r.arm << ',' << r.t << ',' << r.density << ',' << r.val_acc << ','
            << r.test_acc << '\n';
}

void write_methods_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "t,density,method,mean_test_acc,std_test_acc,seeds\n";
    for (const auto& r : rows)
        out << r.t << ',' << r.density << ',' << r.method << ',' << r.mean << ',' << r.stddev << ',' << r.seeds << '\n';
}

void write_ensemble_csv(const std::vector<EnsembleRow>& rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "t,density,method,members,forward_passes_per_sample,test_acc\n";
    for (const auto& r : rows)
        out << r.t << ',' << r.density << ',' << r.method << ',' << r.members << ',' << r.forward_passes_per_sample
            << ',' << r.test_acc << '\n';
}

}  // namespace lotpool
