// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: prints one PASS/FAIL line per criterion and exits 0 only
// when every criterion passes. Optional argv[1] names a directory that
// receives the result tables; otherwise they go to a temporary directory.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lotpool/analysis.hpp"
#include "lotpool/baselines.hpp"
#include "lotpool/errors.hpp"
#include "lotpool/imp.hpp"
#include "lotpool/model.hpp"
#include "lotpool/pools.hpp"
#include "lotpool/pruning.hpp"
#include "lotpool/store.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace lotpool;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void report(int id, const std::string& name, const Verdict& v) {
    std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++g_failures;
}

void run_criterion(int id, const std::string& name, const std::function<Verdict()>& body) {
    try {
        report(id, name, body());
    } catch (const std::exception& e) {
        report(id, name, {false, std::string("exception: ") + e.what()});
    }
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---- fixture ----------------------------------------------------------

constexpr int kSeeds = 3;
constexpr int kIterations = 10;

struct Fixture {
    Dataset train;
    Dataset val;
    Dataset test;
    std::vector<ImpRun> rewind;   // per seed
    std::vector<ImpRun> at_init;  // per seed
    double first_run_seconds = 0.0;
    double runs_seconds = 0.0;
};

ImpConfig fixture_config(int seed, RewindMode mode) {
    ImpConfig c;
    c.model = {{784, 64, 32, 10}, 100 + static_cast<std::uint64_t>(seed)};
    c.train.epochs = 12;
    c.train.batch_size = 32;
    c.train.base_lr = 0.15;
    c.train.lr_drop_epochs = {6, 9};
    c.train.momentum = 0.9;
    c.train.weight_decay = 1e-4;
    c.train.rewind_epoch = 2;
    c.train.shuffle_seed = 7 + static_cast<std::uint64_t>(seed);
    c.iterations = kIterations;
    c.prune_fraction = 0.2;
    c.rewind_mode = mode;
    return c;
}

Fixture build_fixture(const fs::path& dir) {
    Fixture f;
    write_idx(synth_glyphs(5000, 11), 28, 28, dir / "train-images.idx", dir / "train-labels.idx");
    write_idx(synth_glyphs(2000, 12), 28, 28, dir / "test-images.idx", dir / "test-labels.idx");
    const Dataset full = load_idx(dir / "train-images.idx", dir / "train-labels.idx", 10);
    f.test = load_idx(dir / "test-images.idx", dir / "test-labels.idx", 10);
    std::tie(f.train, f.val) = split(full, 0.15, 3);

    const auto t0 = Clock::now();
    for (int s = 0; s < kSeeds; ++s) {
        const auto ts = Clock::now();
        f.rewind.push_back(run_imp(fixture_config(s, RewindMode::to_epoch), f.train, &f.val));
        if (s == 0) f.first_run_seconds = seconds_since(ts);
        f.at_init.push_back(run_imp(fixture_config(s, RewindMode::to_init), f.train, &f.val));
        std::printf("  fixture seed %d trained (%.1fs elapsed)\n", s, seconds_since(t0));
        std::fflush(stdout);
    }
    f.runs_seconds = seconds_since(t0);
    return f;
}

// ---- criteria without the fixture ------------------------------------

Batch random_batch(Rng& rng, std::size_t n, std::size_t d, int classes) {
    Batch b{Tensor({n, d}), {}};
    for (auto& v : b.inputs.data()) v = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
    return b;
}

Verdict gradient_check() {
    const auto t0 = Clock::now();
    Rng rng(501);
    const ParamSet p = oracle::random_mlp_params(rng, {3, 4, 2});
    const Batch b = random_batch(rng, 8, 3, 2);
    const LossAndGrads lg = loss_and_grads(p, nullptr, b);
    const oracle::GradCheck check = oracle::check_gradients(p, b, lg.grads);
    const double secs = seconds_since(t0);
    const bool ok = check.max_relative_error < 1e-3 && check.checked > 0 && secs < 1.0;
    std::ostringstream os;
    os << "max rel err " << check.max_relative_error << " over " << check.checked << " scalars (" << check.skipped
       << " skipped at ReLU kinks), " << fmt("%.3fs", secs);
    return {ok, os.str()};
}

Verdict pruning_oracle() {
    const auto t0 = Clock::now();
    Rng rng(502);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Shape> shapes;
        const std::size_t layers = 1 + rng.below(4);
        for (std::size_t l = 0; l < layers; ++l) {
            shapes.push_back({1 + rng.below(50), 1 + rng.below(50)});
            shapes.push_back({1 + rng.below(8)});
        }
        ParamSet p = oracle::random_params(rng, shapes);
        // Force some magnitude ties.
        for (std::size_t e = 0; e < p.num_entries(); ++e)
            for (auto& v : p[e].tensor.data())
                if (rng.below(5) == 0) v = rng.below(2) ? 0.5f : -0.5f;
        double d = 0.0;
        do d = 0.01 + 0.98 * rng.uniform();
        while (kept_count_for_density(d, p.weight_count()) == 0);
        const Pruned r = prune_to_density(p, d);
        const auto want = oracle::keep_largest(p, kept_count_for_density(d, p.weight_count()));
        if (oracle::flat_bits(r.mask) != want || r.params != oracle::zero_outside(p, want)) ++mismatches;
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 5.0,
            std::to_string(mismatches) + "/100 kept sets differ from the full sort, " + fmt("%.2fs", secs)};
}

Verdict greedy_oracle() {
    Rng rng(509);
    const CoefficientPool coeffs = CoefficientPool::standard();
    int mismatches = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto g = oracle::random_greedy_instance(rng, 2);
        const auto [consistent, best] = oracle::enumerate_greedy(g, coeffs.values());
        std::vector<const ParamSet*> cands{&g.candidates[0], &g.candidates[1]};
        const Scorer score = [&g](const ParamSet& p, const Mask* m) {
            if (!m) return oracle::distance_score(g.target, p, nullptr);
            const auto bits = oracle::flat_bits(*m);
            return oracle::distance_score(g.target, p, &bits);
        };
        const GreedyResult r =
            greedy_interpolate(g.start, g.start_mask, cands, {1, 2}, coeffs, g.keep, PruneMode::during, score);
        bool same = consistent.size() == 1 && r.params == consistent[0].params &&
                    oracle::flat_bits(r.mask) == consistent[0].bits && r.log.size() == 2;
        for (std::size_t c = 0; same && c < 2; ++c)
            same = r.log[c].alpha == coeffs.values()[consistent[0].alpha_index[c]] &&
                   r.log[c].accepted == consistent[0].accepted[c];
        if (!same) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + "/50 instances differ from exhaustive enumeration"};
}

Verdict swa_mean() {
    Rng rng(510);
    std::vector<ParamSet> sets;
    for (int i = 0; i < 5; ++i) sets.push_back(oracle::random_mlp_params(rng, {20, 16, 8, 4}, 3.0));
    SwaState swa(sets[0]);
    for (std::size_t i = 1; i < sets.size(); ++i) swa.absorb(sets[i]);
    double worst = 0.0;
    for (std::size_t e = 0; e < sets[0].num_entries(); ++e)
        for (std::size_t k = 0; k < sets[0][e].tensor.size(); ++k) {
            double mean = 0.0;
            for (const auto& s : sets) mean += s[e].tensor[k];
            mean /= static_cast<double>(sets.size());
            worst = std::max(worst, std::fabs(mean - swa.mean()[e].tensor[k]));
        }
    return {worst < 1e-5 && swa.count() == 5, "max abs diff vs batch mean " + fmt("%.3g", worst)};
}

Verdict serialization() {
    Rng rng(511);
    int roundtrip_failures = 0, undetected = 0, crc_misclassified = 0;
    for (int i = 0; i < 100; ++i) {
        const Checkpoint ck = oracle::random_checkpoint(rng);
        const auto bytes = encode_checkpoint(ck);
        const Checkpoint back = decode_checkpoint(bytes);
        if (!(back == ck) || encode_checkpoint(back) != bytes) ++roundtrip_failures;

        auto flipped = bytes;
        flipped[rng.below(flipped.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
        try {
            decode_checkpoint(flipped);
            ++undetected;
        } catch (const CorruptionError&) {
        } catch (const FormatError&) {
        }

        auto crc = bytes;
        crc[crc.size() - 1 - rng.below(4)] ^= 0x80;
        try {
            decode_checkpoint(crc);
            ++crc_misclassified;
        } catch (const CorruptionError&) {
        } catch (const std::exception&) {
            ++crc_misclassified;
        }
    }
    const bool ok = roundtrip_failures == 0 && undetected == 0 && crc_misclassified == 0;
    return {ok, std::to_string(roundtrip_failures) + " round-trip failures, " + std::to_string(undetected) +
                    " undetected random flips, " + std::to_string(crc_misclassified) +
                    " checksum flips not reported as corruption"};
}

// ---- fixture criteria ------------------------------------------------

Verdict density_schedule(const Fixture& f) {
    std::ostringstream os;
    double worst = 0.0;
    for (const ImpRun& run : f.rewind) {
        if (run.last_iteration() != kIterations) return {false, "wrong number of checkpoints"};
        const double total = static_cast<double>(run.checkpoints[0].mask.total());
        for (int t = 0; t <= kIterations; ++t) {
            const double want = std::pow(0.8, t) * total;
            worst = std::max(worst, std::fabs(static_cast<double>(run.checkpoints[static_cast<std::size_t>(t)].mask.kept()) - want));
        }
    }
    os << "max |kept - 0.8^t N| = " << fmt("%.3f", worst) << " weights (N = " << f.rewind[0].checkpoints[0].mask.total()
       << "), first run " << fmt("%.1fs", f.first_run_seconds);
    return {worst <= 1.0 && f.first_run_seconds < 300.0, os.str()};
}

struct PoolTable {
    std::vector<std::vector<PoolOutcome>> per_seed;  // [seed][t]
};

PoolTable pool_all(const Fixture& f) {
    PoolTable p;
    for (const ImpRun& run : f.rewind) {
        std::vector<PoolOutcome> row;
        for (int t = 0; t <= run.last_iteration(); ++t)
            row.push_back(pool_interpolate(run, t, CoefficientPool::standard(), f.val));
        p.per_seed.push_back(std::move(row));
    }
    return p;
}

Verdict greedy_monotonicity(const Fixture& f, const PoolTable& pools) {
    int violations = 0, checked = 0;
    for (std::size_t s = 0; s < pools.per_seed.size(); ++s)
        for (std::size_t t = 0; t < pools.per_seed[s].size(); ++t) {
            const auto& ck = f.rewind[s].checkpoints[t];
            const double original = evaluate(ck.params, &ck.mask, f.val).accuracy;
            if (pools.per_seed[s][t].val_accuracy < original) ++violations;
            ++checked;
        }
    return {violations == 0, std::to_string(violations) + "/" + std::to_string(checked) +
                                 " (seed, t) pairs lose validation accuracy"};
}

Verdict reductions(const Fixture& f) {
    const ImpRun& run = f.rewind[0];
    const CoefficientPool half({0.5});
    const auto ablation = ablate(run, AblationMode::coeff_count, {1}, f.val, f.test);
    int pool_diffs = 0, arm_diffs = 0;
    for (int t = 0; t <= run.last_iteration(); ++t) {
        const PoolOutcome avg = pool_average(run, t, f.val);
        const PoolOutcome interp = pool_interpolate(run, t, half, f.val);
        if (!(interp.result.params == avg.result.params && interp.result.mask == avg.result.mask)) ++pool_diffs;
        const auto& row = ablation[static_cast<std::size_t>(t)];
        if (row.t != t || !(row.result.params == avg.result.params && row.result.mask == avg.result.mask)) ++arm_diffs;
    }
    return {pool_diffs == 0 && arm_diffs == 0 && ablation.size() == run.checkpoints.size(),
            "interp{0.5} differs at " + std::to_string(pool_diffs) + " levels, arm 1 differs at " +
                std::to_string(arm_diffs) + " levels"};
}

void require_pools(const PoolTable& pools) {
    if (pools.per_seed.size() != kSeeds) throw std::runtime_error("pooled outputs unavailable");
}

Verdict sparsity_preservation(const Fixture& f, const PoolTable& pools) {
    require_pools(pools);
    const ImpRun& run = f.rewind[0];
    std::size_t worst = 0;
    int checked = 0;
    auto check = [&](const Checkpoint& out, std::size_t target) {
        const std::size_t kept = out.mask.kept();
        const std::size_t diff = kept > target ? kept - target : target - kept;
        worst = std::max(worst, diff);
        if (!(apply_mask(out.params, out.mask) == out.params)) worst = std::max<std::size_t>(worst, 2);
        ++checked;
    };
    for (std::size_t s = 0; s < pools.per_seed.size(); ++s)
        for (std::size_t t = 0; t < pools.per_seed[s].size(); ++t)
            check(pools.per_seed[s][t].result, f.rewind[s].checkpoints[t].mask.kept());
    for (int t = 0; t <= run.last_iteration(); ++t) {
        const std::size_t target = run.checkpoints[static_cast<std::size_t>(t)].mask.kept();
        check(swa_pool(run, t, f.val).result, target);
        check(ema_pool(run, t, kDefaultEmaDecay, f.val).result, target);
        check(pool_average(run, t, f.val).result, target);
    }
    check(strengthen_dense(run, CoefficientPool::standard(), f.val).result, run.checkpoints[0].mask.total());
    return {worst <= 1, std::to_string(checked) + " outputs, max kept-count deviation " + std::to_string(worst)};
}

Verdict heatmap_contrast(const Fixture& f, const fs::path& out) {
    const auto t0 = Clock::now();
    std::ostringstream os;
    double diff_sum = 0.0;
    for (int s = 0; s < kSeeds; ++s) {
        const Heatmap a = pairwise_heatmap(f.rewind[static_cast<std::size_t>(s)], f.test);
        const Heatmap b = pairwise_heatmap(f.at_init[static_cast<std::size_t>(s)], f.test);
        if (s == 0) {
            write_heatmap_csv(a, out / "heatmap_rewind.csv");
            write_heatmap_csv(b, out / "heatmap_init.csv");
        }
        const double ra = adjacent_mean(a.accuracy), rb = adjacent_mean(b.accuracy);
        diff_sum += ra - rb;
        os << "seed " << s << ": rewind " << fmt("%.4f", ra) << " vs init " << fmt("%.4f", rb) << "; ";
    }
    const double secs = f.runs_seconds + seconds_since(t0);
    const double mean = diff_sum / kSeeds;
    os << "mean gap " << fmt("%+.4f", mean) << ", " << fmt("%.0fs", secs) << " with training";
    return {mean > 0.0 && secs < 900.0, os.str()};
}

Verdict pool_gain(const Fixture& f, const PoolTable& pools) {
    require_pools(pools);
    const std::size_t levels = pools.per_seed[0].size();
    std::vector<double> mean_gap(levels, 0.0);
    std::ostringstream os;
    for (std::size_t s = 0; s < pools.per_seed.size(); ++s) {
        double seed_gain = 0.0;
        int seed_ge = 0;
        for (std::size_t t = 0; t < levels; ++t) {
            const auto& ck = f.rewind[s].checkpoints[t];
            const auto& out = pools.per_seed[s][t].result;
            const double gap = evaluate(out.params, &out.mask, f.test).accuracy -
                               evaluate(ck.params, &ck.mask, f.test).accuracy;
            mean_gap[t] += gap / static_cast<double>(pools.per_seed.size());
            seed_gain += gap;
            seed_ge += gap >= 0.0;
        }
        os << "seed " << s << ": " << fmt("%+.4f", seed_gain / static_cast<double>(levels)) << " (" << seed_ge << "/"
           << levels << "); ";
    }
    double mean = 0.0;
    std::size_t ge = 0;
    for (double g : mean_gap) {
        mean += g / static_cast<double>(levels);
        ge += g >= 0.0;
    }
    os << "seed-mean gain " << fmt("%+.4f", mean) << ", pool >= original at " << ge << "/" << levels << " levels";
    return {mean > 0.0 && static_cast<double>(ge) >= 0.7 * static_cast<double>(levels), os.str()};
}

Verdict ensemble_table(const Fixture& f, const fs::path& out) {
    const auto rows = ensemble_comparison(f.rewind[0], 3, f.val, f.test, CoefficientPool::standard());
    write_ensemble_csv(rows, out / "ensemble.csv");
    int bad = 0, ensembles = 0;
    for (const auto& r : rows) {
        if (r.method == "output_ensemble") {
            ++ensembles;
            if (r.members != 3 || r.forward_passes_per_sample != 3) ++bad;
        } else if (r.members != 1 || r.forward_passes_per_sample != 1) {
            ++bad;
        }
    }
    std::printf("  t  density   method           k  passes  test_acc\n");
    for (const auto& r : rows)
        std::printf("  %-2d %-9.4f %-16s %-2zu %-7zu %.4f\n", r.t, r.density, r.method.c_str(), r.members,
                    r.forward_passes_per_sample, r.test_acc);
    const bool ok = bad == 0 && ensembles == kIterations + 1 && rows.size() == 3u * (kIterations + 1);
    return {ok, std::to_string(rows.size()) + " rows, " + std::to_string(ensembles) +
                    " ensemble rows with k=3 and 3 passes/sample, " + std::to_string(bad) + " malformed"};
}

}  // namespace

int main(int argc, char** argv) {
    test::TempDir tmp;
    const fs::path out = argc > 1 ? fs::path(argv[1]) : tmp.path();
    fs::create_directories(out);

    run_criterion(1, "gradient check", gradient_check);
    run_criterion(2, "pruning vs full sort", pruning_oracle);
    run_criterion(9, "greedy vs exhaustive", greedy_oracle);
    run_criterion(10, "SWA running mean", swa_mean);
    run_criterion(11, "checkpoint serialization", serialization);

    std::printf("  building fixture: %d seeds x {rewind, init}, T=%d\n", kSeeds, kIterations);
    std::fflush(stdout);
    Fixture f;
    try {
        f = build_fixture(tmp.path());
    } catch (const std::exception& e) {
        for (int id : {3, 4, 5, 6, 7, 8, 12}) report(id, "fixture", {false, std::string("fixture failed: ") + e.what()});
        std::printf("%d criteria failed\n", g_failures);
        return 1;
    }
    PoolTable pools;
    run_criterion(3, "IMP density schedule", [&] { return density_schedule(f); });
    run_criterion(4, "greedy monotonicity", [&] {
        pools = pool_all(f);
        return greedy_monotonicity(f, pools);
    });
    run_criterion(5, "reductions to averaging", [&] { return reductions(f); });
    run_criterion(6, "sparsity preservation", [&] { return sparsity_preservation(f, pools); });
    run_criterion(7, "rewind vs init heatmap", [&] { return heatmap_contrast(f, out); });
    run_criterion(8, "pool gain over original", [&] { return pool_gain(f, pools); });
    run_criterion(12, "output-ensemble table", [&] { return ensemble_table(f, out); });

    if (g_failures == 0) std::printf("all 12 criteria passed\n");
    else std::printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
