// SPDX-License-Identifier: Apache-2.0
//
// lotpool: command-line driver for IMP runs, lottery pools, baselines and
// the analysis tables. Progress goes to stdout, results go to files.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lotpool/analysis.hpp"
#include "lotpool/baselines.hpp"
#include "lotpool/config.hpp"
#include "lotpool/data.hpp"
#include "lotpool/errors.hpp"
#include "lotpool/imp.hpp"
#include "lotpool/mask.hpp"
#include "lotpool/model.hpp"
#include "lotpool/parallel.hpp"
#include "lotpool/pools.hpp"
#include "lotpool/store.hpp"

namespace fs = std::filesystem;
using namespace lotpool;

namespace {

struct Globals {
    std::optional<int> threads;
};

struct RunInputs {
    LoadedRun loaded;
    RunData data;

    const ImpRun& run() const { return loaded.run; }
    const Dataset& test() const {
        if (!data.test) throw DomainError("run has no test_data; pass --data to choose an evaluation set");
        return *data.test;
    }
};

RunInputs open_run(const fs::path& dir) {
    RunInputs in;
    in.loaded = load_run(dir);
    in.data = data_for_run(dir);
    return in;
}

std::string pct(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

fs::path default_log_path(const fs::path& out) { return fs::path(out.string() + ".search.jsonl"); }

void report_outcome(const std::string& label, int t, const PoolOutcome& o, const RunInputs& in) {
    std::cout << label << " t=" << t << " density=" << pct(o.result.mask.density())
              << " val original=" << pct(o.original_val_accuracy) << " result=" << pct(o.val_accuracy);
    if (in.data.test) {
        const Checkpoint& orig = in.run().checkpoints[static_cast<std::size_t>(t)];
        std::cout << " | test original=" << pct(evaluate(orig.params, &orig.mask, *in.data.test).accuracy)
                  << " result=" << pct(evaluate(o.result.params, &o.result.mask, *in.data.test).accuracy);
    }
    std::cout << '\n';
}

void save_outcome(PoolOutcome& o, const std::string& method, const fs::path& out, const std::optional<fs::path>& log) {
    o.result.meta.extra["method"] = method;
    save_checkpoint(o.result, out);
    const fs::path log_path = log ? *log : default_log_path(out);
    write_text(log_path, to_json_lines(o.log));
    std::cout << "wrote " << out.string() << " and " << log_path.string() << '\n';
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw DomainError("'" + item + "' is not an integer");
        out.push_back(v);
    }
    if (out.empty()) throw DomainError("empty integer list");
    return out;
}

// Shared flags of the pool subcommands.
struct PoolFlags {
    fs::path run;
    int t = 0;
    std::string coeffs;
    std::optional<std::size_t> limit;
    std::string prune_mode = "during";
    std::string candidates = "both";
    fs::path out;
    std::optional<fs::path> log;
};

CandidateSet candidate_set_from_string(const std::string& s) {
    if (s == "both") return CandidateSet::both;
    if (s == "nearest_below") return CandidateSet::nearest_below;
    throw DomainError("unknown candidate set '" + s + "' (expected both or nearest_below)");
}

PoolOptions pool_options(const PoolFlags& f, const Globals& g) {
    PoolOptions o;
    o.prune_mode = prune_mode_from_string(f.prune_mode);
    o.limit = f.limit;
    o.candidates = candidate_set_from_string(f.candidates);
    o.threads = resolve_threads(g.threads);
    return o;
}

CoefficientPool coefficients(const std::string& csv) {
    return csv.empty() ? CoefficientPool::standard() : CoefficientPool::parse(csv);
}

void add_pool_flags(CLI::App* cmd, PoolFlags& f, bool with_t, bool with_coeffs, bool with_mode) {
    cmd->add_option("--run", f.run, "IMP run directory")->required()->check(CLI::ExistingDirectory);
    if (with_t) cmd->add_option("--t", f.t, "target IMP iteration")->required();
    if (with_coeffs) cmd->add_option("--coeffs", f.coeffs, "comma-separated interpolation coefficients");
    cmd->add_option("--limit", f.limit, "number of nearest candidates to try");
    if (with_mode) cmd->add_option("--prune-mode", f.prune_mode, "during or after")->check(CLI::IsMember({"during", "after"}));
    cmd->add_option("--candidates", f.candidates, "both or nearest_below")
        ->check(CLI::IsMember({"both", "nearest_below"}));
    cmd->add_option("--out", f.out, "output checkpoint")->required();
    cmd->add_option("--log", f.log, "search log (default: <out>.search.jsonl)");
}

void cmd_imp_run(const fs::path& config_file, const fs::path& out_dir) {
    const RunSpec spec = load_run_spec(config_file);
    spec.imp.validate();
    const RunData data = prepare_data(spec);
    std::cout << "imp: " << data.train.size() << " train / " << data.val.size() << " val samples, "
              << spec.imp.iterations << " iterations, p=" << spec.imp.prune_fraction << ", "
              << to_string(spec.imp.rewind_mode) << '\n';
    ImpOptions opts;
    opts.out_dir = out_dir;
    opts.manifest_extra = spec.data_kv();
    opts.dataset_fingerprint = fingerprint(data.full);
    opts.on_round = [](const ImpProgress& p) {
        std::cout << "  t=" << p.iteration << " density=" << pct(p.density);
        if (!std::isnan(p.val_accuracy)) std::cout << " val=" << pct(p.val_accuracy);
        std::cout << std::endl;
    };
    const ImpRun run = run_imp(spec.imp, data.train, &data.val, opts);
    std::cout << "wrote " << run.checkpoints.size() << " checkpoints to " << out_dir.string() << '\n';
}

void cmd_eval(const fs::path& ckpt_path, const std::string& data_spec) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    const Dataset data = load_data_spec(data_spec);
    const EvalResult r = evaluate(ck.params, &ck.mask, data);
    std::cout << "samples=" << data.size() << " density=" << format_double(ck.mask.density())
              << " accuracy=" << format_double(r.accuracy) << " loss=" << format_double(r.mean_loss) << '\n';
}

void cmd_data_glyphs(std::size_t n, std::uint64_t seed, const GlyphOptions& opts, const fs::path& images,
                     const fs::path& labels) {
    const Dataset d = synth_glyphs(n, seed, opts);
    write_idx(d, 28, 28, images, labels);
    std::cout << "wrote " << n << " glyphs to " << images.string() << " / " << labels.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lottery pools: IMP runs, sparse weight interpolation and analysis"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--threads", g.threads, "worker threads (default: $LOTPOOL_THREADS or 1)")
        ->check(CLI::PositiveNumber);

    // imp run
    auto* imp = app.add_subcommand("imp", "iterative magnitude pruning");
    imp->require_subcommand(1);
    auto* imp_run = imp->add_subcommand("run", "train and prune, writing checkpoints and a manifest");
    fs::path imp_config, imp_out;
    imp_run->add_option("--config", imp_config, "key=value run configuration")->required()->check(CLI::ExistingFile);
    imp_run->add_option("--out", imp_out, "output run directory")->required();

    // pool interp|avg|dense
    auto* pool = app.add_subcommand("pool", "lottery pools");
    pool->require_subcommand(1);
    PoolFlags pf;
    auto* pool_interp = pool->add_subcommand("interp", "greedy interpolation over the coefficient pool");
    add_pool_flags(pool_interp, pf, true, true, true);
    auto* pool_avg = pool->add_subcommand("avg", "greedy averaging with coefficient 0.5");
    add_pool_flags(pool_avg, pf, true, false, false);
    auto* pool_dense = pool->add_subcommand("dense", "interpolation on the dense checkpoint t=0");
    add_pool_flags(pool_dense, pf, false, true, false);

    // baseline swa|ema
    auto* baseline = app.add_subcommand("baseline", "weight-averaging baselines");
    baseline->require_subcommand(1);
    fs::path bl_run;
    int bl_t = 0;
    double bl_decay = kDefaultEmaDecay;
    std::optional<fs::path> bl_out, bl_log;
    std::optional<std::size_t> bl_limit;
    auto add_baseline = [&](const char* name, const char* help) {
        auto* c = baseline->add_subcommand(name, help);
        c->add_option("--run", bl_run, "IMP run directory")->required()->check(CLI::ExistingDirectory);
        c->add_option("--t", bl_t, "target IMP iteration")->required();
        c->add_option("--limit", bl_limit, "number of nearest candidates to absorb");
        c->add_option("--out", bl_out, "output checkpoint");
        c->add_option("--log", bl_log, "log (default: <out>.search.jsonl)");
        return c;
    };
    auto* bl_swa = add_baseline("swa", "running mean, pruned to the target density after each step");
    auto* bl_ema = add_baseline("ema", "exponential moving average, pruned after each step");
    bl_ema->add_option("--decay", bl_decay, "EMA decay in (0,1)")->capture_default_str();

    // ensemble eval
    auto* ensemble = app.add_subcommand("ensemble", "output ensembles");
    ensemble->require_subcommand(1);
    auto* ens_eval = ensemble->add_subcommand("eval", "compare a logit ensemble with the original and pooled networks");
    fs::path ens_run;
    std::optional<int> ens_t;
    std::size_t ens_k = 3;
    std::string ens_coeffs;
    std::optional<fs::path> ens_csv;
    ens_eval->add_option("--run", ens_run, "IMP run directory")->required()->check(CLI::ExistingDirectory);
    ens_eval->add_option("--t", ens_t, "target IMP iteration (default: every iteration)");
    ens_eval->add_option("--k", ens_k, "ensemble members")->capture_default_str()->check(CLI::PositiveNumber);
    ens_eval->add_option("--coeffs", ens_coeffs, "coefficients for the pooled comparison");
    ens_eval->add_option("--csv", ens_csv, "output table");

    // analyze heatmap|path|disagreement|ablate|compare
    auto* analyze = app.add_subcommand("analyze", "analysis tables");
    analyze->require_subcommand(1);
    fs::path an_run;
    std::vector<fs::path> an_runs;
    fs::path an_csv;
    std::string an_data;
    int an_a = 0, an_b = 1;
    std::string an_mode = "candidate_count", an_arms, an_coeffs;
    double an_decay = kDefaultEmaDecay;
    auto add_analysis = [&](const char* name, const char* help) {
        auto* c = analyze->add_subcommand(name, help);
        c->add_option("--run", an_run, "IMP run directory")->required()->check(CLI::ExistingDirectory);
        c->add_option("--csv", an_csv, "output table")->required();
        c->add_option("--data", an_data, "evaluation set (default: the run's test split)");
        return c;
    };
    auto* an_heatmap = add_analysis("heatmap", "pairwise midpoint accuracy, pruned to the sparser parent");
    auto* an_path = add_analysis("path", "loss and error along the segment between two checkpoints");
    an_path->add_option("--a", an_a, "first iteration (alpha = 1 end)")->required();
    an_path->add_option("--b", an_b, "second iteration (alpha = 0 end)")->required();
    auto* an_dis = add_analysis("disagreement", "pairwise prediction disagreement");
    auto* an_ablate = add_analysis("ablate", "candidate-count or coefficient-count ablation over every iteration");
    an_ablate->add_option("--mode", an_mode, "candidate_count or coeff_count")
        ->check(CLI::IsMember({"candidate_count", "coeff_count"}));
    an_ablate->add_option("--arms", an_arms, "comma-separated arm values")->required();
    auto* an_compare = analyze->add_subcommand("compare", "per-iteration method comparison, mean and std across runs");
    an_compare->add_option("--run", an_runs, "IMP run directory, once per seed")->required()->check(CLI::ExistingDirectory);
    an_compare->add_option("--csv", an_csv, "output table")->required();
    an_compare->add_option("--coeffs", an_coeffs, "interpolation coefficients");
    an_compare->add_option("--decay", an_decay, "EMA decay")->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "accuracy and loss of a checkpoint");
    fs::path ev_ckpt;
    std::string ev_data;
    eval->add_option("--ckpt", ev_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", ev_data, "data spec, e.g. idx:IMAGES,LABELS or run:DIR:val")->required();

    // data glyphs
    auto* data = app.add_subcommand("data", "dataset utilities");
    data->require_subcommand(1);
    auto* glyphs = data->add_subcommand("glyphs", "write a synthetic 28x28 glyph set as IDX files");
    std::size_t gl_n = 0;
    std::uint64_t gl_seed = 0;
    GlyphOptions gl_opts;
    fs::path gl_images, gl_labels;
    glyphs->add_option("--n", gl_n, "sample count")->required()->check(CLI::PositiveNumber);
    glyphs->add_option("--seed", gl_seed, "sample seed")->required();
    glyphs->add_option("--jitter", gl_opts.jitter_px)->capture_default_str();
    glyphs->add_option("--noise", gl_opts.pixel_noise)->capture_default_str();
    glyphs->add_option("--shift", gl_opts.max_shift_px)->capture_default_str();
    glyphs->add_option("--distractors", gl_opts.distractors)->capture_default_str();
    glyphs->add_option("--images", gl_images, "output image file")->required();
    glyphs->add_option("--labels", gl_labels, "output label file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (imp_run->parsed()) {
            cmd_imp_run(imp_config, imp_out);
        } else if (pool_interp->parsed() || pool_avg->parsed() || pool_dense->parsed()) {
            const RunInputs in = open_run(pf.run);
            const PoolOptions opts = pool_options(pf, g);
            PoolOutcome o;
            std::string method;
            int t = pf.t;
            if (pool_interp->parsed()) {
                o = pool_interpolate(in.run(), t, coefficients(pf.coeffs), in.data.val, opts);
                method = "pool_interp";
            } else if (pool_avg->parsed()) {
                o = pool_average(in.run(), t, in.data.val, opts);
                method = "pool_avg";
            } else {
                t = 0;
                o = strengthen_dense(in.run(), coefficients(pf.coeffs), in.data.val, opts);
                method = "pool_dense";
            }
            report_outcome(method, t, o, in);
            save_outcome(o, method, pf.out, pf.log);
        } else if (bl_swa->parsed() || bl_ema->parsed()) {
            const RunInputs in = open_run(bl_run);
            AveragingOptions opts{bl_limit, CandidateSet::both};
            const bool swa = bl_swa->parsed();
            PoolOutcome o = swa ? swa_pool(in.run(), bl_t, in.data.val, opts)
                                : ema_pool(in.run(), bl_t, bl_decay, in.data.val, opts);
            report_outcome(swa ? "swa" : "ema", bl_t, o, in);
            if (bl_out) save_outcome(o, swa ? "swa" : "ema", *bl_out, bl_log);
        } else if (ens_eval->parsed()) {
            const RunInputs in = open_run(ens_run);
            PoolOptions opts;
            opts.threads = resolve_threads(g.threads);
            const CoefficientPool coeffs = coefficients(ens_coeffs);
            const auto rows = ens_t ? ensemble_comparison_at(in.run(), *ens_t, ens_k, in.data.val, in.test(), coeffs, opts)
                                    : ensemble_comparison(in.run(), ens_k, in.data.val, in.test(), coeffs, opts);
            for (const auto& r : rows)
                std::cout << "t=" << r.t << " " << r.method << " members=" << r.members
                          << " passes/sample=" << r.forward_passes_per_sample << " test=" << pct(r.test_acc) << '\n';
            if (ens_csv) {
                write_ensemble_csv(rows, *ens_csv);
                std::cout << "wrote " << ens_csv->string() << '\n';
            }
        } else if (an_compare->parsed()) {
            PoolOptions opts;
            opts.threads = resolve_threads(g.threads);
            std::vector<std::vector<MethodRow>> per_seed;
            for (const auto& dir : an_runs) {
                std::cout << "comparing methods on " << dir.string() << std::endl;
                const RunInputs in = open_run(dir);
                per_seed.push_back(
                    compare_methods(in.run(), in.data.val, in.test(), coefficients(an_coeffs), an_decay, opts));
            }
            write_methods_csv(aggregate_seeds(per_seed), an_csv);
            std::cout << "wrote " << an_csv.string() << '\n';
        } else if (analyze->parsed()) {
            const RunInputs in = open_run(an_run);
            const int threads = resolve_threads(g.threads);
            const Dataset eval_set = an_data.empty() ? in.test() : load_data_spec(an_data);
            if (an_heatmap->parsed()) {
                const Heatmap h = pairwise_heatmap(in.run(), eval_set, threads);
                write_heatmap_csv(h, an_csv);
                std::cout << "adjacent mean accuracy " << pct(adjacent_mean(h.accuracy)) << '\n';
            } else if (an_path->parsed()) {
                const int last = in.run().last_iteration();
                if (an_a < 0 || an_a > last || an_b < 0 || an_b > last) throw DomainError("--a/--b out of range");
                const auto rows = interpolation_path(in.run().checkpoints[static_cast<std::size_t>(an_a)],
                                                     in.run().checkpoints[static_cast<std::size_t>(an_b)], eval_set);
                write_path_csv(rows, an_csv);
            } else if (an_dis->parsed()) {
                write_disagreement_csv(disagreement_matrix(in.run(), eval_set, threads), an_csv);
            } else if (an_ablate->parsed()) {
                PoolOptions opts;
                opts.threads = threads;
                const auto rows =
                    ablate(in.run(), ablation_mode_from_string(an_mode), parse_int_list(an_arms), in.data.val, eval_set, opts);
                for (const auto& r : rows)
                    std::cout << "arm=" << r.arm << " t=" << r.t << " val=" << pct(r.val_acc) << " test=" << pct(r.test_acc)
                              << '\n';
                write_ablation_csv(rows, an_csv);
            }
            std::cout << "wrote " << an_csv.string() << '\n';
        } else if (eval->parsed()) {
            cmd_eval(ev_ckpt, ev_data);
        } else if (glyphs->parsed()) {
            cmd_data_glyphs(gl_n, gl_seed, gl_opts, gl_images, gl_labels);
        }
    } catch (const std::exception& e) {
        std::cerr << "lotpool: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
