// SPDX-License-Identifier: Apache-2.0
//
// Experiment drivers that turn an IMP run into result tables, plus their CSV
// writers. Heatmaps, paths and disagreement use the test split; anything that
// searches (ablations, pools) uses the validation split.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lotpool/baselines.hpp"
#include "lotpool/data.hpp"
#include "lotpool/imp.hpp"
#include "lotpool/pools.hpp"

namespace lotpool {

struct SquareMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    explicit SquareMatrix(std::size_t size = 0) : n(size), values(size * size, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

struct Heatmap {
    SquareMatrix accuracy;
    SquareMatrix cell_density;
    std::vector<double> densities;  // per checkpoint
};

/// cell(i,j): accuracy of the midpoint of checkpoints i and j pruned to the
/// sparser parent's kept count. The diagonal is each checkpoint as-is.
Heatmap pairwise_heatmap(const ImpRun& run, const Dataset& testset, int threads = 1);

/// Mean of the cells with |i - j| == 1.
double adjacent_mean(const SquareMatrix& m);

struct PathPoint {
    double alpha = 0.0;
    double loss = 0.0;
    double error = 0.0;
};

/// alpha = 0.0, 0.1, ..., 1.0 along alpha * a + (1 - alpha) * b. Interior
/// points are pruned to the sparser endpoint; endpoints are evaluated as-is.
std::vector<PathPoint> interpolation_path(const Checkpoint& a, const Checkpoint& b, const Dataset& testset);

/// Fraction of test samples on which the argmax predictions of i and j differ.
SquareMatrix disagreement_matrix(const ImpRun& run, const Dataset& testset, int threads = 1);

enum class AblationMode { candidate_count, coeff_count };
std::string to_string(AblationMode m);
AblationMode ablation_mode_from_string(const std::string& s);

struct AblationRow {
    AblationMode mode;
    int arm = 0;
    int t = 0;
    double density = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    Checkpoint result;
};

/// candidate_count: pool_interpolate with the standard coefficients and limit = arm.
/// coeff_count: pool_interpolate over every candidate with CoefficientPool::of_size(arm).
std::vector<AblationRow> ablate(const ImpRun& run, AblationMode mode, const std::vector<int>& arms,
                                const Dataset& valset, const Dataset& testset, const PoolOptions& base = {});

/// Per-iteration test accuracy of the original checkpoints and each comparison method.
struct MethodRow {
    int t = 0;
    double density = 0.0;
    std::string method;
    double val_acc = 0.0;
    double test_acc = 0.0;
};

std::vector<MethodRow> compare_methods(const ImpRun& run, const Dataset& valset, const Dataset& testset,
                                       const CoefficientPool& coeffs, double ema_decay = kDefaultEmaDecay,
                                       const PoolOptions& options = {});

/// Mean and sample standard deviation of MethodRow::test_acc across seeds, grouped by (t, method).
struct AggregateRow {
    int t = 0;
    double density = 0.0;
    std::string method;
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t seeds = 0;
};

std::vector<AggregateRow> aggregate_seeds(const std::vector<std::vector<MethodRow>>& per_seed);

/// Output-ensemble comparison: original checkpoint, k-member logit ensemble
/// and pooled network per iteration, with their inference cost.
struct EnsembleRow {
    int t = 0;
    double density = 0.0;
    std::string method;
    std::size_t members = 1;
    std::size_t forward_passes_per_sample = 1;
    double test_acc = 0.0;
};

std::vector<EnsembleRow> ensemble_comparison(const ImpRun& run, std::size_t k, const Dataset& valset,
                                             const Dataset& testset, const CoefficientPool& coeffs,
                                             const PoolOptions& options = {});

/// The three rows of ensemble_comparison for a single iteration.
std::vector<EnsembleRow> ensemble_comparison_at(const ImpRun& run, int t, std::size_t k, const Dataset& valset,
                                                const Dataset& testset, const CoefficientPool& coeffs,
                                                const PoolOptions& options = {});

void write_heatmap_csv(const Heatmap& h, const std::filesystem::path& path);
void write_path_csv(const std::vector<PathPoint>& path_rows, const std::filesystem::path& path);
void write_disagreement_csv(const SquareMatrix& m, const std::filesystem::path& path);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);
void write_methods_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);
void write_ensemble_csv(const std::vector<EnsembleRow>& rows, const std::filesystem::path& path);

}  // namespace lotpool
