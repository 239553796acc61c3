#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cscl4/dataset.hpp"
#include "cscl4/model.hpp"

namespace cscl4 {

struct SampleMetrics {
    int id = -1;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double dice_macro = 0.0;
    double copy_psnr_db = 0.0; // source image used as the synthesized target
    double copy_ssim = 0.0;
};

struct EvalSummary {
    std::vector<SampleMetrics> rows;
    SampleMetrics mean;
};

EvalSummary evaluate(const ModelState& state, const std::vector<PairedSample>& samples);

struct AblationVariant {
    std::string name;
    bool iun = false;
    bool mmd = false;
    bool manifold = false;
};

// CSC alone, each module alone, each pair of modules, and all three.
std::vector<AblationVariant> ablation_variants();
ModelConfig apply_variant(const ModelConfig& base, const AblationVariant& v);

struct AblationRow {
    AblationVariant variant;
    std::vector<double> psnr; // per seed
    std::vector<double> ssim;
    std::vector<double> dice;
    std::vector<double> copy_psnr;
    std::vector<double> copy_ssim;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation, 0 for a single value
};

MeanStd mean_std(const std::vector<double>& v);

using DatasetProvider = std::function<Dataset(std::uint64_t seed)>;
using RunCallback = std::function<void(const AblationVariant&, std::uint64_t seed, const EvalSummary&)>;

// Trains every variant once per seed (config seed = seed) and evaluates on the test pairs.
std::vector<AblationRow> run_ablation(const DatasetProvider& data, const ModelConfig& base,
                                      const std::vector<AblationVariant>& variants,
                                      const std::vector<std::uint64_t>& seeds, const RunCallback& on_run = {});

struct AblationTrend {
    double csc = 0.0;
    double csc_mmd = 0.0;
    double csc_manifold = 0.0;
    double best_single = 0.0;
    double full = 0.0;
    bool mmd_helps = false;      // csc < csc+mmd
    bool manifold_helps = false; // csc < csc+manifold
    bool full_best = false;      // full >= every single-module variant
};

// Mean PSNR ordering over the rows named csc, csc+iun, csc+mmd, csc+manifold, full.
AblationTrend ablation_trend(const std::vector<AblationRow>& rows);

} // namespace cscl4
