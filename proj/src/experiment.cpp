#include "cscl4/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "cscl4/error.hpp"
#include "cscl4/metrics.hpp"
#include "cscl4/parallel.hpp"

namespace cscl4 {

EvalSummary evaluate(const ModelState& state, const std::vector<PairedSample>& samples) {
    if (samples.empty()) throw PreconditionError("no samples to evaluate");
    EvalSummary out;
    out.rows.resize(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        const PairedSample& s = samples[i];
        const Image2 y = synthesize(s.a, state);
        SampleMetrics m;
        m.id = s.id;
        m.psnr_db = psnr(s.b, y);
        m.ssim = ssim(s.b, y);
        m.dice_macro = dice_macro(segment_threshold(y, 3), s.labels, 3);
        m.copy_psnr_db = psnr(s.b, s.a);
        m.copy_ssim = ssim(s.b, s.a);
        out.rows[i] = m;
    });
    const double n = static_cast<double>(samples.size());
    for (const auto& m : out.rows) {
        out.mean.psnr_db += m.psnr_db / n;
        out.mean.ssim += m.ssim / n;
        out.mean.dice_macro += m.dice_macro / n;
        out.mean.copy_psnr_db += m.copy_psnr_db / n;
        out.mean.copy_ssim += m.copy_ssim / n;
    }
    return out;
}

std::vector<AblationVariant> ablation_variants() {
    return {
        {"csc", false, false, false},
        {"csc+iun", true, false, false},
        {"csc+mmd", false, true, false},
        {"csc+manifold", false, false, true},
        {"csc+iun+mmd", true, true, false},
        {"csc+iun+manifold", true, false, true},
        {"csc+mmd+manifold", false, true, true},
        {"full", true, true, true},
    };
}

ModelConfig apply_variant(const ModelConfig& base, const AblationVariant& v) {
    ModelConfig c = base;
    c.use_iun = v.iun;
    if (!v.mmd) c.mmd_weight = 0.0;
    if (!v.manifold) c.manifold_weight = 0.0;
    return c;
}

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd r;
    if (v.empty()) return r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return r;
}

std::vector<AblationRow> run_ablation(const DatasetProvider& data, const ModelConfig& base,
                                      const std::vector<AblationVariant>& variants,
                                      const std::vector<std::uint64_t>& seeds, const RunCallback& on_run) {
    if (variants.empty() || seeds.empty()) throw PreconditionError("ablation needs variants and seeds");
    std::vector<AblationRow> rows(variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v) rows[v].variant = variants[v];
    for (std::uint64_t seed : seeds) {
        const Dataset ds = data(seed);
        std::vector<EvalSummary> results(variants.size());
        parallel_for(variants.size(), [&](std::size_t v) {
            ModelConfig c = apply_variant(base, variants[v]);
            c.seed = seed;
            const ModelState st = train(ds.train_x, ds.train_y, c);
            results[v] = evaluate(st, ds.test);
        });
        for (std::size_t v = 0; v < variants.size(); ++v) {
            const SampleMetrics& m = results[v].mean;
            rows[v].psnr.push_back(m.psnr_db);
            rows[v].ssim.push_back(m.ssim);
            rows[v].dice.push_back(m.dice_macro);
            rows[v].copy_psnr.push_back(m.copy_psnr_db);
            rows[v].copy_ssim.push_back(m.copy_ssim);
            if (on_run) on_run(variants[v], seed, results[v]);
        }
    }
    return rows;
}

AblationTrend ablation_trend(const std::vector<AblationRow>& rows) {
    auto find = [&](const std::string& name) {
        for (const auto& r : rows)
            if (r.variant.name == name) return mean_std(r.psnr).mean;
        throw PreconditionError("ablation is missing the '" + name + "' row");
    };
    AblationTrend t;
    t.csc = find("csc");
    t.csc_mmd = find("csc+mmd");
    t.csc_manifold = find("csc+manifold");
    t.best_single = std::max({find("csc+iun"), t.csc_mmd, t.csc_manifold});
    t.full = find("full");
    t.mmd_helps = t.csc < t.csc_mmd;
    t.manifold_helps = t.csc < t.csc_manifold;
    t.full_best = t.full >= t.best_single;
    return t;
}

} // namespace cscl4
