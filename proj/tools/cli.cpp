#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cscl4/checkpoint.hpp"
#include "cscl4/dataset.hpp"
#include "cscl4/error.hpp"
#include "cscl4/experiment.hpp"
#include "cscl4/model.hpp"
#include "cscl4/parallel.hpp"
#include "cscl4/phantom.hpp"
#include "cscl4/tensor_io.hpp"

namespace cscl4::cli {

namespace {

namespace fs = std::filesystem;

// Bad flag values found after parsing; reported with exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string hyphenate(std::string s) {
    for (char& c : s)
        if (c == '_') c = '-';
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::array<double, 3> parse_split(const std::string& s) {
    std::array<double, 3> w{};
    std::stringstream ss(s);
    std::string item;
    int n = 0;
    while (std::getline(ss, item, ',')) {
        if (n == 3) throw UsageError("--split: expected three comma-separated weights");
        try {
            std::size_t used = 0;
            w[n] = std::stod(trim(item), &used);
            if (used != trim(item).size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("--split: invalid weight '" + item + "'");
        }
        if (!(w[n] >= 0.0)) throw UsageError("--split: weights must be >= 0");
        ++n;
    }
    if (n != 3) throw UsageError("--split: expected three comma-separated weights");
    const double total = w[0] + w[1] + w[2];
    if (!(total > 0.0)) throw UsageError("--split: weights must not all be zero");
    for (double& v : w) v /= total;
    w[2] = 1.0 - w[0] - w[1];
    return w;
}

// Model flags mirror the configuration keys.
struct ModelFlags {
    std::map<std::string, std::pair<CLI::Option*, std::string>> values;
    bool ablate_iun = false;
    bool ablate_mmd = false;
    bool ablate_manifold = false;

    void attach(CLI::App* sub) {
        for (const auto& [key, def] : config_entries(ModelConfig{})) {
            auto& slot = values[key];
            slot.first = sub->add_option("--" + hyphenate(key), slot.second, "model setting (default " + def + ")");
        }
        sub->add_flag("--ablate-iun", ablate_iun, "disable intra-modal unit normalization");
        sub->add_flag("--ablate-mmd", ablate_mmd, "disable the multilayer MMD loss");
        sub->add_flag("--ablate-manifold", ablate_manifold, "disable the manifold fidelity loss");
    }

    ModelConfig build() const {
        ModelConfig c;
        for (const auto& [key, slot] : values) {
            if (slot.first->count() == 0) continue;
            try {
                apply_config_entry(c, key, slot.second);
            } catch (const Error& e) {
                throw UsageError("--" + hyphenate(key) + ": " + e.what());
            }
        }
        if (ablate_iun) c.use_iun = false;
        if (ablate_mmd) c.mmd_weight = 0.0;
        if (ablate_manifold) c.manifold_weight = 0.0;
        try {
            validate(c);
        } catch (const Error& e) {
            throw UsageError(std::string("invalid model configuration: ") + e.what());
        }
        return c;
    }
};

std::string log_row(int epoch, const LossComponents& l) {
    return fmt::format("{},{},{},{},{},{},{},{}\n", epoch, l.sparsity_x, l.sparsity_y, l.recon_x, l.recon_y, l.mmd,
                       l.manifold, l.combined);
}

std::string metrics_row(const std::string& id, const SampleMetrics& m) {
    return fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", id, m.psnr_db, m.ssim, m.dice_macro,
                       m.copy_psnr_db, m.copy_ssim);
}

const std::vector<PairedSample>& pick_split(const Dataset& ds, const std::string& split) {
    if (split == "test") return ds.test;
    if (split == "val") return ds.val;
    throw UsageError("--split: expected test or val, got '" + split + "'");
}

ModelState load_model(const std::string& path) {
    if (!fs::exists(path)) throw FormatError("checkpoint '" + path + "' does not exist", 0);
    return load_checkpoint(path);
}

} // namespace

std::vector<std::string> config_file_flags(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
            throw UsageError("--config: line " + std::to_string(lineno) + " is not key=value");
        out.push_back("--" + hyphenate(trim(line.substr(0, eq))) + "=" + trim(line.substr(eq + 1)));
    }
    return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cross-modal synthesis with multi-layer convolutional sparse coding and l4 dictionaries", "cscl4"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker thread cap (0 = all cores)");

    std::string config_path;
    auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "key=value settings file"); };

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic phantom dataset directory");
    int n_pairs = 60, size = 32, shapes = 6;
    std::string map_text = "blur:1.0:2.0", split_text = "4,1,1", gen_out;
    double noise = 0.01;
    std::uint64_t gen_seed = 0;
    gen->add_option("--n", n_pairs, "number of phantom pairs")->capture_default_str();
    gen->add_option("--size", size, "image side in pixels (>= 16)")->capture_default_str();
    gen->add_option("--shapes", shapes, "random shapes per phantom")->capture_default_str();
    gen->add_option("--map", map_text, "modality map: identity, gamma:G, inversion, blur:SIGMA:G")
        ->capture_default_str();
    gen->add_option("--noise", noise, "additive Gaussian noise std on modality B")->capture_default_str();
    gen->add_option("--split", split_text, "train,val,test weights (normalized)")->capture_default_str();
    gen->add_option("--seed", gen_seed, "random seed")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->required();
    add_config(gen);

    // train
    auto* tr = app.add_subcommand("train", "train a model on a dataset directory");
    ModelFlags train_flags;
    std::string tr_data, tr_out, tr_log;
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--log", tr_log, "training log CSV (default: <out>.log.csv)");
    train_flags.attach(tr);
    add_config(tr);

    // synthesize
    auto* sy = app.add_subcommand("synthesize", "synthesize target-modality images");
    std::string sy_ckpt, sy_input, sy_data, sy_split = "test", sy_out;
    std::uint64_t unused_seed = 0;
    sy->add_option("--checkpoint", sy_ckpt, "trained checkpoint")->required();
    auto* sy_in_opt = sy->add_option("--input", sy_input, "single source image tensor");
    auto* sy_data_opt = sy->add_option("--data", sy_data, "dataset directory");
    sy_in_opt->excludes(sy_data_opt);
    sy->add_option("--split", sy_split, "test or val, with --data")->capture_default_str();
    sy->add_option("--out", sy_out, "output tensor (with --input) or directory (with --data)")->required();
    sy->add_option("--seed", unused_seed, "accepted for uniformity; synthesis is deterministic");
    add_config(sy);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on aligned pairs");
    std::string ev_ckpt, ev_data, ev_split = "test", ev_out;
    ev->add_option("--checkpoint", ev_ckpt, "trained checkpoint")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--split", ev_split, "test or val")->capture_default_str();
    ev->add_option("--out", ev_out, "metrics CSV (default: stdout)");
    ev->add_option("--seed", unused_seed, "accepted for uniformity; evaluation is deterministic");
    add_config(ev);

    // ablate
    auto* ab = app.add_subcommand("ablate", "module on/off grid over several seeds");
    ModelFlags ablate_flags;
    std::string ab_data, ab_out;
    int ab_seeds = 5;
    ab->add_option("--data", ab_data, "dataset directory")->required();
    ab->add_option("--seeds", ab_seeds, "number of training seeds, starting at --seed")->capture_default_str();
    ab->add_option("--out", ab_out, "ablation CSV (default: stdout)");
    ablate_flags.attach(ab);
    add_config(ab);

    std::vector<std::string> args = raw_args;
    try {
        // Settings from --config are inserted right after the subcommand so later flags win.
        for (std::size_t i = 0; i < args.size(); ++i) {
            std::string path;
            if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
            else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
            else continue;
            std::size_t at = 0;
            while (at < args.size() && !app.get_subcommand_no_throw(args[at])) ++at;
            if (at == args.size()) break;
            const auto extra = config_file_flags(read_text(path));
            args.insert(args.begin() + static_cast<std::ptrdiff_t>(at) + 1, extra.begin(), extra.end());
            break;
        }
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return ok;
        }
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return io;
    }

    try {
        set_max_threads(threads);
        if (gen->parsed()) {
            PhantomSpec spec;
            if (size < 16) throw UsageError("--size: must be >= 16");
            if (shapes < 0) throw UsageError("--shapes: must be >= 0");
            if (!(noise >= 0.0)) throw UsageError("--noise: must be >= 0");
            try {
                spec.map = ModalityMap::parse(map_text);
            } catch (const Error& e) {
                throw UsageError(std::string("--map: ") + e.what());
            }
            spec.size = size;
            spec.n_shapes = shapes;
            spec.noise_sigma = noise;
            spec.seed = gen_seed;
            const auto fractions = parse_split(split_text);
            Dataset ds;
            try {
                ds = generate_dataset(spec, n_pairs, fractions);
            } catch (const PreconditionError& e) {
                throw UsageError(std::string("--n/--split: ") + e.what());
            }
            write_dataset(gen_out, ds);
            out << fmt::format("wrote {} pairs to {}: train_x {}, train_y {}, val {}, test {}\n", n_pairs, gen_out,
                               ds.train_x.size(), ds.train_y.size(), ds.val.size(), ds.test.size());
        } else if (tr->parsed()) {
            const ModelConfig c = train_flags.build();
            const Dataset ds = read_dataset(tr_data);
            std::string log = kTrainLogHeader;
            log += "\n";
            const ModelState st = train(ds.train_x, ds.train_y, c, [&](int epoch, const LossComponents& l) {
                out << fmt::format("epoch {} combined {:.6f} mmd {:.6f} manifold {:.6f}\n", epoch, l.combined, l.mmd,
                                   l.manifold);
            });
            for (std::size_t e = 0; e < st.training_log.size(); ++e)
                log += log_row(static_cast<int>(e + 1), st.training_log[e]);
            save_checkpoint(tr_out, st);
            write_text(tr_log.empty() ? tr_out + ".log.csv" : tr_log, log);
            out << "saved " << tr_out << "\n";
        } else if (sy->parsed()) {
            const ModelState st = load_model(sy_ckpt);
            if (!sy_input.empty()) {
                write_tensor(sy_out, synthesize(read_image(sy_input), st));
                out << "wrote " << sy_out << "\n";
            } else if (!sy_data.empty()) {
                const Dataset ds = read_dataset(sy_data);
                const auto& samples = pick_split(ds, sy_split);
                std::error_code ec;
                fs::create_directories(sy_out, ec);
                if (ec) throw IoError("cannot create directory '" + sy_out + "': " + ec.message());
                for (const auto& s : samples)
                    write_tensor((fs::path(sy_out) / fmt::format("{}_{:05d}_synth.csl4", sy_split, s.id)).string(),
                                 synthesize(s.a, st));
                out << "wrote " << samples.size() << " images to " << sy_out << "\n";
            } else {
                throw UsageError("synthesize needs --input or --data");
            }
        } else if (ev->parsed()) {
            const ModelState st = load_model(ev_ckpt);
            const Dataset ds = read_dataset(ev_data);
            const EvalSummary r = evaluate(st, pick_split(ds, ev_split));
            std::string csv = kMetricsHeader;
            csv += "\n";
            for (const auto& m : r.rows) csv += metrics_row(std::to_string(m.id), m);
            csv += metrics_row("mean", r.mean);
            if (ev_out.empty()) {
                out << csv;
            } else {
                write_text(ev_out, csv);
                out << fmt::format("mean psnr {:.4f} dB, ssim {:.4f}, dice {:.4f} (copy baseline {:.4f} dB, {:.4f})\n",
                                   r.mean.psnr_db, r.mean.ssim, r.mean.dice_macro, r.mean.copy_psnr_db,
                                   r.mean.copy_ssim);
            }
        } else if (ab->parsed()) {
            const ModelConfig base = ablate_flags.build();
            if (ab_seeds < 1) throw UsageError("--seeds: must be >= 1");
            const Dataset ds = read_dataset(ab_data);
            std::vector<std::uint64_t> seeds;
            for (int s = 0; s < ab_seeds; ++s) seeds.push_back(base.seed + static_cast<std::uint64_t>(s));
            const auto rows = run_ablation([&](std::uint64_t) { return ds; }, base, ablation_variants(), seeds,
                                           [&](const AblationVariant& v, std::uint64_t seed, const EvalSummary& r) {
                                               out << fmt::format("{} seed {}: psnr {:.4f}\n", v.name, seed,
                                                                  r.mean.psnr_db);
                                           });
            std::string csv = kAblationHeader;
            csv += "\n";
            for (const auto& r : rows) {
                const MeanStd p = mean_std(r.psnr), s = mean_std(r.ssim), d = mean_std(r.dice);
                csv += fmt::format("{},1,{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.variant.name,
                                   int(r.variant.iun), int(r.variant.mmd), int(r.variant.manifold), p.mean, p.std,
                                   s.mean, s.std, d.mean, d.std);
            }
            if (ab_out.empty()) out << csv;
            else write_text(ab_out, csv);
            const AblationTrend t = ablation_trend(rows);
            auto verdict = [](bool b) { return b ? "PASS" : "FAIL"; };
            out << fmt::format("trend csc < csc+mmd: {} ({:.4f} < {:.4f})\n", verdict(t.mmd_helps), t.csc, t.csc_mmd);
            out << fmt::format("trend csc < csc+manifold: {} ({:.4f} < {:.4f})\n", verdict(t.manifold_helps), t.csc,
                               t.csc_manifold);
            out << fmt::format("trend full >= best single module: {} ({:.4f} >= {:.4f})\n", verdict(t.full_best),
                               t.full, t.best_single);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return io;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return format;
    } catch (const DimensionError& e) {
        err << "format error: " << e.what() << "\n";
        return format;
    } catch (const Error& e) {
        err << "solver error: " << e.what() << "\n";
        return solver;
    }
    return ok;
}

} // namespace cscl4::cli
