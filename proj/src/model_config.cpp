#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <sstream>

#include "cscl4/error.hpp"
#include "cscl4/model.hpp"

namespace cscl4 {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out))
        throw PreconditionError("invalid number for " + key + ": '" + v + "'");
    return out;
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw PreconditionError("invalid integer for " + key + ": '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw PreconditionError("invalid unsigned integer for " + key + ": '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw PreconditionError("invalid boolean for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

bool ModelConfig::operator==(const ModelConfig& o) const { return config_to_text(*this) == config_to_text(o); }

std::vector<LayerSpec> parse_layers(const std::string& s) {
    std::vector<LayerSpec> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        LayerSpec l;
        // KxFHxFW[sS][rR]
        int consumed = 0;
        if (std::sscanf(item.c_str(), "%dx%dx%d%n", &l.filters, &l.fh, &l.fw, &consumed) != 3)
            throw PreconditionError("invalid layer spec '" + item + "' (expected KxFHxFW[sS][rR])");
        std::string rest = item.substr(static_cast<std::size_t>(consumed));
        while (!rest.empty()) {
            const char tag = rest[0];
            std::size_t n = 1;
            while (n < rest.size() && std::isdigit(static_cast<unsigned char>(rest[n]))) ++n;
            if (n == 1 || (tag != 's' && tag != 'r'))
                throw PreconditionError("invalid layer spec '" + item + "' (expected KxFHxFW[sS][rR])");
            const int v = static_cast<int>(parse_int("layers", rest.substr(1, n - 1)));
            (tag == 's' ? l.stride : l.repeat) = v;
            rest = rest.substr(n);
        }
        out.push_back(l);
    }
    if (out.empty()) throw PreconditionError("no layers given");
    return out;
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
    std::string out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (i) out += ',';
        out += std::to_string(l.filters) + "x" + std::to_string(l.fh) + "x" + std::to_string(l.fw) + "s" +
               std::to_string(l.stride);
        if (l.repeat != 1) out += "r" + std::to_string(l.repeat);
    }
    return out;
}

std::map<std::string, std::string> config_entries(const ModelConfig& c) {
    std::map<std::string, std::string> m;
    m["layers"] = format_layers(c.layers);
    m["lambda"] = fmt_double(c.lambda);
    m["mmd_weight"] = fmt_double(c.mmd_weight);
    m["manifold_weight"] = fmt_double(c.manifold_weight);
    m["ls_weight"] = fmt_double(c.ls_weight);
    m["epochs"] = std::to_string(c.epochs);
    m["batch_size"] = std::to_string(c.batch_size);
    m["seed"] = std::to_string(c.seed);
    m["iun"] = c.use_iun ? "true" : "false";
    m["iun_mode"] = c.iun.mode == IunMode::strict_unit ? "strict_unit" : "verbatim";
    m["iun_epsilon"] = fmt_double(c.iun.epsilon);
    m["bandwidth"] = c.kernel.policy == BandwidthPolicy::median_heuristic ? "median" : fmt_double(c.kernel.bandwidth);
    m["manifold_ridge"] = fmt_double(c.manifold.ridge);
    m["distance"] = c.manifold.mode == DistanceMode::affine_invariant ? "affine_invariant" : "verbatim";
    m["manifold_center"] = c.manifold.center ? "true" : "false";
    m["correspondence"] = c.correspondence == Correspondence::soft_kernel ? "soft_kernel" : "fixed_pairs";
    m["adapt_top"] = std::to_string(c.adapt_top);
    m["msp_iters"] = std::to_string(c.msp_iters);
    m["p_steps"] = std::to_string(c.p_steps);
    m["learning_rate"] = fmt_double(c.learning_rate);
    m["ridge"] = fmt_double(c.ridge);
    return m;
}

std::string config_to_text(const ModelConfig& c) {
    std::string out;
    for (const auto& [k, v] : config_entries(c)) out += k + "=" + v + "\n";
    return out;
}

void apply_config_entry(ModelConfig& c, const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "layers") c.layers = parse_layers(v);
    else if (key == "lambda") c.lambda = parse_double(key, v);
    else if (key == "mmd_weight") c.mmd_weight = parse_double(key, v);
    else if (key == "manifold_weight") c.manifold_weight = parse_double(key, v);
    else if (key == "ls_weight") c.ls_weight = parse_double(key, v);
    else if (key == "epochs") c.epochs = static_cast<int>(parse_int(key, v));
    else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(key, v));
    else if (key == "seed") c.seed = parse_u64(key, v);
    else if (key == "iun") c.use_iun = parse_bool(key, v);
    else if (key == "iun_mode") {
        if (v == "strict_unit") c.iun.mode = IunMode::strict_unit;
        else if (v == "verbatim") c.iun.mode = IunMode::verbatim;
        else throw PreconditionError("invalid iun_mode '" + v + "'");
    } else if (key == "iun_epsilon") c.iun.epsilon = parse_double(key, v);
    else if (key == "bandwidth") {
        if (v == "median") {
            c.kernel.policy = BandwidthPolicy::median_heuristic;
            c.kernel.bandwidth = 1.0;
        } else {
            c.kernel.policy = BandwidthPolicy::fixed;
            c.kernel.bandwidth = parse_double(key, v);
        }
    } else if (key == "manifold_ridge") c.manifold.ridge = parse_double(key, v);
    else if (key == "distance") {
        if (v == "affine_invariant") c.manifold.mode = DistanceMode::affine_invariant;
        else if (v == "verbatim") c.manifold.mode = DistanceMode::verbatim;
        else throw PreconditionError("invalid distance '" + v + "'");
    } else if (key == "manifold_center") c.manifold.center = parse_bool(key, v);
    else if (key == "correspondence") {
        if (v == "soft_kernel") c.correspondence = Correspondence::soft_kernel;
        else if (v == "fixed_pairs") c.correspondence = Correspondence::fixed_pairs;
        else throw PreconditionError("invalid correspondence '" + v + "'");
    } else if (key == "adapt_top") c.adapt_top = static_cast<int>(parse_int(key, v));
    else if (key == "msp_iters") c.msp_iters = static_cast<int>(parse_int(key, v));
    else if (key == "p_steps") c.p_steps = static_cast<int>(parse_int(key, v));
    else if (key == "learning_rate") c.learning_rate = parse_double(key, v);
    else if (key == "ridge") c.ridge = parse_double(key, v);
    else throw PreconditionError("unknown configuration key '" + key + "'");
}

ModelConfig config_from_text(const std::string& text) {
    ModelConfig c;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw PreconditionError("expected key=value, got '" + line + "'");
        apply_config_entry(c, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return c;
}

std::vector<LayerSpec> expand_layers(const std::vector<LayerSpec>& layers) {
    std::vector<LayerSpec> out;
    for (const auto& l : layers)
        for (int r = 0; r < l.repeat; ++r) {
            LayerSpec one = l;
            one.repeat = 1;
            out.push_back(one);
        }
    return out;
}

void validate(const ModelConfig& c) {
    if (c.layers.empty()) throw PreconditionError("model needs at least one layer");
    for (const auto& l : c.layers)
        if (l.filters < 1 || l.fh < 1 || l.fw < 1 || l.stride < 1 || l.repeat < 1)
            throw PreconditionError("layer spec fields must be positive");
    for (double w : {c.lambda, c.mmd_weight, c.manifold_weight, c.ls_weight, c.ridge})
        if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("weights must be finite and >= 0");
    if (c.epochs < 1) throw PreconditionError("epochs must be >= 1");
    if (c.batch_size < 1) throw PreconditionError("batch_size must be >= 1");
    if (c.msp_iters < 1) throw PreconditionError("msp_iters must be >= 1");
    if (c.p_steps < 0) throw PreconditionError("p_steps must be >= 0");
    if (!(c.learning_rate > 0.0)) throw PreconditionError("learning_rate must be positive");
    if (c.adapt_top < 1) throw PreconditionError("adapt_top must be >= 1");
    validate(c.iun);
    validate(c.manifold);
    if (c.kernel.policy == BandwidthPolicy::fixed && !(c.kernel.bandwidth > 0.0))
        throw PreconditionError("fixed bandwidth must be positive");
}

std::vector<PatchGeometry> layer_geometries(const ModelConfig& c, int height, int width) {
    std::vector<PatchGeometry> out;
    int ch = 1, h = height, w = width;
    for (const auto& l : expand_layers(c.layers)) {
        PatchGeometry g{ch, h, w, l.fh, l.fw, l.stride};
        g.validate_assemble();
        if (l.filters > g.dim())
            throw DimensionError("layer with " + std::to_string(l.filters) + " filters exceeds patch dimension " +
                                 std::to_string(g.dim()));
        out.push_back(g);
        ch = l.filters;
        h = g.grid_h();
        w = g.grid_w();
    }
    return out;
}

} // namespace cscl4
