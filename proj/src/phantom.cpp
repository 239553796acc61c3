#include "cscl4/phantom.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "cscl4/error.hpp"

namespace cscl4 {

namespace {

double parse_num(const std::string& s, const std::string& whole) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw PreconditionError("invalid modality map '" + whole + "'");
    return v;
}

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

} // namespace

ModalityMap ModalityMap::parse(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(p);
    ModalityMap m;
    if (parts.size() == 1 && parts[0] == "identity") {
        m.kind = Kind::identity;
    } else if (parts.size() == 1 && parts[0] == "inversion") {
        m.kind = Kind::inversion;
    } else if (parts.size() == 2 && parts[0] == "gamma") {
        m.kind = Kind::gamma;
        m.gamma = parse_num(parts[1], s);
    } else if (parts.size() == 3 && (parts[0] == "blur" || parts[0] == "blur_then_remap")) {
        m.kind = Kind::blur_then_remap;
        m.sigma = parse_num(parts[1], s);
        m.gamma = parse_num(parts[2], s);
    } else {
        throw PreconditionError("invalid modality map '" + s + "' (identity, gamma:G, inversion, blur:SIGMA:G)");
    }
    if (!(m.gamma > 0.0)) throw PreconditionError("modality map gamma must be positive");
    if (m.sigma < 0.0) throw PreconditionError("modality map sigma must be >= 0");
    return m;
}

std::string ModalityMap::str() const {
    switch (kind) {
    case Kind::identity: return "identity";
    case Kind::inversion: return "inversion";
    case Kind::gamma: return "gamma:" + num(gamma);
    case Kind::blur_then_remap: return "blur:" + num(sigma) + ":" + num(gamma);
    }
    return {};
}

void validate(const PhantomSpec& s) {
    if (s.size < 16) throw PreconditionError("phantom size must be >= 16");
    if (s.n_shapes < 0) throw PreconditionError("shape count must be >= 0");
    if (!(s.noise_sigma >= 0.0)) throw PreconditionError("noise sigma must be >= 0");
    if (!(s.map.gamma > 0.0)) throw PreconditionError("gamma must be positive");
}

Image2 gaussian_blur(const Image2& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = static_cast<int>(4.0 * sigma + 0.5);
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= sum;
    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    Image2 tmp(img.height, img.width), out(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) s += k[i + radius] * img(r, clampi(c + i, img.width));
            tmp(r, c) = s;
        }
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp(clampi(r + i, img.height), c);
            out(r, c) = s;
        }
    return out;
}

Image2 apply_modality_map(const Image2& a, const ModalityMap& m) {
    Image2 b = a;
    switch (m.kind) {
    case ModalityMap::Kind::identity: break;
    case ModalityMap::Kind::inversion:
        for (double& v : b.data) v = 1.0 - v;
        break;
    case ModalityMap::Kind::gamma:
        for (double& v : b.data) v = std::pow(v, m.gamma);
        break;
    case ModalityMap::Kind::blur_then_remap:
        b = gaussian_blur(a, m.sigma);
        for (double& v : b.data) v = std::pow(std::max(v, 0.0), m.gamma);
        break;
    }
    return b;
}

PhantomPair gen_phantom_pair(const PhantomSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    const int n = spec.size;
    auto coord = [n](int i) { return static_cast<double>(i) / (n - 1) * 2.0 - 1.0; };

    Image2 a(n, n);
    std::vector<bool> head(static_cast<std::size_t>(n) * n);
    const double base = uniform(0.3, 0.5);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const double x = coord(c) / 0.85, y = coord(r) / 0.95;
            head[static_cast<std::size_t>(r) * n + c] = x * x + y * y <= 1.0;
            if (head[static_cast<std::size_t>(r) * n + c]) a(r, c) = base;
        }
    for (int s = 0; s < spec.n_shapes; ++s) {
        const double cx = uniform(-0.5, 0.5), cy = uniform(-0.5, 0.5);
        const double rx = uniform(0.1, 0.4), ry = uniform(0.1, 0.4);
        const double v = uniform(0.2, 1.0);
        const bool ellipse = u01(rng) < 0.5;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                if (!head[static_cast<std::size_t>(r) * n + c]) continue;
                const double dx = (coord(c) - cx) / rx, dy = (coord(r) - cy) / ry;
                const bool inside = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                if (inside) a(r, c) = v;
            }
    }
    const double gx = uniform(-1.0, 1.0), gy = uniform(-1.0, 1.0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = std::clamp(a(r, c) * (1.0 + 0.1 * (coord(c) * gx + coord(r) * gy)), 0.0, 1.0);

    PhantomPair out;
    out.b = apply_modality_map(a, spec.map);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : out.b.data) {
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * normal(rng);
        v = std::clamp(v, 0.0, 1.0);
    }
    out.labels = segment_threshold(a, 3);
    out.a = std::move(a);
    return out;
}

} // namespace cscl4
