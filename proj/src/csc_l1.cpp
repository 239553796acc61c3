#include "cscl4/csc_l1.hpp"

#include <cmath>
#include <random>
#include <string>

#include "cscl4/conv.hpp"
#include "cscl4/error.hpp"
#include "cscl4/linalg.hpp"

namespace cscl4 {

namespace {

void check_shapes(const CscProblem& p, const FilterBank& filters, const std::vector<Tensor3>& codes) {
    if (filters.count != p.K || filters.fh != p.fh || filters.fw != p.fw || filters.channels != 1)
        throw DimensionError("filter bank does not match problem");
    if (codes.size() != p.images.size())
        throw DimensionError("expected " + std::to_string(p.images.size()) + " code maps, got " +
                             std::to_string(codes.size()));
    for (std::size_t i = 0; i < codes.size(); ++i)
        if (codes[i].channels != p.K || codes[i].height != p.images[i].height ||
            codes[i].width != p.images[i].width)
            throw DimensionError("code map " + std::to_string(i) + " has the wrong shape");
}

double smooth_part(const Image2& x, const std::vector<Image2>& filters, const Tensor3& z) {
    double s = 0.0;
    Image2 recon(x.height, x.width);
    for (int k = 0; k < z.channels; ++k) {
        const Image2 c = conv2_same(z.channel(k), filters[k]);
        for (std::size_t i = 0; i < c.size(); ++i) recon.data[i] += c.data[i];
    }
    for (std::size_t i = 0; i < x.size(); ++i) s += (x.data[i] - recon.data[i]) * (x.data[i] - recon.data[i]);
    return 0.5 * s;
}

double l1(const Tensor3& z) {
    double s = 0.0;
    for (double v : z.data) s += std::abs(v);
    return s;
}

std::vector<Image2> unpack(const FilterBank& fb) {
    std::vector<Image2> out;
    for (int k = 0; k < fb.count; ++k) out.push_back(fb.filter(k));
    return out;
}

// Gradient of the smooth part: -adj(x - recon) per channel.
Tensor3 smooth_grad(const Image2& x, const std::vector<Image2>& filters, const Tensor3& z) {
    Image2 res = x;
    for (int k = 0; k < z.channels; ++k) {
        const Image2 c = conv2_same(z.channel(k), filters[k]);
        for (std::size_t i = 0; i < c.size(); ++i) res.data[i] -= c.data[i];
    }
    Tensor3 g(z.channels, z.height, z.width);
    for (int k = 0; k < z.channels; ++k) {
        Image2 a = conv2_same_adjoint(res, filters[k]);
        for (double& v : a.data) v = -v;
        g.set_channel(k, a);
    }
    return g;
}

struct Normal {
    Matrix G;
    Vector h;
    double xx = 0.0;
};

// Normal equations of the filter least squares, filters stacked k-major.
Normal filter_normal(const CscProblem& p, const std::vector<Tensor3>& codes) {
    const int d = p.fh * p.fw;
    const int n = p.K * d;
    const int oh = (p.fh - 1) / 2, ow = (p.fw - 1) / 2;
    Normal ne{Matrix::Zero(n, n), Vector::Zero(n), 0.0};
    Vector phi(n);
    for (std::size_t s = 0; s < p.images.size(); ++s) {
        const Image2& x = p.images[s];
        const Tensor3& z = codes[s];
        for (int r = 0; r < x.height; ++r)
            for (int c = 0; c < x.width; ++c) {
                bool any = false;
                for (int k = 0; k < p.K; ++k)
                    for (int a = 0; a < p.fh; ++a)
                        for (int b = 0; b < p.fw; ++b) {
                            const int zr = r + oh - a, zc = c + ow - b;
                            double v = 0.0;
                            if (zr >= 0 && zr < z.height && zc >= 0 && zc < z.width) v = z(k, zr, zc);
                            phi(k * d + a * p.fw + b) = v;
                            any = any || v != 0.0;
                        }
                ne.xx += x(r, c) * x(r, c);
                if (!any) continue;
                ne.G.selfadjointView<Eigen::Lower>().rankUpdate(phi);
                ne.h += x(r, c) * phi;
            }
    }
    ne.G = ne.G.selfadjointView<Eigen::Lower>();
    return ne;
}

double normal_value(const Normal& ne, const Vector& f) { return 0.5 * (f.dot(ne.G * f) - 2.0 * f.dot(ne.h) + ne.xx); }

void project_unit_ball(Vector& f, int K, int d) {
    for (int k = 0; k < K; ++k) {
        auto seg = f.segment(k * d, d);
        const double n = seg.norm();
        if (n > 1.0) seg /= n;
    }
}

} // namespace

void validate(const CscProblem& p) {
    if (p.images.empty()) throw PreconditionError("CSC problem has no images");
    if (p.K < 1) throw PreconditionError("CSC problem needs K >= 1");
    if (p.fh < 1 || p.fw < 1) throw DimensionError("filter support must be positive");
    if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) throw PreconditionError("lambda must be finite and >= 0");
    for (std::size_t i = 0; i < p.images.size(); ++i) {
        if (p.images[i].height < p.fh || p.images[i].width < p.fw)
            throw DimensionError("image " + std::to_string(i) + " smaller than the filter support");
        require_finite(p.images[i].data, "CSC image");
    }
}

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

Image2 reconstruct(const FilterBank& filters, const Tensor3& codes) {
    if (codes.channels != filters.count || filters.channels != 1)
        throw DimensionError("codes have " + std::to_string(codes.channels) + " channels, bank has " +
                             std::to_string(filters.count) + " filters");
    Image2 out(codes.height, codes.width);
    for (int k = 0; k < filters.count; ++k) {
        const Image2 c = conv2_same(codes.channel(k), filters.filter(k));
        for (std::size_t i = 0; i < c.size(); ++i) out.data[i] += c.data[i];
    }
    return out;
}

double csc_objective(const CscProblem& p, const FilterBank& filters, const std::vector<Tensor3>& codes) {
    check_shapes(p, filters, codes);
    const auto fs = unpack(filters);
    double total = 0.0;
    for (std::size_t s = 0; s < codes.size(); ++s) total += smooth_part(p.images[s], fs, codes[s]) + p.lambda * l1(codes[s]);
    return total;
}

FilterBank init_filters(int K, int fh, int fw, std::uint64_t seed) {
    FilterBank fb(K, fh, fw, 1, false);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int k = 0; k < K; ++k) {
        for (int i = 0; i < fb.dim(); ++i) fb.weights(k, i) = normal(rng);
        fb.weights.row(k).normalize();
    }
    return fb;
}

std::vector<Tensor3> solve_codes_l1(const CscProblem& p, const FilterBank& filters,
                                    const std::vector<Tensor3>& codes0, const CscOptions& opt) {
    validate(p);
    check_shapes(p, filters, codes0);
    const auto fs = unpack(filters);
    std::vector<Tensor3> out = codes0;
    for (std::size_t s = 0; s < out.size(); ++s) {
        const Image2& x = p.images[s];
        Tensor3& z = out[s];
        double f = smooth_part(x, fs, z);
        double obj = f + p.lambda * l1(z);
        double L = 1.0;
        int rises = 0;
        for (int it = 0; it < opt.code_max_iter; ++it) {
            const Tensor3 g = smooth_grad(x, fs, z);
            Tensor3 zn;
            double fn = 0.0;
            for (int bt = 0; bt < 60; ++bt) {
                zn = z;
                const double t = 1.0 / L;
                for (std::size_t i = 0; i < zn.size(); ++i)
                    zn.data[i] = soft_threshold(z.data[i] - t * g.data[i], t * p.lambda);
                fn = smooth_part(x, fs, zn);
                double lin = 0.0, quad = 0.0;
                for (std::size_t i = 0; i < zn.size(); ++i) {
                    const double dlt = zn.data[i] - z.data[i];
                    lin += g.data[i] * dlt;
                    quad += dlt * dlt;
                }
                if (fn <= f + lin + 0.5 * L * quad + 1e-15 * std::max(1.0, f)) break;
                L *= 2.0;
            }
            const double objn = fn + p.lambda * l1(zn);
            if (objn > obj + 1e-6) {
                if (++rises >= 3) throw SolverError("code update diverged on image " + std::to_string(s));
            } else {
                rises = 0;
            }
            const double change = std::abs(obj - objn) / std::max(obj, 1e-300);
            if (objn <= obj) {
                z = std::move(zn);
                f = fn;
                obj = objn;
            }
            L *= 0.8;
            if (change < opt.code_tol) break;
        }
        require_finite(z.data, "code update");
    }
    return out;
}

FilterBank solve_filters(const CscProblem& p, const std::vector<Tensor3>& codes, const FilterBank& filters0,
                         const CscOptions& opt) {
    validate(p);
    check_shapes(p, filters0, codes);
    bool all_zero = true;
    for (const auto& z : codes)
        for (double v : z.data) all_zero = all_zero && v == 0.0;
    if (all_zero) return filters0;

    const int d = p.fh * p.fw;
    const int n = p.K * d;
    const Normal ne = filter_normal(p, codes);
    Vector f0(n);
    for (int k = 0; k < p.K; ++k) f0.segment(k * d, d) = filters0.weights.row(k).transpose();
    const double before = normal_value(ne, f0);

    Matrix A = ne.G;
    A.diagonal().array() += opt.ridge;
    Vector f = A.ldlt().solve(ne.h + opt.ridge * f0);
    if (!f.allFinite()) f = f0;
    project_unit_ball(f, p.K, d);

    if (normal_value(ne, f) > before) {
        // Projected gradient fallback, monotone by construction.
        const double lmax = std::max(sym_eig(ne.G).values.maxCoeff(), 1e-12);
        f = f0;
        double cur = before;
        for (int it = 0; it < 200; ++it) {
            Vector fn = f - (ne.G * f - ne.h) / lmax;
            project_unit_ball(fn, p.K, d);
            const double v = normal_value(ne, fn);
            if (v > cur) break;
            const bool done = cur - v <= 1e-12 * std::max(1.0, cur);
            f = fn;
            cur = v;
            if (done) break;
        }
    }

    FilterBank out = filters0;
    for (int k = 0; k < p.K; ++k) out.weights.row(k) = f.segment(k * d, d).transpose();
    return out;
}

CscSolution solve_csc(const CscProblem& p, const CscOptions& opt) {
    validate(p);
    CscSolution sol;
    sol.filters = init_filters(p.K, p.fh, p.fw, opt.seed);
    for (const auto& x : p.images) sol.codes.emplace_back(p.K, x.height, x.width);
    double prev = csc_objective(p, sol.filters, sol.codes);
    for (int it = 0; it < opt.max_outer; ++it) {
        auto codes = solve_codes_l1(p, sol.filters, sol.codes, opt);
        auto filters = solve_filters(p, codes, sol.filters, opt);
        const double obj = csc_objective(p, filters, codes);
        if (obj > prev) {
            // No descent left at working precision; keep the last iterate.
            sol.converged = true;
            break;
        }
        sol.codes = std::move(codes);
        sol.filters = std::move(filters);
        sol.objective_trace.push_back(obj);
        if (std::abs(prev - obj) <= opt.tol * std::max(std::abs(prev), 1e-300)) {
            sol.converged = true;
            break;
        }
        prev = obj;
    }
    return sol;
}

} // namespace cscl4
