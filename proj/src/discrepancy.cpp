#include "cscl4/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cscl4/error.hpp"

namespace cscl4 {

namespace {

double sq_dist(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw DimensionError("code lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    return (a - b).squaredNorm();
}

double resolve_bandwidth(const Batch& x, const Batch& y, const KernelParams& params) {
    if (params.policy == BandwidthPolicy::fixed) {
        if (!(params.bandwidth > 0.0) || !std::isfinite(params.bandwidth))
            throw PreconditionError("kernel bandwidth must be positive");
        return params.bandwidth;
    }
    Batch pooled = x;
    pooled.insert(pooled.end(), y.begin(), y.end());
    return median_bandwidth(pooled);
}

void check_batch(const Batch& b, const char* what) {
    if (b.empty()) throw DimensionError(std::string(what) + " batch is empty");
    for (const auto& v : b)
        if (v.size() != b.front().size()) throw DimensionError(std::string(what) + " batch has ragged samples");
}

} // namespace

Vector vectorize(const Tensor3& t) { return Eigen::Map<const Vector>(t.data.data(), static_cast<Eigen::Index>(t.size())); }

double gauss_kernel(const Vector& a, const Vector& b, double p) {
    if (!(p > 0.0)) throw PreconditionError("kernel bandwidth must be positive");
    return std::exp(-sq_dist(a, b) / p);
}

double ordered_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double median_bandwidth(const Batch& samples) {
    if (samples.size() < 2) throw PreconditionError("median bandwidth needs at least 2 samples");
    std::vector<double> d;
    d.reserve(samples.size() * (samples.size() - 1) / 2);
    for (std::size_t i = 0; i < samples.size(); ++i)
        for (std::size_t j = i + 1; j < samples.size(); ++j) d.push_back(sq_dist(samples[i], samples[j]));
    std::sort(d.begin(), d.end());
    if (d.back() == 0.0) throw DegenerateInputError("all samples are identical");
    const std::size_t n = d.size();
    const double med = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    if (!(med > 0.0)) throw DegenerateInputError("median squared distance is zero");
    return med;
}

MmdReport mmd(const Batch& x, const Batch& y, const KernelParams& params) {
    return multilayer_mmd(LayerStack{x}, LayerStack{y}, {params});
}

MmdReport multilayer_mmd(const LayerStack& x, const LayerStack& y, const std::vector<KernelParams>& params) {
    if (x.size() != y.size() || x.size() != params.size())
        throw DimensionError("layer counts differ: " + std::to_string(x.size()) + ", " + std::to_string(y.size()) +
                             ", " + std::to_string(params.size()));
    if (x.empty()) throw DimensionError("no layers");
    const std::size_t S = x.front().size(), T = y.front().size();
    MmdReport rep;
    for (std::size_t l = 0; l < x.size(); ++l) {
        check_batch(x[l], "source");
        check_batch(y[l], "target");
        if (x[l].size() != S || y[l].size() != T) throw DimensionError("batch size varies across layers");
        rep.bandwidths.push_back(resolve_bandwidth(x[l], y[l], params[l]));
    }
    auto k = [&](const LayerStack& a, std::size_t i, const LayerStack& b, std::size_t j) {
        double v = 1.0;
        for (std::size_t l = 0; l < a.size(); ++l) v *= gauss_kernel(a[l][i], b[l][j], rep.bandwidths[l]);
        return v;
    };
    std::vector<double> vals;
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < S; ++j) vals.push_back(k(x, i, x, j));
    rep.term_xx = ordered_sum(std::move(vals)) / static_cast<double>(S * S);
    vals.clear();
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = 0; j < T; ++j) vals.push_back(k(y, i, y, j));
    rep.term_yy = ordered_sum(std::move(vals)) / static_cast<double>(T * T);
    vals.clear();
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < T; ++j) vals.push_back(k(x, i, y, j));
    rep.term_xy = ordered_sum(std::move(vals)) / static_cast<double>(S * T);
    rep.value = rep.term_xx + rep.term_yy - 2.0 * rep.term_xy;
    return rep;
}

} // namespace cscl4
