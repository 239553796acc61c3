#pragma once

#include <vector>

#include "cscl4/tensor.hpp"

namespace cscl4 {

enum class BandwidthPolicy { median_heuristic, fixed };

struct KernelParams {
    double bandwidth = 1.0; // squared-distance scale, used when policy is fixed
    BandwidthPolicy policy = BandwidthPolicy::median_heuristic;
};

struct MmdReport {
    double value = 0.0;
    double term_xx = 0.0;
    double term_yy = 0.0;
    double term_xy = 0.0;
    std::vector<double> bandwidths; // one per layer, as used
};

using Batch = std::vector<Vector>;
using LayerStack = std::vector<Batch>; // [layer][sample]

Vector vectorize(const Tensor3& t);

double gauss_kernel(const Vector& a, const Vector& b, double p);

// Median of squared distances over unordered pairs.
double median_bandwidth(const Batch& samples);

MmdReport mmd(const Batch& x, const Batch& y, const KernelParams& params = {});

// Product-over-layers kernel.
MmdReport multilayer_mmd(const LayerStack& x, const LayerStack& y, const std::vector<KernelParams>& params);

// Order-independent sum (sorted accumulation).
double ordered_sum(std::vector<double> v);

} // namespace cscl4
