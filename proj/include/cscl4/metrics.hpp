#pragma once

#include <cstdint>
#include <vector>

#include "cscl4/tensor.hpp"

namespace cscl4 {

struct LabelMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> labels;

    bool same_shape(const LabelMask& o) const { return height == o.height && width == o.width; }
};

constexpr double kPsnrCap = 99.0;

// Peak 1.0; exact matches report kPsnrCap.
double psnr(const Image2& reference, const Image2& candidate);

struct SsimOptions {
    int window = 8;
    bool overlapping = false; // stride 1 instead of stride = window
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

double ssim(const Image2& reference, const Image2& candidate, const SsimOptions& opt = {});

// Quantile bins: t_k = sorted[ceil(k n / classes) - 1], label = #{k : v > t_k}.
// Ties at a threshold fall into the lower class.
LabelMask segment_threshold(const Image2& image, int n_classes = 3);

struct DiceResult {
    double value = 0.0;
    bool vacuous = false; // class absent from both masks
};

DiceResult dice(const LabelMask& a, const LabelMask& b, int cls);
double dice_macro(const LabelMask& a, const LabelMask& b, int n_classes = 3);

} // namespace cscl4
