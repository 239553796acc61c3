#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cscl4/metrics.hpp"
#include "cscl4/tensor.hpp"

namespace cscl4 {

struct ModalityMap {
    enum class Kind { identity, gamma, inversion, blur_then_remap };
    Kind kind = Kind::identity;
    double gamma = 1.0;
    double sigma = 0.0;

    // "identity", "gamma:G", "inversion", "blur:SIGMA:G"
    static ModalityMap parse(const std::string& s);
    std::string str() const;
};

struct PhantomSpec {
    int size = 32;
    int n_shapes = 6;
    ModalityMap map;
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;
};

void validate(const PhantomSpec& s);

struct PhantomPair {
    Image2 a;
    Image2 b;
    LabelMask labels; // tertiles of a
};

PhantomPair gen_phantom_pair(const PhantomSpec& spec);

// Applies the modality map without noise or clamping.
Image2 apply_modality_map(const Image2& a, const ModalityMap& m);

// Separable Gaussian, radius round(4 sigma), edge pixels replicated.
Image2 gaussian_blur(const Image2& img, double sigma);

} // namespace cscl4
