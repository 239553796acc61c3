#pragma once

#include <array>
#include <cstdint>

#include "cscl4/dataset.hpp"
#include "cscl4/phantom.hpp"

namespace tasks {

// Gamma(2) after Gaussian blur, 32x32, 60 pairs: 40 training pairs made unpaired
// (20 per side), 10 validation, 10 test.
inline cscl4::Dataset synthesis_task(std::uint64_t seed) {
    cscl4::PhantomSpec spec;
    spec.size = 32;
    spec.n_shapes = 6;
    spec.map = cscl4::ModalityMap::parse("blur:1.0:2.0");
    spec.noise_sigma = 0.01;
    spec.seed = seed;
    return cscl4::generate_dataset(spec, 60, {4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0});
}

} // namespace tasks
