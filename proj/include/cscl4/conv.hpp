#pragma once

#include "cscl4/tensor.hpp"

namespace cscl4 {

// True convolution (kernel flipped), valid region: (H-fh+1) x (W-fw+1).
Image2 conv2_valid(const Image2& image, const Image2& filter);

// Cross-correlation, valid region.
Image2 correlate2_valid(const Image2& image, const Image2& filter);

// Zero-padded full convolution: (Ha+Hb-1) x (Wa+Wb-1).
Image2 conv2_full(const Image2& a, const Image2& b);
Image2 conv2_full_fft(const Image2& a, const Image2& b);

// Full convolution cropped to the extent of `z`, offset ((fh-1)/2, (fw-1)/2).
Image2 conv2_same(const Image2& z, const Image2& filter);

// Adjoint of conv2_same with respect to `z`.
Image2 conv2_same_adjoint(const Image2& r, const Image2& filter);

} // namespace cscl4
