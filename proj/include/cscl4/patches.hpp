#pragma once

#include "cscl4/tensor.hpp"

namespace cscl4 {

struct PatchGeometry {
    int channels = 1;
    int height = 0;
    int width = 0;
    int fh = 1;
    int fw = 1;
    int stride = 1;

    int grid_h() const { return (height - fh) / stride + 1; }
    int grid_w() const { return (width - fw) / stride + 1; }
    int count() const { return grid_h() * grid_w(); }
    int dim() const { return channels * fh * fw; }

    // Extraction only needs the support to fit.
    void validate_extract() const;
    // Reassembly also needs every pixel covered.
    void validate_assemble() const;
    bool operator==(const PatchGeometry&) const = default;
};

// Column p = patch at grid position p (row-major grid); within a column,
// channel-major then row-major.
Matrix extract_patches(const Tensor3& t, const PatchGeometry& g);
Matrix extract_patches(const Image2& img, int fh, int fw, int stride);

// Overlaps averaged by per-pixel coverage count.
Tensor3 assemble_patches(const Matrix& patches, const PatchGeometry& g);
Image2 assemble_patches(const Matrix& patches, int height, int width, int fh, int fw, int stride);

} // namespace cscl4
