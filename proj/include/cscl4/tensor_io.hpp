#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cscl4/metrics.hpp"
#include "cscl4/tensor.hpp"

namespace cscl4 {

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

constexpr std::uint32_t kTensorFormatVersion = 1;

// "CSL4" | u32 version | u32 rank | u32 dims[rank] | u8 dtype | little-endian payload.
// Leading unit dimensions are not stored (a 1x1x1 tensor has rank 1).
std::vector<std::uint8_t> encode_tensor(const Tensor3& t, Dtype dtype = Dtype::f64);
Tensor3 decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::string& path, const Tensor3& t, Dtype dtype = Dtype::f64);
void write_tensor(const std::string& path, const Image2& img, Dtype dtype = Dtype::f64);
void write_mask(const std::string& path, const LabelMask& m);
Tensor3 read_tensor(const std::string& path);
Image2 read_image(const std::string& path);
LabelMask read_mask(const std::string& path);

} // namespace cscl4
