#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cscl4/model.hpp"

namespace cscl4 {

constexpr std::uint32_t kCheckpointFormatVersion = 2;

// "CSL4" | u32 version | u32 config length | config text | u32 height | u32 width |
// f64 scale ratio | u8 trained | u32 layers | per layer: u32 channels, height, width,
// fh, fw, stride, then filter_x, filter_y, P each as u32 rows | u32 cols | f64 row-major |
// u32 log entries | 7 f64 per entry | u32 CRC-32 of everything before it.
std::vector<std::uint8_t> encode_checkpoint(const ModelState& state);
ModelState decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ModelState& state);
ModelState load_checkpoint(const std::string& path);

} // namespace cscl4
