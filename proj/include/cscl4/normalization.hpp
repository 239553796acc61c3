#pragma once

#include <vector>

#include "cscl4/tensor.hpp"

namespace cscl4 {

enum class IunMode { strict_unit, verbatim };

struct IunParams {
    double epsilon = 1e-6; // (0, 1e-3]
    IunMode mode = IunMode::strict_unit;
};

void validate(const IunParams& p);

// Per-code multipliers; the batch maximum norm is the common reference.
std::vector<double> iun_scalars(const std::vector<Tensor3>& codes, const IunParams& params = {});

std::vector<Tensor3> iun(const std::vector<Tensor3>& codes, const IunParams& params = {});

} // namespace cscl4
