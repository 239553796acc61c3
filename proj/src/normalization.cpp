#include "cscl4/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cscl4/error.hpp"

namespace cscl4 {

void validate(const IunParams& p) {
    if (!(p.epsilon > 0.0 && p.epsilon <= 1e-3)) throw PreconditionError("IUN epsilon must lie in (0, 1e-3]");
}

std::vector<double> iun_scalars(const std::vector<Tensor3>& codes, const IunParams& params) {
    validate(params);
    if (codes.empty()) throw PreconditionError("IUN needs at least one code");
    std::vector<double> norms(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        require_finite(codes[i].data, "IUN input");
        norms[i] = norm2(codes[i].data);
        if (norms[i] == 0.0)
            throw DegenerateInputError("code " + std::to_string(i) + " is all zero", static_cast<long>(i));
    }
    const double batch_max = *std::max_element(norms.begin(), norms.end());
    std::vector<double> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const double rel = norms[i] / batch_max; // in (0, 1]
        if (params.mode == IunMode::strict_unit) {
            out[i] = (1.0 / batch_max) * (1.0 / rel);
        } else {
            const double radicand = std::clamp(1.0 - rel * rel, params.epsilon, 1.0);
            out[i] = 1.0 / (batch_max * std::sqrt(radicand));
        }
    }
    return out;
}

std::vector<Tensor3> iun(const std::vector<Tensor3>& codes, const IunParams& params) {
    const auto s = iun_scalars(codes, params);
    std::vector<Tensor3> out = codes;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (double& v : out[i].data) v *= s[i];
    return out;
}

} // namespace cscl4
