#pragma once

#include <vector>

#include "cscl4/manifold.hpp"
#include "cscl4/model.hpp"

namespace cscl4::detail {

// P-independent statistics of one layer's batch codes.
struct LayerBlocks {
    int S = 0;
    int T = 0;
    int K = 0;
    std::vector<Matrix> Gxx; // X_a X_b^T at a*S+b
    std::vector<Matrix> Hxy; // X_a Y_b^T at a*T+b
    std::vector<double> ny;  // ||Y_b||^2
    Matrix dyy;              // ||Y_a - Y_b||^2
    std::vector<Matrix> Cx;  // source moments, no ridge
    std::vector<SpdMatrix> Cy;
};

LayerBlocks make_blocks(const std::vector<Tensor3>& zx, const std::vector<Tensor3>& zy,
                        const ManifoldParams* manifold);

// Squared distances ||P X_a - P X_b||^2 and ||P X_a - Y_b||^2.
void pair_distances(const LayerBlocks& b, const Matrix& P, Matrix& dxx, Matrix& dxy);

// Median over pooled unordered pairs of {P X_a} and {Y_b}.
double pooled_median(const Matrix& dxx, const Matrix& dxy, const Matrix& dyy);

struct AdaptTerms {
    double ls = 0.0; // weighted residual over weighted target energy
    double mmd = 0.0;
    double manifold = 0.0;
};

// Unweighted terms and, when grads is non-null, the gradient of
// ls_weight*ls + mmd_weight*mmd + manifold_weight*manifold for each layer.
AdaptTerms adaptation_objective(const std::vector<const LayerBlocks*>& blocks, const std::vector<Matrix>& P,
                                const Matrix& weights, const ModelConfig& c, std::vector<Matrix>* grads);

} // namespace cscl4::detail
