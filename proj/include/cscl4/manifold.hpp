#pragma once

#include <vector>

#include "cscl4/tensor.hpp"

namespace cscl4 {

enum class DistanceMode { affine_invariant, verbatim };

struct ManifoldParams {
    double ridge = 1e-6;
    DistanceMode mode = DistanceMode::affine_invariant;
    // false: uncentered second moment instead of covariance
    bool center = true;
};

class SpdMatrix {
public:
    // Throws NumericError unless symmetric (1e-10) with min eigenvalue >= 1e-12.
    explicit SpdMatrix(Matrix m);
    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

private:
    Matrix m_;
};

void validate(const ManifoldParams& p);

// Channel covariance over spatial positions plus ridge.
SpdMatrix spd_embed(const Tensor3& code, const ManifoldParams& params = {});

Matrix spd_logm(const SpdMatrix& m);
Matrix spd_sqrt(const SpdMatrix& m);
Matrix spd_invsqrt(const SpdMatrix& m);

double spd_dist(const SpdMatrix& a, const SpdMatrix& b, const ManifoldParams& params = {});

struct DistGrad {
    double value = 0.0;
    Matrix grad_b; // d value / d B (symmetric), zero when value <= 1e-12
};

// Affine-invariant distance and its gradient in the second argument.
DistGrad spd_dist_grad(const SpdMatrix& a, const SpdMatrix& b);

// sum_ij w_ij prod_l d(embed(y_j^l), embed(P^l x_i^l)); empty weights mean all ones.
double manifold_loss(const std::vector<std::vector<Tensor3>>& stack_x, const std::vector<std::vector<Tensor3>>& stack_y,
                     const std::vector<Matrix>& P, const Matrix& weights, const ManifoldParams& params = {});

} // namespace cscl4
