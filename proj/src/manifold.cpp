#include "cscl4/manifold.hpp"

#include <cmath>
#include <string>

#include "cscl4/error.hpp"
#include "cscl4/linalg.hpp"

namespace cscl4 {

namespace {

constexpr double kMinEig = 1e-12;

SymEig checked_eig(const Matrix& m) {
    SymEig e = sym_eig(m);
    if (e.values(0) < kMinEig)
        throw NumericError("eigenvalue " + std::to_string(e.values(0)) + " below 1e-12; increase the ridge");
    return e;
}

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

} // namespace

SpdMatrix::SpdMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1) throw DimensionError("SPD matrix must be square and non-empty");
    if (!m_.allFinite()) throw NumericError("SPD matrix has non-finite entries");
    if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw NumericError("matrix is not symmetric");
    const SymEig e = sym_eig(m_);
    if (e.values(0) < kMinEig)
        throw NumericError("matrix is not positive definite (min eigenvalue " + std::to_string(e.values(0)) + ")");
}

void validate(const ManifoldParams& p) {
    if (!(p.ridge > 0.0) || !std::isfinite(p.ridge)) throw PreconditionError("manifold ridge must be positive");
}

SpdMatrix spd_embed(const Tensor3& code, const ManifoldParams& params) {
    validate(params);
    if (code.size() == 0) throw DimensionError("empty code");
    const auto n = static_cast<Eigen::Index>(code.plane());
    if (n < 2) throw DegenerateInputError("covariance needs more than one spatial position");
    Matrix X = code.as_matrix();
    if (params.center) X.colwise() -= X.rowwise().mean();
    Matrix C = sym(X * X.transpose() / static_cast<double>(n));
    C.diagonal().array() += params.ridge;
    return SpdMatrix(std::move(C));
}

Matrix spd_logm(const SpdMatrix& m) {
    return sym_apply(checked_eig(m.matrix()), [](double v) { return std::log(v); });
}

Matrix spd_sqrt(const SpdMatrix& m) {
    return sym_apply(checked_eig(m.matrix()), [](double v) { return std::sqrt(v); });
}

Matrix spd_invsqrt(const SpdMatrix& m) {
    return sym_apply(checked_eig(m.matrix()), [](double v) { return 1.0 / std::sqrt(v); });
}

double spd_dist(const SpdMatrix& a, const SpdMatrix& b, const ManifoldParams& params) {
    if (a.dim() != b.dim())
        throw DimensionError("SPD dims differ: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    if (params.mode == DistanceMode::affine_invariant) return spd_dist_grad(a, b).value;
    // Printed form: ||L^{-1/2} B L^{-1/2}|| with L = log(A), |eigenvalues| used for the root.
    const SymEig e = sym_eig(spd_logm(a));
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
        if (std::abs(e.values(i)) < kMinEig) throw NumericError("log of target is singular in verbatim mode");
    const Matrix r = sym_apply(e, [](double v) { return 1.0 / std::sqrt(std::abs(v)); });
    return (r * b.matrix() * r).norm();
}

DistGrad spd_dist_grad(const SpdMatrix& a, const SpdMatrix& b) {
    if (a.dim() != b.dim()) throw DimensionError("SPD dims differ");
    const Matrix ais = spd_invsqrt(a);
    const SymEig e = checked_eig(sym(ais * b.matrix() * ais));
    double d2 = 0.0;
    for (Eigen::Index i = 0; i < e.values.size(); ++i) d2 += std::log(e.values(i)) * std::log(e.values(i));
    DistGrad out;
    out.value = std::sqrt(d2);
    if (out.value <= 1e-12) {
        out.grad_b = Matrix::Zero(a.dim(), a.dim());
        return out;
    }
    // d(D^2)/dB = 2 A^{-1/2} M^{-1} log(M) A^{-1/2}
    const Matrix g = sym_apply(e, [](double v) { return 2.0 * std::log(v) / v; });
    out.grad_b = sym(ais * g * ais) / (2.0 * out.value);
    return out;
}

double manifold_loss(const std::vector<std::vector<Tensor3>>& stack_x, const std::vector<std::vector<Tensor3>>& stack_y,
                     const std::vector<Matrix>& P, const Matrix& weights, const ManifoldParams& params) {
    const std::size_t L = stack_x.size();
    if (stack_y.size() != L || P.size() != L) throw DimensionError("layer counts differ");
    if (L == 0) throw DimensionError("no layers");
    const std::size_t S = stack_x[0].size(), T = stack_y[0].size();
    if (S == 0 || T == 0) throw DimensionError("empty batch");
    if (weights.size() != 0 && (weights.rows() != static_cast<Eigen::Index>(S) || weights.cols() != static_cast<Eigen::Index>(T)))
        throw DimensionError("pair weights must be S x T");
    std::vector<std::vector<SpdMatrix>> ex(L), ey(L);
    for (std::size_t l = 0; l < L; ++l) {
        if (stack_x[l].size() != S || stack_y[l].size() != T) throw DimensionError("batch size varies across layers");
        for (const auto& z : stack_x[l]) ex[l].push_back(spd_embed(mix_channels(P[l], z), params));
        for (const auto& z : stack_y[l]) ey[l].push_back(spd_embed(z, params));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < T; ++j) {
            const double w = weights.size() == 0 ? 1.0 : weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (w == 0.0) continue;
            double prod = 1.0;
            for (std::size_t l = 0; l < L; ++l) prod *= spd_dist(ey[l][j], ex[l][i], params);
            total += w * prod;
        }
    if (!std::isfinite(total)) throw NumericError("manifold loss is not finite");
    return total;
}

} // namespace cscl4
