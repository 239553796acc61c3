#include "cscl4/l4.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cscl4/error.hpp"
#include "cscl4/linalg.hpp"

namespace cscl4 {

namespace {

constexpr double kRankRatio = 1e-12;

bool rank_deficient(const Vector& s) {
    return s.size() == 0 || s(s.size() - 1) < kRankRatio * s(0);
}

L4Result run(const L4Problem& p, Matrix A) {
    L4Result res;
    res.underdetermined = p.patches.cols() < p.patches.rows();
    OrthogonalIterate it{std::move(A), 0, 0.0};
    it.l4_value = l4_norm4(it.A * p.patches);
    res.trace.push_back(it.l4_value);
    OrthogonalIterate best = it;
    for (int k = 0; k < p.max_iter; ++k) {
        OrthogonalIterate next = msp_step(it, p.patches, static_cast<std::uint64_t>(k) + 1);
        const double change = (next.A - it.A).norm();
        it = std::move(next);
        res.trace.push_back(it.l4_value);
        if (it.l4_value >= best.l4_value) best = it;
        if (change < p.tol) {
            res.converged = true;
            break;
        }
    }
    res.iterations = it.iteration;
    res.A = best.A;
    res.codes = res.A * p.patches;
    return res;
}

} // namespace

void validate(const L4Problem& p) {
    if (p.patches.rows() < 1 || p.patches.cols() < 1) throw DimensionError("empty patch matrix");
    if (p.K < 1 || p.K > p.patches.rows())
        throw DimensionError("code dimension K=" + std::to_string(p.K) + " must lie in [1, " +
                             std::to_string(p.patches.rows()) + "]");
    if (!p.patches.allFinite()) throw NumericError("non-finite patch matrix");
    if (p.max_iter < 1 || !(p.tol > 0.0)) throw PreconditionError("ell-4 solver needs max_iter >= 1 and tol > 0");
}

double l4_norm4(const Matrix& m) { return m.array().square().square().sum(); }

double orthogonality_error(const Matrix& A) {
    return (A * A.transpose() - Matrix::Identity(A.rows(), A.rows())).cwiseAbs().maxCoeff();
}

OrthogonalIterate msp_step(const OrthogonalIterate& it, const Matrix& Y, std::uint64_t perturb_seed) {
    if (it.A.cols() != Y.rows()) throw DimensionError("iterate and patch matrix disagree on patch dimension");
    const Matrix Z = it.A * Y;
    Matrix delta = Z.array().cube().matrix() * Y.transpose();
    const double scale = delta.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) throw SolverError("matching step produced a zero matrix (degenerate patches)");
    if (!std::isfinite(scale)) throw NumericError("matching step overflowed");

    Svd s = svd(delta);
    if (rank_deficient(s.S)) {
        std::mt19937_64 rng(perturb_seed);
        std::normal_distribution<double> normal;
        for (Eigen::Index j = 0; j < delta.cols(); ++j)
            for (Eigen::Index i = 0; i < delta.rows(); ++i) delta(i, j) += 1e-10 * scale * normal(rng);
        s = svd(delta);
        if (rank_deficient(s.S)) throw SolverError("matching matrix is rank deficient after perturbation");
    }
    OrthogonalIterate out;
    out.A = s.U * s.V.transpose();
    out.iteration = it.iteration + 1;
    out.l4_value = l4_norm4(out.A * Y);
    return out;
}

L4Result solve_l4(const L4Problem& p, std::uint64_t seed) {
    validate(p);
    return run(p, random_orthogonal(p.K, static_cast<int>(p.patches.rows()), seed));
}

L4Result solve_l4(const L4Problem& p, const Matrix& A0) {
    validate(p);
    if (A0.rows() != p.K || A0.cols() != p.patches.rows()) throw DimensionError("warm start has the wrong shape");
    if (orthogonality_error(A0) > 1e-8) throw PreconditionError("warm start rows are not orthonormal");
    return run(p, A0);
}

Tensor3 encode_l4(const Tensor3& input, const Matrix& A, const PatchGeometry& g) {
    if (A.cols() != g.dim())
        throw DimensionError("filter matrix has " + std::to_string(A.cols()) + " columns, patches have " +
                             std::to_string(g.dim()) + " entries");
    const Matrix codes = A * extract_patches(input, g);
    Tensor3 out(static_cast<int>(A.rows()), g.grid_h(), g.grid_w());
    out.as_matrix() = codes;
    return out;
}

Tensor3 decode_l4(const Tensor3& codes, const Matrix& A, const PatchGeometry& g) {
    if (A.cols() != g.dim() || codes.channels != A.rows() || codes.height != g.grid_h() ||
        codes.width != g.grid_w())
        throw DimensionError("code map does not match filters and geometry");
    const Matrix patches = A.transpose() * codes.as_matrix();
    return assemble_patches(patches, g);
}

Matrix align_rows(const Matrix& reference, const Matrix& candidate) {
    if (reference.rows() != candidate.rows() || reference.cols() != candidate.cols())
        throw DimensionError("alignment needs equally shaped matrices");
    const Eigen::Index K = reference.rows();
    const Matrix C = reference * candidate.transpose();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(K * K));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(C(a / K, a % K)) > std::abs(C(b / K, b % K));
    });
    std::vector<bool> used_r(K, false), used_c(K, false);
    Matrix out(K, candidate.cols());
    Eigen::Index placed = 0;
    for (Eigen::Index e : order) {
        const Eigen::Index r = e / K, c = e % K;
        if (used_r[r] || used_c[c]) continue;
        used_r[r] = used_c[c] = true;
        out.row(r) = (C(r, c) < 0 ? -1.0 : 1.0) * candidate.row(c);
        if (++placed == K) break;
    }
    return out;
}

} // namespace cscl4
