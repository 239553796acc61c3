#include "cscl4/linalg.hpp"

#include <random>

#include "cscl4/error.hpp"

namespace cscl4 {

Svd svd(const Matrix& m) {
    if (!m.allFinite()) throw NumericError("svd of a matrix with non-finite entries");
    Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

SymEig sym_eig(const Matrix& m) {
    if (m.rows() != m.cols()) throw DimensionError("eigendecomposition needs a square matrix");
    if (!m.allFinite()) throw NumericError("eigendecomposition of a matrix with non-finite entries");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    if (solver.info() != Eigen::Success) throw NumericError("symmetric eigensolver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix sym_apply(const SymEig& e, const std::function<double(double)>& f) {
    Vector d(e.values.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = f(e.values(i));
    return e.vectors * d.asDiagonal() * e.vectors.transpose();
}

Matrix polar(const Matrix& m) {
    const Svd s = svd(m);
    return s.U * s.V.transpose();
}

Matrix random_orthogonal(int rows, int cols, std::uint64_t seed) {
    if (rows < 1 || cols < 1 || rows > cols) throw DimensionError("random_orthogonal needs 1 <= rows <= cols");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix g(cols, cols);
    for (Eigen::Index j = 0; j < g.cols(); ++j)
        for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < cols; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q.transpose().topRows(rows);
}

} // namespace cscl4
