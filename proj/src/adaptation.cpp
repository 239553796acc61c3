#include "adaptation.hpp"

#include <algorithm>
#include <cmath>

#include "cscl4/error.hpp"

namespace cscl4::detail {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix moment(const Tensor3& z, bool center) {
    Matrix X = z.as_matrix();
    if (center) X.colwise() -= X.rowwise().mean();
    Matrix C = X * X.transpose() / static_cast<double>(X.cols());
    return 0.5 * (C + C.transpose());
}

double quad_trace(const Matrix& P, const Matrix& G) { return (P * G).cwiseProduct(P).sum(); }

} // namespace

LayerBlocks make_blocks(const std::vector<Tensor3>& zx, const std::vector<Tensor3>& zy,
                        const ManifoldParams* manifold) {
    LayerBlocks b;
    b.S = static_cast<int>(zx.size());
    b.T = static_cast<int>(zy.size());
    if (b.S == 0 || b.T == 0) throw DimensionError("empty batch");
    b.K = zx[0].channels;
    std::vector<RowMat> X, Y;
    for (const auto& z : zx) {
        if (!z.same_shape(zx[0])) throw DimensionError("ragged source codes");
        X.emplace_back(z.as_matrix());
    }
    for (const auto& z : zy) {
        if (z.channels != b.K || z.plane() != zx[0].plane()) throw DimensionError("target codes do not match source codes");
        Y.emplace_back(z.as_matrix());
    }
    b.Gxx.resize(static_cast<std::size_t>(b.S) * b.S);
    for (int a = 0; a < b.S; ++a)
        for (int c = a; c < b.S; ++c) {
            b.Gxx[a * b.S + c] = X[a] * X[c].transpose();
            if (c != a) b.Gxx[c * b.S + a] = b.Gxx[a * b.S + c].transpose();
        }
    b.Hxy.resize(static_cast<std::size_t>(b.S) * b.T);
    for (int a = 0; a < b.S; ++a)
        for (int c = 0; c < b.T; ++c) b.Hxy[a * b.T + c] = X[a] * Y[c].transpose();
    b.ny.resize(b.T);
    b.dyy = Matrix::Zero(b.T, b.T);
    for (int c = 0; c < b.T; ++c) b.ny[c] = Y[c].squaredNorm();
    for (int a = 0; a < b.T; ++a)
        for (int c = a + 1; c < b.T; ++c) b.dyy(a, c) = b.dyy(c, a) = (Y[a] - Y[c]).squaredNorm();
    if (manifold) {
        for (const auto& z : zx) b.Cx.push_back(moment(z, manifold->center));
        for (const auto& z : zy) {
            Matrix C = moment(z, manifold->center);
            C.diagonal().array() += manifold->ridge;
            b.Cy.emplace_back(std::move(C));
        }
    }
    return b;
}

void pair_distances(const LayerBlocks& b, const Matrix& P, Matrix& dxx, Matrix& dxy) {
    std::vector<double> q(b.S);
    for (int a = 0; a < b.S; ++a) q[a] = quad_trace(P, b.Gxx[a * b.S + a]);
    dxx = Matrix::Zero(b.S, b.S);
    for (int a = 0; a < b.S; ++a)
        for (int c = a + 1; c < b.S; ++c)
            dxx(a, c) = dxx(c, a) = std::max(0.0, q[a] + q[c] - 2.0 * quad_trace(P, b.Gxx[a * b.S + c]));
    dxy.resize(b.S, b.T);
    for (int a = 0; a < b.S; ++a)
        for (int c = 0; c < b.T; ++c)
            dxy(a, c) = std::max(0.0, q[a] - 2.0 * P.cwiseProduct(b.Hxy[a * b.T + c].transpose()).sum() + b.ny[c]);
}

double pooled_median(const Matrix& dxx, const Matrix& dxy, const Matrix& dyy) {
    std::vector<double> v;
    for (Eigen::Index a = 0; a < dxx.rows(); ++a)
        for (Eigen::Index c = a + 1; c < dxx.cols(); ++c) v.push_back(dxx(a, c));
    for (Eigen::Index i = 0; i < dxy.size(); ++i) v.push_back(dxy.data()[i]);
    for (Eigen::Index a = 0; a < dyy.rows(); ++a)
        for (Eigen::Index c = a + 1; c < dyy.cols(); ++c) v.push_back(dyy(a, c));
    if (v.empty()) throw PreconditionError("bandwidth needs at least two samples");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double med = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    if (!(med > 0.0)) throw DegenerateInputError("median squared distance is zero");
    return med;
}

AdaptTerms adaptation_objective(const std::vector<const LayerBlocks*>& blocks, const std::vector<Matrix>& P,
                                const Matrix& w, const ModelConfig& c, std::vector<Matrix>* grads) {
    const std::size_t L = blocks.size();
    if (P.size() != L) throw DimensionError("one associator per adapted layer expected");
    const int S = blocks[0]->S, T = blocks[0]->T;
    AdaptTerms out;
    if (grads) {
        grads->clear();
        for (std::size_t l = 0; l < L; ++l) grads->push_back(Matrix::Zero(P[l].rows(), P[l].cols()));
    }
    std::vector<Matrix> dxx(L), dxy(L);
    for (std::size_t l = 0; l < L; ++l) pair_distances(*blocks[l], P[l], dxx[l], dxy[l]);

    if (c.ls_weight > 0.0) {
        for (std::size_t l = 0; l < L; ++l) {
            const LayerBlocks& b = *blocks[l];
            // residual relative to the weighted target energy
            double energy = 0.0;
            for (int a = 0; a < S; ++a)
                for (int j = 0; j < T; ++j) energy += w(a, j) * b.ny[j];
            if (!(energy > 0.0)) throw DegenerateInputError("target codes carry no energy");
            out.ls += w.cwiseProduct(dxy[l]).sum() / energy;
            if (!grads) continue;
            Matrix g = Matrix::Zero(P[l].rows(), P[l].cols());
            for (int a = 0; a < S; ++a) {
                const double r = w.row(a).sum();
                g += 2.0 * r * P[l] * b.Gxx[a * S + a];
                for (int j = 0; j < T; ++j) g -= 2.0 * w(a, j) * b.Hxy[a * T + j].transpose();
            }
            (*grads)[l] += c.ls_weight * g / energy;
        }
    }

    if (c.mmd_weight > 0.0) {
        std::vector<double> p(L);
        Matrix Kxx = Matrix::Ones(S, S), Kxy = Matrix::Ones(S, T), Kyy = Matrix::Ones(T, T);
        for (std::size_t l = 0; l < L; ++l) {
            p[l] = c.kernel.policy == BandwidthPolicy::fixed ? c.kernel.bandwidth
                                                               : pooled_median(dxx[l], dxy[l], blocks[l]->dyy);
            Kxx.array() *= (-dxx[l].array() / p[l]).exp();
            Kxy.array() *= (-dxy[l].array() / p[l]).exp();
            Kyy.array() *= (-blocks[l]->dyy.array() / p[l]).exp();
        }
        const double s2 = static_cast<double>(S) * S, t2 = static_cast<double>(T) * T, st = static_cast<double>(S) * T;
        out.mmd = Kxx.sum() / s2 + Kyy.sum() / t2 - 2.0 * Kxy.sum() / st;
        if (grads) {
            for (std::size_t l = 0; l < L; ++l) {
                const LayerBlocks& b = *blocks[l];
                const Matrix& Pl = P[l];
                Matrix Mxx = Matrix::Zero(b.K, b.K), Gw = Matrix::Zero(b.K, b.K), Hw = Matrix::Zero(b.K, b.K);
                for (int a = 0; a < S; ++a) {
                    Mxx += 2.0 * Kxx.row(a).sum() * b.Gxx[a * S + a];
                    for (int j = 0; j < S; ++j) Mxx -= 2.0 * Kxx(a, j) * b.Gxx[a * S + j];
                    Gw += Kxy.row(a).sum() * b.Gxx[a * S + a];
                    for (int j = 0; j < T; ++j) Hw += Kxy(a, j) * b.Hxy[a * T + j].transpose();
                }
                Matrix g = -(2.0 / (s2 * p[l])) * Pl * Mxx + (2.0 / (st * p[l])) * (2.0 * Pl * Gw - 2.0 * Hw);
                (*grads)[l] += c.mmd_weight * g;
            }
        }
    }

    if (c.manifold_weight > 0.0) {
        // D[l](a, j) and dD/dB per pair
        if (grads && c.manifold.mode != DistanceMode::affine_invariant)
            throw PreconditionError("the verbatim distance has no gradient; use it for evaluation only");
        std::vector<Matrix> D(L, Matrix::Zero(S, T));
        std::vector<std::vector<Matrix>> gB(L);
        for (std::size_t l = 0; l < L; ++l) {
            const LayerBlocks& b = *blocks[l];
            if (b.Cx.empty()) throw PreconditionError("manifold statistics were not prepared");
            if (grads) gB[l].resize(static_cast<std::size_t>(S) * T);
            for (int a = 0; a < S; ++a) {
                Matrix B = P[l] * b.Cx[a] * P[l].transpose();
                B = 0.5 * (B + B.transpose());
                B.diagonal().array() += c.manifold.ridge;
                const SpdMatrix Bs(std::move(B));
                for (int j = 0; j < T; ++j) {
                    if (w(a, j) == 0.0) continue;
                    if (grads) {
                        DistGrad dg = spd_dist_grad(b.Cy[j], Bs);
                        D[l](a, j) = dg.value;
                        gB[l][a * T + j] = std::move(dg.grad_b);
                    } else {
                        D[l](a, j) = spd_dist(b.Cy[j], Bs, c.manifold);
                    }
                }
            }
        }
        Matrix prod = w;
        for (std::size_t l = 0; l < L; ++l) prod.array() *= D[l].array();
        out.manifold = prod.sum();
        if (grads) {
            for (std::size_t l = 0; l < L; ++l) {
                const LayerBlocks& b = *blocks[l];
                Matrix g = Matrix::Zero(P[l].rows(), P[l].cols());
                for (int a = 0; a < S; ++a) {
                    Matrix acc = Matrix::Zero(b.K, b.K);
                    for (int j = 0; j < T; ++j) {
                        if (w(a, j) == 0.0) continue;
                        double other = w(a, j);
                        for (std::size_t m = 0; m < L; ++m)
                            if (m != l) other *= D[m](a, j);
                        acc += other * gB[l][a * T + j];
                    }
                    g += 2.0 * acc * P[l] * b.Cx[a];
                }
                (*grads)[l] += c.manifold_weight * g;
            }
        }
    }
    return out;
}

} // namespace cscl4::detail
