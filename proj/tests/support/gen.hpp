#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cscl4/tensor.hpp"

namespace testgen {

using cscl4::Image2;
using cscl4::Matrix;
using cscl4::Tensor3;
using cscl4::Vector;

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool coin(double p) { return uniform() < p; }

    Image2 image(int h, int w, double lo = 0.0, double hi = 1.0) {
        Image2 img(h, w);
        for (double& v : img.data) v = uniform(lo, hi);
        return img;
    }
    Image2 gaussian_image(int h, int w) {
        Image2 img(h, w);
        for (double& v : img.data) v = normal();
        return img;
    }
    Tensor3 tensor(int c, int h, int w) {
        Tensor3 t(c, h, w);
        for (double& v : t.data) v = normal();
        return t;
    }
    Matrix gaussian(int r, int c) {
        Matrix m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = normal();
        return m;
    }
    Vector vec(int n) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v(i) = normal();
        return v;
    }
    // Square orthogonal matrix from Gram-Schmidt on Gaussian columns.
    Matrix orthogonal(int n) {
        Matrix q = gaussian(n, n);
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < j; ++k) q.col(j) -= q.col(k).dot(q.col(j)) * q.col(k);
            q.col(j).normalize();
        }
        return q;
    }
    // Well-conditioned SPD: G G^T / n + shift I.
    Matrix spd(int n, double shift = 0.1) {
        const Matrix g = gaussian(n, n + 2);
        Matrix s = g * g.transpose() / static_cast<double>(n) + shift * Matrix::Identity(n, n);
        return 0.5 * (s + s.transpose());
    }
    // Bernoulli(p)-Gaussian matrix.
    Matrix bernoulli_gaussian(int r, int c, double p) {
        Matrix m = Matrix::Zero(r, c);
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i)
                if (coin(p)) m(i, j) = normal();
        return m;
    }
};

} // namespace testgen
