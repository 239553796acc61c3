#pragma once

#include <cstdint>
#include <functional>

#include "cscl4/tensor.hpp"

namespace cscl4 {

struct Svd {
    Matrix U;
    Vector S; // non-increasing
    Matrix V;
};

// Thin SVD, m = U diag(S) V^T.
Svd svd(const Matrix& m);

struct SymEig {
    Vector values; // ascending
    Matrix vectors;
};

SymEig sym_eig(const Matrix& m);

// Q f(L) Q^T for symmetric m.
Matrix sym_apply(const SymEig& e, const std::function<double(double)>& f);

// Orthogonal polar factor U V^T of m.
Matrix polar(const Matrix& m);

// Rows form a Haar-distributed orthonormal set, rows <= cols.
Matrix random_orthogonal(int rows, int cols, std::uint64_t seed);

} // namespace cscl4
