#pragma once

#include <cstdint>
#include <vector>

#include "cscl4/patches.hpp"
#include "cscl4/tensor.hpp"

namespace cscl4 {

struct L4Problem {
    Matrix patches; // d x n
    int K = 0;      // K <= d
    int max_iter = 500;
    double tol = 1e-6;
};

struct OrthogonalIterate {
    Matrix A; // K x d, orthonormal rows
    int iteration = 0;
    double l4_value = 0.0;
};

struct L4Result {
    Matrix A;
    Matrix codes; // A * patches
    std::vector<double> trace;
    int iterations = 0;
    bool converged = false;
    bool underdetermined = false; // n < d
};

void validate(const L4Problem& p);

double l4_norm4(const Matrix& m);

// One matching-stretching-projection step.
OrthogonalIterate msp_step(const OrthogonalIterate& it, const Matrix& Y, std::uint64_t perturb_seed = 0);

// Starts from a Haar-random orthogonal matrix drawn from `seed`.
L4Result solve_l4(const L4Problem& p, std::uint64_t seed);
// Warm start from A0.
L4Result solve_l4(const L4Problem& p, const Matrix& A0);

// Analysis: K-channel code map on the patch grid.
Tensor3 encode_l4(const Tensor3& input, const Matrix& A, const PatchGeometry& g);
// Synthesis: A^T per position, then coverage-averaged reassembly.
Tensor3 decode_l4(const Tensor3& codes, const Matrix& A, const PatchGeometry& g);

// Rows of `candidate` reordered and sign-flipped to best match `reference`
// (greedy on absolute row correlation).
Matrix align_rows(const Matrix& reference, const Matrix& candidate);

double orthogonality_error(const Matrix& A);

} // namespace cscl4
