#pragma once

#include <cstdint>
#include <vector>

#include "cscl4/tensor.hpp"

namespace cscl4 {

struct CscProblem {
    std::vector<Image2> images;
    int K = 1;
    int fh = 1;
    int fw = 1;
    double lambda = 0.1; // >= 0
};

struct CscOptions {
    int max_outer = 50;
    double tol = 1e-5;
    int code_max_iter = 200;
    double code_tol = 1e-7;
    double ridge = 1e-8;
    std::uint64_t seed = 0;
};

struct CscSolution {
    FilterBank filters;
    std::vector<Tensor3> codes;
    std::vector<double> objective_trace;
    bool converged = false;
};

void validate(const CscProblem& p);

// Sum over filters of f_k * z_k (same framing).
Image2 reconstruct(const FilterBank& filters, const Tensor3& codes);

// 1/2 sum ||x - recon||^2 + lambda sum |z|.
double csc_objective(const CscProblem& p, const FilterBank& filters, const std::vector<Tensor3>& codes);

double soft_threshold(double v, double t);

// Unit-norm Gaussian filters.
FilterBank init_filters(int K, int fh, int fw, std::uint64_t seed);

std::vector<Tensor3> solve_codes_l1(const CscProblem& p, const FilterBank& filters,
                                    const std::vector<Tensor3>& codes0, const CscOptions& opt = {});

FilterBank solve_filters(const CscProblem& p, const std::vector<Tensor3>& codes, const FilterBank& filters0,
                         const CscOptions& opt = {});

CscSolution solve_csc(const CscProblem& p, const CscOptions& opt = {});

} // namespace cscl4
