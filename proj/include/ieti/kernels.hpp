#pragma once

// Data-parallel inner kernels. Every kernel has a `_serial` twin that is the
// reference implementation used by the tests and the benchmark; both produce
// bit-identical results because each output entry is owned by one thread and
// accumulated in the same order.

#include <cstddef>
#include <span>

namespace ieti::kernels {

/// Compressed-row view, no ownership.
struct CsrView {
    int rows = 0;
    int cols = 0;
    std::span<const int> row_ptr;
    std::span<const int> col_idx;
    std::span<const double> values;
};

/// y = A x (OpenMP over rows).
void spmv(const CsrView& a, std::span<const double> x, std::span<double> y);
void spmv_serial(const CsrView& a, std::span<const double> x, std::span<double> y);

/// y += alpha * A x
void spmv_add(const CsrView& a, double alpha, std::span<const double> x, std::span<double> y);
void spmv_add_serial(const CsrView& a, double alpha, std::span<const double> x,
                     std::span<double> y);

/// Residual r = b - A x.
void residual(const CsrView& a, std::span<const double> x, std::span<const double> b,
              std::span<double> r);
void residual_serial(const CsrView& a, std::span<const double> x, std::span<const double> b,
                     std::span<double> r);

/// Number of worker threads the parallel kernels will use.
int max_threads();

/// Sets the worker-thread count (no-op without OpenMP). Values < 1 are ignored.
void set_threads(int n);

/// Reads IETI_NUM_THREADS and applies it; returns the active thread count.
int configure_threads_from_env();

} // namespace ieti::kernels
