#include "ieti/kernels.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ieti::kernels {

namespace {

// Below this many rows the fork/join cost dominates.
constexpr int kParallelRowThreshold = 2048;

inline double row_dot(const CsrView& a, int i, std::span<const double> x)
{
    double s = 0.0;
    for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
        s += a.values[k] * x[a.col_idx[k]];
    return s;
}

} // namespace

void spmv(const CsrView& a, std::span<const double> x, std::span<double> y)
{
#pragma omp parallel for schedule(static) if (a.rows > kParallelRowThreshold)
    for (int i = 0; i < a.rows; ++i)
        y[i] = row_dot(a, i, x);
}

void spmv_serial(const CsrView& a, std::span<const double> x, std::span<double> y)
{
    for (int i = 0; i < a.rows; ++i)
        y[i] = row_dot(a, i, x);
}

void spmv_add(const CsrView& a, double alpha, std::span<const double> x, std::span<double> y)
{
#pragma omp parallel for schedule(static) if (a.rows > kParallelRowThreshold)
    for (int i = 0; i < a.rows; ++i)
        y[i] += alpha * row_dot(a, i, x);
}

void spmv_add_serial(const CsrView& a, double alpha, std::span<const double> x,
                     std::span<double> y)
{
    for (int i = 0; i < a.rows; ++i)
        y[i] += alpha * row_dot(a, i, x);
}

void residual(const CsrView& a, std::span<const double> x, std::span<const double> b,
              std::span<double> r)
{
#pragma omp parallel for schedule(static) if (a.rows > kParallelRowThreshold)
    for (int i = 0; i < a.rows; ++i)
        r[i] = b[i] - row_dot(a, i, x);
}

void residual_serial(const CsrView& a, std::span<const double> x, std::span<const double> b,
                     std::span<double> r)
{
    for (int i = 0; i < a.rows; ++i)
        r[i] = b[i] - row_dot(a, i, x);
}

int max_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n)
{
#ifdef _OPENMP
    if (n >= 1)
        omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int configure_threads_from_env()
{
    if (const char* env = std::getenv("IETI_NUM_THREADS")) {
        try {
            set_threads(std::stoi(env));
        } catch (const std::exception&) {
            // ignore malformed values, keep the runtime default
        }
    }
    return max_threads();
}

} // namespace ieti::kernels
