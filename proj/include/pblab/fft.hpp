#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <span>
#include <vector>

#include <fftw3.h>

namespace pblab::detail {

inline std::vector<double> convolve_direct(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

/// FFTW planning is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (!p) throw std::bad_alloc();
    return std::unique_ptr<T[], FftwFree>(p);
}

/// Product of two real polynomials through FFTW real transforms. Plans use
/// FFTW_ESTIMATE so the arithmetic is the same on every run.
inline std::vector<double> convolve_fft(std::span<const double> a, std::span<const double> b) {
    const std::size_t out_len = a.size() + b.size() - 1;
    std::size_t n = 1;
    while (n < out_len) n <<= 1;
    const std::size_t bins = n / 2 + 1;

    auto ra = fftw_buffer<double>(n), rb = fftw_buffer<double>(n);
    auto fa = fftw_buffer<fftw_complex>(bins), fb = fftw_buffer<fftw_complex>(bins);
    fftw_plan pa, pb, inv;
    {
        std::lock_guard lock(fftw_planner_mutex());
        const int ni = static_cast<int>(n);
        pa = fftw_plan_dft_r2c_1d(ni, ra.get(), fa.get(), FFTW_ESTIMATE);
        pb = fftw_plan_dft_r2c_1d(ni, rb.get(), fb.get(), FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_1d(ni, fa.get(), ra.get(), FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) {
        ra[i] = i < a.size() ? a[i] : 0.0;
        rb[i] = i < b.size() ? b[i] : 0.0;
    }
    fftw_execute(pa);
    fftw_execute(pb);
    for (std::size_t k = 0; k < bins; ++k) {
        const std::complex<double> x(fa[k][0], fa[k][1]), y(fb[k][0], fb[k][1]);
        const auto z = x * y;
        fa[k][0] = z.real();
        fa[k][1] = z.imag();
    }
    fftw_execute(inv);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(pa);
        fftw_destroy_plan(pb);
        fftw_destroy_plan(inv);
    }
    std::vector<double> out(out_len);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < out_len; ++i) out[i] = ra[i] * scale;
    return out;
}

}  // namespace pblab::detail
