#pragma once

// Thin FFTW wrappers. Planning is serialized (FFTW's planner is not
// thread-safe); execution on the planned buffers is.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <new>

namespace irissr::detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// In-place complex transform of a fixed shape (rows x cols, or 1 x n).
// Backward transforms are scaled by 1/N so forward followed by backward is
// the identity.
class FftPlan {
public:
    FftPlan(int rows, int cols) : rows_(rows), cols_(cols) {
        n_ = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
        buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_));
        if (!buf_) throw std::bad_alloc();
        std::lock_guard lock(fftw_planner_mutex());
        if (rows == 1) {
            fwd_ = fftw_plan_dft_1d(cols, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_1d(cols, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
        } else {
            fwd_ = fftw_plan_dft_2d(rows, cols, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_2d(rows, cols, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
        }
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    ~FftPlan() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }

    std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buf_); }
    std::size_t size() const { return n_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }

    void forward() { fftw_execute(fwd_); }
    void backward() {
        fftw_execute(bwd_);
        const double s = 1.0 / static_cast<double>(n_);
        auto* d = data();
        for (std::size_t i = 0; i < n_; ++i) d[i] *= s;
    }

private:
    int rows_;
    int cols_;
    std::size_t n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

} // namespace irissr::detail
