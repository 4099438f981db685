#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace blochconv::fft {

using cplx = std::complex<double>;

namespace detail {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int n, int sign) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, sign);
        if (auto it = plans_.find(key); it != plans_.end())
            return it->second;
        std::vector<cplx> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        fftw_plan plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                          reinterpret_cast<fftw_complex*>(b.data()), sign,
                                          FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

    ~PlanCache() {
        for (auto& [key, plan] : plans_)
            fftw_destroy_plan(plan);
    }

private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

inline std::vector<cplx> execute(std::span<const cplx> in, int sign) {
    const int n = static_cast<int>(in.size());
    std::vector<cplx> out(in.size());
    if (n == 0)
        return out;
    std::vector<cplx> buffer(in.begin(), in.end());
    fftw_execute_dft(PlanCache::instance().get(n, sign), reinterpret_cast<fftw_complex*>(buffer.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

} // namespace detail

/// Unnormalized forward DFT: out[q] = sum_j in[j] exp(-2 pi i j q / N).
inline std::vector<cplx> forward(std::span<const cplx> in) {
    return detail::execute(in, FFTW_FORWARD);
}

/// Unnormalized backward DFT: out[j] = sum_q in[q] exp(+2 pi i j q / N).
inline std::vector<cplx> backward(std::span<const cplx> in) {
    return detail::execute(in, FFTW_BACKWARD);
}

/// Signed mode number for DFT bin q of an N-point transform, in [-N/2, N/2).
inline int signed_mode(int q, int n) { return q < (n + 1) / 2 ? q : q - n; }

/// DFT bin for signed mode l.
inline int bin_of(int l, int n) {
    int r = l % n;
    return r < 0 ? r + n : r;
}

} // namespace blochconv::fft
