#include "cardio/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "cardio/common.hpp"

namespace cardio::fft {

namespace {
// FFTW plan creation is not thread-safe; execution of distinct plans is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
    require(!x.empty(), "rfft: empty input");
    const std::size_t n = x.size();
    std::vector<double> in(x);
    std::vector<std::complex<double>> out(n / 2 + 1);

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                    reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& spectrum,
                          std::size_t n_out) {
    require(n_out >= 1, "irfft: output length must be >= 1");
    const std::size_t bins = n_out / 2 + 1;
    std::vector<std::complex<double>> in(bins, {0.0, 0.0});
    for (std::size_t k = 0; k < bins && k < spectrum.size(); ++k) in[k] = spectrum[k];
    std::vector<double> out(n_out);

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n_out),
                                    reinterpret_cast<fftw_complex*>(in.data()),
                                    out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / static_cast<double>(n_out);
    for (double& v : out) v *= scale;
    return out;
}

}  // namespace cardio::fft
