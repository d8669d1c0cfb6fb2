#include "fiberlink/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <new>
#include <stdexcept>

namespace fiberlink::fft
{
namespace
{
// FFTW's planner is not reentrant.
std::mutex& planner_mutex()
{
        static std::mutex m;
        return m;
}
}

RealForward::RealForward(std::size_t n) : n_(n), in_(nullptr), out_(nullptr), plan_(nullptr)
{
        if (n < 2)
        {
                throw std::invalid_argument("fft length must be at least 2");
        }
        in_ = fftw_alloc_real(n);
        out_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n / 2 + 1));
        if (in_ == nullptr || out_ == nullptr)
        {
                fftw_free(in_);
                fftw_free(out_);
                throw std::bad_alloc();
        }
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, reinterpret_cast<fftw_complex*>(out_), FFTW_ESTIMATE);
}

RealForward::~RealForward()
{
        {
                std::lock_guard lock(planner_mutex());
                fftw_destroy_plan(static_cast<fftw_plan>(plan_));
        }
        fftw_free(in_);
        fftw_free(out_);
}

std::span<const std::complex<double>> RealForward::execute()
{
        fftw_execute(static_cast<fftw_plan>(plan_));
        return {out_, n_ / 2 + 1};
}

void inverse_real(std::vector<std::complex<double>>& half_spectrum, std::span<double> out)
{
        if (half_spectrum.size() != out.size() / 2 + 1)
        {
                throw std::invalid_argument("half spectrum length does not match output length");
        }
        fftw_plan plan;
        {
                std::lock_guard lock(planner_mutex());
                plan = fftw_plan_dft_c2r_1d(static_cast<int>(out.size()),
                                            reinterpret_cast<fftw_complex*>(half_spectrum.data()), out.data(),
                                            FFTW_ESTIMATE);
        }
        fftw_execute(plan);
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
}
}
