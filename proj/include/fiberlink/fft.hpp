#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace fiberlink::fft
{
// Thin RAII wrappers over FFTW. Plans are always created with FFTW_ESTIMATE
// so that results are bit-reproducible from run to run. Plan creation is
// serialized internally; execution is thread-safe.

// Forward real-to-complex transform of a fixed length, reusable.
class RealForward
{
public:
        explicit RealForward(std::size_t n);
        ~RealForward();

        RealForward(const RealForward&) = delete;
        RealForward& operator=(const RealForward&) = delete;

        std::size_t size() const noexcept
        {
                return n_;
        }

        double* input() noexcept
        {
                return in_;
        }

        // Transforms input() in place of the internal buffers; returns n/2+1 bins.
        std::span<const std::complex<double>> execute();

private:
        std::size_t n_;
        double* in_;
        std::complex<double>* out_;
        void* plan_;
};

// Inverse transform of a Hermitian half spectrum (n/2+1 bins) to n real
// samples, without the 1/n normalisation. The spectrum is destroyed.
void inverse_real(std::vector<std::complex<double>>& half_spectrum, std::span<double> out);
}
