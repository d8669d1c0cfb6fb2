#pragma once

#include "fiberlink/phase_series.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace fiberlink
{
struct PsdEstimate
{
        std::vector<double> frequency_hz;
        std::vector<double> values;
        double resolution_bw_hz = 0.0;
        std::string window;
        std::size_t segments = 0;
};

enum class Window
{
        hann,
        rectangular
};

struct WelchOptions
{
        std::size_t segment_length = 0;
        double overlap = 0.5;
        Window window = Window::hann;
};

// One-sided Welch PSD with per-segment mean removal. Bins run from DC to
// Nyquist; sum(values) * resolution_bw equals the windowed variance.
PsdEstimate welch_psd(const PhaseSeries& series, const WelchOptions& options);

// Mean of several estimates on identical bins.
PsdEstimate average(const std::vector<PsdEstimate>& estimates);

// sqrt of the trapezoidal integral of the PSD over [f1, f2]; the end points
// are linearly interpolated between bins.
double integrated_rms_phase(const PsdEstimate& psd, double f1, double f2);

// Mean PSD over the bins inside [f_lo, f_hi].
double band_average(const PsdEstimate& psd, double f_lo, double f_hi);

// PSD linearly interpolated at f.
double psd_at(const PsdEstimate& psd, double f);

// --- frequency counting and stability ----------------------------------------

struct FractionalFreqSeries
{
        std::vector<double> y;
        double gate_s = 0.0;
        double nu0_hz = 0.0;
};

// Pi-type (dead-time free) counter: y_k = (phi((k+1)T) - phi(kT)) / (2 pi nu0 T).
FractionalFreqSeries pi_counter(const PhaseSeries& series, double gate_s, double nu0_hz);

// First-order low-pass on phase with unity DC gain.
PhaseSeries tracking_filter(const PhaseSeries& series, double bandwidth_hz);

struct AdevPoint
{
        double tau_s = 0.0;
        double sigma = 0.0;
        std::size_t count = 0;

        // One-sigma error bar, sigma / sqrt(count).
        double error() const noexcept;
};

using AdevSeries = std::vector<AdevPoint>;

// Overlapping Allan deviation. Each tau must be an integer multiple of the
// gate and leave at least three averaging windows.
AdevSeries allan_deviation(const FractionalFreqSeries& y, const std::vector<double>& taus);

// Gate multiples 1, 2, 5, 10, 20, ... up to one third of the record.
std::vector<double> octave_taus(const FractionalFreqSeries& y, double tau_min, double tau_max);

struct RejectionSpectrum
{
        std::vector<double> frequency_hz;
        std::vector<double> db;
};

// 10 log10(compensated / free) per bin; 0/0 is reported as 0 dB.
RejectionSpectrum rejection_spectrum(const PsdEstimate& free, const PsdEstimate& compensated);

// Least-squares slope of log10(y) against log10(x) over x in [x_lo, x_hi].
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double x_lo, double x_hi);

double loglog_slope(const AdevSeries& adev, double tau_lo, double tau_hi);

double loglog_slope(const PsdEstimate& psd, double f_lo, double f_hi);

// sigma(tau) at an exact tau, or NaN when absent.
double adev_at(const AdevSeries& adev, double tau_s);
}
