#include "fiberlink/metrology.hpp"

#include "fiberlink/fft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fiberlink
{
namespace
{
constexpr double two_pi = 2.0 * std::numbers::pi;

std::vector<double> make_window(Window window, std::size_t n)
{
        std::vector<double> w(n, 1.0);
        if (window == Window::hann)
        {
                // periodic Hann
                for (std::size_t i = 0; i < n; ++i)
                {
                        w[i] = 0.5 - 0.5 * std::cos(two_pi * static_cast<double>(i) / static_cast<double>(n));
                }
        }
        return w;
}

void require_same_bins(const PsdEstimate& a, const PsdEstimate& b)
{
        if (a.frequency_hz != b.frequency_hz)
        {
                throw std::invalid_argument("PSD estimates have different frequency bins");
        }
}
}

PsdEstimate welch_psd(const PhaseSeries& series, const WelchOptions& options)
{
        const std::size_t len = options.segment_length;
        if (len < 2)
        {
                throw std::invalid_argument("Welch segment length must be at least 2");
        }
        if (series.size() < len)
        {
                throw std::invalid_argument("series is shorter than one Welch segment");
        }
        if (!(options.overlap >= 0 && options.overlap <= 0.9))
        {
                throw std::invalid_argument("Welch overlap must lie in [0, 0.9]");
        }
        if (!(series.fs > 0))
        {
                throw std::invalid_argument("sample rate must be positive");
        }

        const auto step = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(static_cast<double>(len) * (1.0 - options.overlap))));
        const auto w = make_window(options.window, len);
        double w2 = 0;
        for (const double v : w)
        {
                w2 += v * v;
        }

        const std::size_t bins = len / 2 + 1;
        PsdEstimate out;
        out.frequency_hz.resize(bins);
        out.values.assign(bins, 0.0);
        out.resolution_bw_hz = series.fs / static_cast<double>(len);
        out.window = options.window == Window::hann ? "hann" : "rectangular";
        for (std::size_t k = 0; k < bins; ++k)
        {
                out.frequency_hz[k] = static_cast<double>(k) * out.resolution_bw_hz;
        }

        fft::RealForward transform(len);
        double* in = transform.input();
        for (std::size_t start = 0; start + len <= series.size(); start += step)
        {
                double mean = 0;
                for (std::size_t i = 0; i < len; ++i)
                {
                        mean += series.samples[start + i];
                }
                mean /= static_cast<double>(len);
                for (std::size_t i = 0; i < len; ++i)
                {
                        in[i] = (series.samples[start + i] - mean) * w[i];
                }
                const auto spectrum = transform.execute();
                for (std::size_t k = 0; k < bins; ++k)
                {
                        out.values[k] += std::norm(spectrum[k]);
                }
                ++out.segments;
        }

        const double norm = 1.0 / (series.fs * w2 * static_cast<double>(out.segments));
        for (std::size_t k = 0; k < bins; ++k)
        {
                const bool single = k == 0 || 2 * k == len;
                out.values[k] *= single ? norm : 2.0 * norm;
        }
        return out;
}

PsdEstimate average(const std::vector<PsdEstimate>& estimates)
{
        if (estimates.empty())
        {
                throw std::invalid_argument("nothing to average");
        }
        PsdEstimate out = estimates.front();
        for (std::size_t e = 1; e < estimates.size(); ++e)
        {
                require_same_bins(out, estimates[e]);
                for (std::size_t k = 0; k < out.values.size(); ++k)
                {
                        out.values[k] += estimates[e].values[k];
                }
                out.segments += estimates[e].segments;
        }
        for (auto& v : out.values)
        {
                v /= static_cast<double>(estimates.size());
        }
        return out;
}

double psd_at(const PsdEstimate& psd, double f)
{
        const auto& fr = psd.frequency_hz;
        if (fr.empty() || f < fr.front() || f > fr.back())
        {
                throw std::out_of_range("frequency outside PSD bins");
        }
        const auto it = std::lower_bound(fr.begin(), fr.end(), f);
        const auto i = static_cast<std::size_t>(it - fr.begin());
        if (*it == f)
        {
                return psd.values[i];
        }
        const double t = (f - fr[i - 1]) / (fr[i] - fr[i - 1]);
        return psd.values[i - 1] + t * (psd.values[i] - psd.values[i - 1]);
}

double integrated_rms_phase(const PsdEstimate& psd, double f1, double f2)
{
        if (!(f1 < f2))
        {
                throw std::invalid_argument("integration range must have f1 < f2");
        }
        const auto& fr = psd.frequency_hz;
        if (fr.empty() || f1 < fr.front() || f2 > fr.back())
        {
                throw std::out_of_range("integration range outside PSD bins");
        }
        double prev_f = f1;
        double prev_s = psd_at(psd, f1);
        double acc = 0;
        for (std::size_t k = 0; k < fr.size(); ++k)
        {
                if (fr[k] <= f1)
                {
                        continue;
                }
                if (fr[k] >= f2)
                {
                        break;
                }
                acc += 0.5 * (prev_s + psd.values[k]) * (fr[k] - prev_f);
                prev_f = fr[k];
                prev_s = psd.values[k];
        }
        acc += 0.5 * (prev_s + psd_at(psd, f2)) * (f2 - prev_f);
        return std::sqrt(acc);
}

double band_average(const PsdEstimate& psd, double f_lo, double f_hi)
{
        double acc = 0;
        std::size_t count = 0;
        for (std::size_t k = 0; k < psd.frequency_hz.size(); ++k)
        {
                if (psd.frequency_hz[k] >= f_lo && psd.frequency_hz[k] <= f_hi)
                {
                        acc += psd.values[k];
                        ++count;
                }
        }
        if (count == 0)
        {
                throw std::out_of_range("no PSD bins inside the band");
        }
        return acc / static_cast<double>(count);
}

FractionalFreqSeries pi_counter(const PhaseSeries& series, double gate_s, double nu0_hz)
{
        if (!(nu0_hz > 0))
        {
                throw std::invalid_argument("carrier frequency must be positive");
        }
        const double samples_per_gate = gate_s * series.fs;
        if (!(samples_per_gate >= 1.0 - 1e-9))
        {
                throw std::invalid_argument("counter gate is shorter than one sample");
        }
        const auto m = static_cast<std::size_t>(std::llround(samples_per_gate));
        if (std::abs(samples_per_gate - static_cast<double>(m)) > 1e-6 * samples_per_gate)
        {
                throw std::invalid_argument("counter gate must be an integer number of samples");
        }
        if (series.size() < 2 * m + 1)
        {
                throw std::invalid_argument("series spans fewer than two gates");
        }

        FractionalFreqSeries y;
        y.gate_s = static_cast<double>(m) / series.fs;
        y.nu0_hz = nu0_hz;
        const std::size_t count = (series.size() - 1) / m;
        y.y.resize(count);
        const double scale = 1.0 / (two_pi * nu0_hz * y.gate_s);
        for (std::size_t k = 0; k < count; ++k)
        {
                y.y[k] = (series.samples[(k + 1) * m] - series.samples[k * m]) * scale;
        }
        return y;
}

PhaseSeries tracking_filter(const PhaseSeries& series, double bandwidth_hz)
{
        if (!(bandwidth_hz > 0) || !(bandwidth_hz < series.fs / 2))
        {
                throw std::invalid_argument("tracking filter bandwidth must lie in (0, fs/2)");
        }
        PhaseSeries out = series;
        if (out.samples.empty())
        {
                return out;
        }
        const double a = 1.0 - std::exp(-two_pi * bandwidth_hz / series.fs);
        double state = out.samples.front();
        for (auto& v : out.samples)
        {
                state += a * (v - state);
                v = state;
        }
        return out;
}

double AdevPoint::error() const noexcept
{
        return count == 0 ? 0.0 : sigma / std::sqrt(static_cast<double>(count));
}

AdevSeries allan_deviation(const FractionalFreqSeries& y, const std::vector<double>& taus)
{
        if (!(y.gate_s > 0))
        {
                throw std::invalid_argument("gate time must be positive");
        }
        const std::size_t k_total = y.y.size();

        // Phase in seconds; the second difference of x is tau times a
        // difference of adjacent tau-averages of y.
        std::vector<double> x(k_total + 1, 0.0);
        for (std::size_t i = 0; i < k_total; ++i)
        {
                x[i + 1] = x[i] + y.y[i] * y.gate_s;
        }

        AdevSeries out;
        double last_tau = 0;
        for (const double tau : taus)
        {
                const double ratio = tau / y.gate_s;
                const auto m = static_cast<std::size_t>(std::llround(ratio));
                if (m == 0 || std::abs(ratio - static_cast<double>(m)) > 1e-6 * ratio)
                {
                        throw std::invalid_argument("tau " + std::to_string(tau) + " s is not a multiple of the gate");
                }
                if (tau <= last_tau)
                {
                        throw std::invalid_argument("taus must be increasing");
                }
                last_tau = tau;
                if (k_total < 3 * m)
                {
                        throw std::invalid_argument("insufficient data for tau " + std::to_string(tau) + " s");
                }
                const std::size_t terms = k_total + 1 - 2 * m;
                const double t = static_cast<double>(m) * y.gate_s;
                double acc = 0;
                for (std::size_t i = 0; i < terms; ++i)
                {
                        const double d = x[i + 2 * m] - 2.0 * x[i + m] + x[i];
                        acc += d * d;
                }
                out.push_back({t, std::sqrt(acc / (2.0 * t * t * static_cast<double>(terms))), terms});
        }
        return out;
}

std::vector<double> octave_taus(const FractionalFreqSeries& y, double tau_min, double tau_max)
{
        std::vector<double> out;
        const double limit = std::min(tau_max, static_cast<double>(y.y.size()) * y.gate_s / 3.0);
        for (std::size_t decade = 1; decade < std::numeric_limits<std::size_t>::max() / 10; decade *= 10)
        {
                for (const std::size_t mult : {1, 2, 5})
                {
                        const double tau = static_cast<double>(decade * mult) * y.gate_s;
                        if (tau > limit * (1 + 1e-12))
                        {
                                return out;
                        }
                        if (tau >= tau_min * (1 - 1e-12))
                        {
                                out.push_back(tau);
                        }
                }
        }
        return out;
}

RejectionSpectrum rejection_spectrum(const PsdEstimate& free, const PsdEstimate& compensated)
{
        require_same_bins(free, compensated);
        RejectionSpectrum out;
        out.frequency_hz = free.frequency_hz;
        out.db.resize(free.values.size());
        for (std::size_t k = 0; k < out.db.size(); ++k)
        {
                const double a = free.values[k];
                const double b = compensated.values[k];
                if (a == 0 && b == 0)
                {
                        out.db[k] = 0.0;
                }
                else if (a == 0)
                {
                        out.db[k] = std::numeric_limits<double>::infinity();
                }
                else if (b == 0)
                {
                        out.db[k] = -std::numeric_limits<double>::infinity();
                }
                else
                {
                        out.db[k] = 10.0 * std::log10(b / a);
                }
        }
        return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y, double x_lo, double x_hi)
{
        if (x.size() != y.size())
        {
                throw std::invalid_argument("slope fit needs matching x and y");
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
                if (x[i] < x_lo || x[i] > x_hi || !(x[i] > 0) || !(y[i] > 0))
                {
                        continue;
                }
                const double lx = std::log10(x[i]);
                const double ly = std::log10(y[i]);
                sx += lx;
                sy += ly;
                sxx += lx * lx;
                sxy += lx * ly;
                ++n;
        }
        if (n < 2)
        {
                throw std::invalid_argument("slope fit needs at least two points in range");
        }
        const double nd = static_cast<double>(n);
        return (nd * sxy - sx * sy) / (nd * sxx - sx * sx);
}

double loglog_slope(const AdevSeries& adev, double tau_lo, double tau_hi)
{
        std::vector<double> x, y;
        for (const auto& p : adev)
        {
                x.push_back(p.tau_s);
                y.push_back(p.sigma);
        }
        return loglog_slope(x, y, tau_lo, tau_hi);
}

double loglog_slope(const PsdEstimate& psd, double f_lo, double f_hi)
{
        return loglog_slope(psd.frequency_hz, psd.values, f_lo, f_hi);
}

double adev_at(const AdevSeries& adev, double tau_s)
{
        for (const auto& p : adev)
        {
                if (std::abs(p.tau_s - tau_s) <= 1e-9 * tau_s)
                {
                        return p.sigma;
                }
        }
        return std::numeric_limits<double>::quiet_NaN();
}
}
