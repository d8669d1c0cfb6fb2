#include "fiberlink/noise.hpp"

#include "fiberlink/fft.hpp"
#include "fiberlink/seeding.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>

namespace fiberlink
{
PhaseSeries synth_power_law_phase_noise(const PowerLawNoiseModel& model, double fs, std::size_t n, std::uint64_t seed)
{
        if (model.lineic())
        {
                throw std::invalid_argument("lineic noise models must be synthesized through fiber_noise_field");
        }
        if (!(fs > 0) || !std::isfinite(fs))
        {
                throw std::invalid_argument("sample rate must be positive");
        }
        if (n < 2)
        {
                throw std::invalid_argument("need at least two samples");
        }

        PhaseSeries out;
        out.fs = fs;
        out.samples.assign(n, 0.0);
        if (model.silent())
        {
                return out;
        }

        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss;

        const std::size_t half = n / 2;
        std::vector<std::complex<double>> spectrum(half + 1);
        const double df = fs / static_cast<double>(n);
        const double nd = static_cast<double>(n);
        for (std::size_t k = 1; k <= half; ++k)
        {
                const double s = model.psd(static_cast<double>(k) * df);
                const double a = gauss(rng);
                const double b = gauss(rng);
                if (2 * k == n)
                {
                        // Nyquist bin is real and appears once.
                        spectrum[k] = {std::sqrt(s * fs * nd) * a, 0.0};
                }
                else
                {
                        const double scale = std::sqrt(s * fs * nd / 4.0);
                        spectrum[k] = {scale * a, scale * b};
                }
        }

        fft::inverse_real(spectrum, out.samples);
        for (auto& v : out.samples)
        {
                v /= nd;
        }
        return out;
}

NoiseField fiber_noise_field(const FiberSpan& span, std::size_t n_cells, double fs, std::size_t n, std::uint64_t seed)
{
        if (n_cells == 0)
        {
                throw std::invalid_argument("a noise field needs at least one cell");
        }
        if (!span.lineic_noise.lineic() && !span.lineic_noise.terms().empty())
        {
                throw std::invalid_argument("span " + span.id + " noise model is not lineic");
        }
        if (!(span.length_km > 0))
        {
                throw std::invalid_argument("span " + span.id + " has no length");
        }

        const double cell_km = span.length_km / static_cast<double>(n_cells);
        const auto cell_model = PowerLawNoiseModel(span.lineic_noise.terms(), true).over_length(cell_km);

        NoiseField field;
        field.span_id = span.id;
        field.fs = fs;
        field.duration_s = static_cast<double>(n) / fs;
        field.cells.reserve(n_cells);
        for (std::size_t k = 0; k < n_cells; ++k)
        {
                NoiseCell cell;
                cell.position_km = (static_cast<double>(k) + 0.5) * cell_km;
                cell.series = synth_power_law_phase_noise(cell_model, fs, n, derive_seed(seed, span.id, k));
                field.cells.push_back(std::move(cell));
        }
        return field;
}

PsdEstimate estimate_lineic_psd(const NoiseField& field, const FiberSpan& span, const WelchOptions& options)
{
        if (field.cells.empty())
        {
                throw std::invalid_argument("noise field is empty");
        }
        if (!(span.length_km > 0))
        {
                throw std::invalid_argument("span length must be positive");
        }
        PsdEstimate total;
        for (const auto& cell : field.cells)
        {
                PsdEstimate p = welch_psd(cell.series, options);
                if (total.values.empty())
                {
                        total = std::move(p);
                        continue;
                }
                for (std::size_t i = 0; i < p.values.size(); ++i)
                {
                        total.values[i] += p.values[i];
                }
        }
        for (auto& v : total.values)
        {
                v /= span.length_km;
        }
        return total;
}

PhaseSeries field_sum(const NoiseField& field)
{
        if (field.cells.empty())
        {
                throw std::invalid_argument("noise field is empty");
        }
        PhaseSeries out = field.cells.front().series;
        for (std::size_t k = 1; k < field.cells.size(); ++k)
        {
                out = sum(out, field.cells[k].series);
        }
        return out;
}
}
