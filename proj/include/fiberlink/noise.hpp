#pragma once

#include "fiberlink/link.hpp"
#include "fiberlink/metrology.hpp"
#include "fiberlink/phase_series.hpp"
#include "fiberlink/power_law.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fiberlink
{
// Default number of cells a span is divided into.
inline constexpr std::size_t default_cells_per_span = 16;

// Frequency-domain synthesis: complex Gaussian bins scaled by
// sqrt(S_phi(f)), DC set to zero, inverse real FFT. Content below fs/n is
// not represented, so stability estimates beyond a tenth of the record
// length are unreliable.
//
// Deterministic for a fixed (model, fs, n, seed). Rejects lineic models.
PhaseSeries synth_power_law_phase_noise(const PowerLawNoiseModel& model, double fs, std::size_t n, std::uint64_t seed);

struct NoiseCell
{
        double position_km = 0.0;
        PhaseSeries series;
};

// Spatially resolved noise of one span. Positions are span-local.
struct NoiseField
{
        std::string span_id;
        double fs = 1.0;
        double duration_s = 0.0;
        std::vector<NoiseCell> cells;
};

// Splits the span into n_cells equal cells, each an independent process with
// PSD (L / n_cells) * S_lineic(f), positioned at its cell centre. Cell k uses
// derive_seed(seed, span.id, k).
NoiseField fiber_noise_field(const FiberSpan& span, std::size_t n_cells, double fs, std::size_t n, std::uint64_t seed);

// Summed-cell Welch PSD divided by the span length, in rad^2/Hz/km.
PsdEstimate estimate_lineic_psd(const NoiseField& field, const FiberSpan& span, const WelchOptions& options);

// Sum of all cell series of a field.
PhaseSeries field_sum(const NoiseField& field);
}
