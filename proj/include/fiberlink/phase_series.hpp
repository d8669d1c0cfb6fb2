#pragma once

#include <cstddef>
#include <vector>

namespace fiberlink
{
// Uniformly sampled phase signal, in rad.
struct PhaseSeries
{
        std::vector<double> samples;
        double fs = 1.0;
        double t0 = 0.0;

        std::size_t size() const noexcept
        {
                return samples.size();
        }

        double duration() const noexcept
        {
                return static_cast<double>(samples.size()) / fs;
        }

        double time_at(std::size_t i) const noexcept
        {
                return t0 + static_cast<double>(i) / fs;
        }
};

// Throws std::invalid_argument when fs <= 0 or a sample is not finite.
void validate(const PhaseSeries& series);

PhaseSeries slice(const PhaseSeries& series, std::size_t first, std::size_t count);

PhaseSeries sum(const PhaseSeries& a, const PhaseSeries& b);
}
