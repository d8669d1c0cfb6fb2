#include "fiberlink/phase_series.hpp"

#include <cmath>
#include <stdexcept>

namespace fiberlink
{
void validate(const PhaseSeries& series)
{
        if (!(series.fs > 0) || !std::isfinite(series.fs))
        {
                throw std::invalid_argument("phase series sample rate must be positive");
        }
        for (const double v : series.samples)
        {
                if (!std::isfinite(v))
                {
                        throw std::invalid_argument("phase series contains a non-finite sample");
                }
        }
}

PhaseSeries slice(const PhaseSeries& series, std::size_t first, std::size_t count)
{
        if (first > series.size() || count > series.size() - first)
        {
                throw std::out_of_range("slice exceeds phase series");
        }
        PhaseSeries out;
        out.fs = series.fs;
        out.t0 = series.time_at(first);
        out.samples.assign(series.samples.begin() + static_cast<std::ptrdiff_t>(first),
                           series.samples.begin() + static_cast<std::ptrdiff_t>(first + count));
        return out;
}

PhaseSeries sum(const PhaseSeries& a, const PhaseSeries& b)
{
        if (a.size() != b.size() || a.fs != b.fs)
        {
                throw std::invalid_argument("cannot sum phase series with different sampling");
        }
        PhaseSeries out = a;
        for (std::size_t i = 0; i < out.size(); ++i)
        {
                out.samples[i] += b.samples[i];
        }
        return out;
}
}
