#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fiberlink
{
template <typename Psd>
double allan_variance_from_phase_psd(const Psd& s_phi, const double tau, const double nu0_hz,
                                     const double measurement_bandwidth_hz, const double f_max)
{
        constexpr double pi = std::numbers::pi;

        const auto filter = [&](double f)
        {
                if (measurement_bandwidth_hz <= 0)
                {
                        return 1.0;
                }
                const double r = f / measurement_bandwidth_hz;
                return 1.0 / (1.0 + r * r);
        };

        // 2 (f/nu0)^2 S |H|^2 sin^4(pi f tau) / (pi f tau)^2 with the f^2 cancelled.
        const double scale = 2.0 / (pi * pi * nu0_hz * nu0_hz * tau * tau);

        // Resolve the sin^4 oscillation over the first periods, then use its
        // mean of 3/8 where the PSD varies slowly across one period.
        const double f_osc = std::min(f_max, 64.0 / tau);
        const int periods = static_cast<int>(std::ceil(f_osc * tau));
        const int n_fine = std::max(2, periods * 48);
        const double h = f_osc / n_fine;

        double fine = 0;
        for (int i = 1; i <= n_fine; ++i)
        {
                // midpoint rule; the integrand vanishes at f = 0
                const double f = (i - 0.5) * h;
                const double s = std::sin(pi * f * tau);
                fine += s_phi(f) * filter(f) * s * s * s * s;
        }
        fine *= h;

        double coarse = 0;
        if (f_max > f_osc)
        {
                constexpr int n_log = 4096;
                const double log_lo = std::log(f_osc);
                const double step = (std::log(f_max) - log_lo) / n_log;
                for (int i = 0; i < n_log; ++i)
                {
                        const double f = std::exp(log_lo + (i + 0.5) * step);
                        coarse += s_phi(f) * filter(f) * f * step;
                }
                coarse *= 3.0 / 8.0;
        }

        return scale * (fine + coarse);
}
}
