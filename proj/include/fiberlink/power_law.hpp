#pragma once

#include <vector>

namespace fiberlink
{
// One power-law term of a phase-noise PSD: h * f^(-alpha).
struct PowerLawTerm
{
        double alpha = 0.0;
        double h = 0.0;

        bool operator==(const PowerLawTerm&) const = default;
};

// S_phi(f) = sum_i h_i * f^(-alpha_i), in rad^2/Hz, or rad^2/Hz/km when lineic.
//
// The empty model is valid and denotes silence. Exponents are restricted to
// [0, 3]; coefficients must be finite and non-negative.
class PowerLawNoiseModel
{
public:
        static constexpr double max_alpha = 3.0;

        PowerLawNoiseModel() = default;
        PowerLawNoiseModel(std::vector<PowerLawTerm> terms, bool lineic);

        static PowerLawNoiseModel white_pm(double h0);

        const std::vector<PowerLawTerm>& terms() const noexcept
        {
                return terms_;
        }

        bool lineic() const noexcept
        {
                return lineic_;
        }

        // True when every coefficient is zero.
        bool silent() const noexcept;

        double psd(double f) const;

        // Lineic model times a fiber length: the lumped PSD of that length.
        PowerLawNoiseModel over_length(double length_km) const;

        PowerLawNoiseModel scaled(double factor) const;

        // Concatenates the terms of a model with the same lineic flag.
        PowerLawNoiseModel& operator+=(const PowerLawNoiseModel& other);

        bool operator==(const PowerLawNoiseModel&) const = default;

private:
        std::vector<PowerLawTerm> terms_;
        bool lineic_ = false;
};
}
