#include "fiberlink/power_law.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fiberlink
{
PowerLawNoiseModel::PowerLawNoiseModel(std::vector<PowerLawTerm> terms, bool lineic)
    : terms_(std::move(terms)), lineic_(lineic)
{
        for (const auto& t : terms_)
        {
                if (!std::isfinite(t.alpha) || t.alpha < 0 || t.alpha > max_alpha)
                {
                        throw std::invalid_argument("power-law exponent " + std::to_string(t.alpha) +
                                                    " outside [0, 3]");
                }
                if (!std::isfinite(t.h) || t.h < 0)
                {
                        throw std::invalid_argument("power-law coefficient must be finite and non-negative");
                }
        }
}

PowerLawNoiseModel PowerLawNoiseModel::white_pm(double h0)
{
        return PowerLawNoiseModel({{0.0, h0}}, false);
}

bool PowerLawNoiseModel::silent() const noexcept
{
        for (const auto& t : terms_)
        {
                if (t.h != 0)
                {
                        return false;
                }
        }
        return true;
}

double PowerLawNoiseModel::psd(double f) const
{
        double s = 0;
        for (const auto& t : terms_)
        {
                s += t.alpha == 0 ? t.h : t.h * std::pow(f, -t.alpha);
        }
        return s;
}

PowerLawNoiseModel PowerLawNoiseModel::over_length(double length_km) const
{
        if (!lineic_)
        {
                throw std::logic_error("over_length needs a lineic model");
        }
        if (!(length_km >= 0))
        {
                throw std::invalid_argument("length must be non-negative");
        }
        PowerLawNoiseModel out = scaled(length_km);
        out.lineic_ = false;
        return out;
}

PowerLawNoiseModel PowerLawNoiseModel::scaled(double factor) const
{
        if (!std::isfinite(factor) || factor < 0)
        {
                throw std::invalid_argument("scale factor must be finite and non-negative");
        }
        PowerLawNoiseModel out = *this;
        for (auto& t : out.terms_)
        {
                t.h *= factor;
        }
        return out;
}

PowerLawNoiseModel& PowerLawNoiseModel::operator+=(const PowerLawNoiseModel& other)
{
        if (other.lineic_ != lineic_ && !other.terms_.empty() && !terms_.empty())
        {
                throw std::invalid_argument("cannot add lineic and lumped models");
        }
        if (terms_.empty())
        {
                lineic_ = other.lineic_;
        }
        terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
        return *this;
}
}
