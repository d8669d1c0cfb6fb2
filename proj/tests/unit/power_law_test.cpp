#include "fiberlink/power_law.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using fiberlink::PowerLawNoiseModel;
using fiberlink::PowerLawTerm;

TEST(PowerLaw, EmptyModelIsSilent)
{
        const PowerLawNoiseModel m;
        EXPECT_TRUE(m.silent());
        EXPECT_EQ(m.psd(1.0), 0.0);
}

TEST(PowerLaw, EvaluatesSumOfTerms)
{
        const PowerLawNoiseModel m({{0, 1e-8}, {2, 14}, {1.5, 3}}, false);
        EXPECT_DOUBLE_EQ(m.psd(1.0), 1e-8 + 14 + 3);
        EXPECT_NEAR(m.psd(10.0), 1e-8 + 0.14 + 3 * std::pow(10.0, -1.5), 1e-15);
        EXPECT_FALSE(m.silent());
}

TEST(PowerLaw, RejectsInvalidTerms)
{
        EXPECT_THROW(PowerLawNoiseModel({{3.5, 1}}, false), std::invalid_argument);
        EXPECT_THROW(PowerLawNoiseModel({{-0.1, 1}}, false), std::invalid_argument);
        EXPECT_THROW(PowerLawNoiseModel({{2, -1}}, false), std::invalid_argument);
        EXPECT_THROW(PowerLawNoiseModel({{2, std::numeric_limits<double>::infinity()}}, false), std::invalid_argument);
        EXPECT_THROW(PowerLawNoiseModel({{2, std::nan("")}}, false), std::invalid_argument);
        EXPECT_NO_THROW(PowerLawNoiseModel({{3, 0}}, false));
}

TEST(PowerLaw, OverLengthTurnsLineicIntoLumped)
{
        const PowerLawNoiseModel lineic({{2, 14}}, true);
        const auto lumped = lineic.over_length(22);
        EXPECT_FALSE(lumped.lineic());
        EXPECT_DOUBLE_EQ(lumped.psd(1.0), 308.0);
        EXPECT_THROW(lumped.over_length(1), std::logic_error);
}

TEST(PowerLaw, AdditionConcatenatesTerms)
{
        PowerLawNoiseModel a({{2, 1}}, true);
        a += PowerLawNoiseModel({{2, 2}}, true);
        EXPECT_DOUBLE_EQ(a.psd(1.0), 3.0);
        EXPECT_THROW(a += PowerLawNoiseModel({{0, 1}}, false), std::invalid_argument);
}

TEST(PowerLaw, ScaledMultipliesCoefficients)
{
        const PowerLawNoiseModel m({{1, 2}}, false);
        EXPECT_DOUBLE_EQ(m.scaled(3).psd(1.0), 6.0);
        EXPECT_THROW(m.scaled(-1), std::invalid_argument);
}
