#include "fiberlink/cascade.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace fiberlink;

namespace
{
constexpr double pi = std::numbers::pi;
constexpr double nu0 = 1.944e14;

RouteSpec route(double km, double loss, double max_loss, double min_bw = 0.0)
{
        RouteSpec r;
        r.total_length_km = km;
        r.total_loss_db = loss;
        r.max_segment_loss_db = max_loss;
        r.min_loop_bandwidth_hz = min_bw;
        r.lineic_noise = PowerLawNoiseModel({{2.0, 1.4}}, true);
        return r;
}

// Smallest feasible N by direct enumeration, 0 when none.
std::size_t brute_force_segments(const RouteSpec& r)
{
        for (std::size_t n = 1; n <= 64; ++n)
        {
                const double seg_km = r.total_length_km / static_cast<double>(n);
                const double tau = seg_km * 1000.0 / r.group_velocity_m_per_s;
                const bool loss = r.total_loss_db / static_cast<double>(n) <= r.max_segment_loss_db * (1 + 1e-9);
                const bool bw = 1.0 / (4.0 * tau) * (1 + 1e-9) >= r.min_loop_bandwidth_hz;
                if (loss && bw)
                {
                        return n;
                }
        }
        return 0;
}

std::string plan_error(const RouteSpec& r)
{
        try
        {
                plan_cascade(r);
        }
        catch (const PlanError& e)
        {
                return e.what();
        }
        return {};
}
}

TEST(Plan, ShortLinkNeedsOneSegment)
{
        const auto plan = plan_cascade(route(108, 38, 40));
        ASSERT_EQ(plan.segments.size(), 1u);
        EXPECT_TRUE(plan.stations.empty());
        EXPECT_NEAR(plan.segments[0].tau_oneway_s, 0.54e-3, 1e-12);
}

TEST(Plan, LongLinkSplitsIntoFour)
{
        const auto plan = plan_cascade(route(600, 167, 42));
        ASSERT_EQ(plan.segments.size(), 4u);
        for (const auto& s : plan.segments)
        {
                EXPECT_NEAR(s.length_km, 150.0, 1e-9);
                EXPECT_NEAR(s.loss_db, 41.75, 1e-9);
                EXPECT_NEAR(s.loop_bandwidth_cap_hz, 1.0 / (4 * 0.75e-3), 1e-6);
        }
        ASSERT_EQ(plan.stations.size(), 3u);
        EXPECT_NEAR(plan.stations[1].position_km, 300.0, 1e-9);
        EXPECT_EQ(plan.stations[0].functions.size(), 3u);
        EXPECT_EQ(plan.stations[0].repeater, "laser phase-locked to the incoming signal");
        EXPECT_NEAR(plan.total_loss_db, 167.0, 1e-9);
}

TEST(Plan, BandwidthCanBind)
{
        const auto plan = plan_cascade(route(600, 100, 50, 1000));
        EXPECT_EQ(plan.segments.size(), 12u);
}

TEST(Plan, UnsatisfiableConstraints)
{
        EXPECT_NE(plan_error(route(600, 167, 1)).find("loss constraint unsatisfiable within N <= 64"), std::string::npos);
        EXPECT_NE(plan_error(route(600, 167, 42, 1e6)).find("bandwidth constraint unsatisfiable"), std::string::npos);
        EXPECT_NE(plan_error(route(-1, 167, 42)).find("route length"), std::string::npos);
}

TEST(Plan, AgreesWithBruteForce)
{
        std::mt19937_64 rng(2024);
        std::uniform_real_distribution<double> km(10, 3000), loss_per_km(0.15, 0.35), max_loss(5, 60), bw(0, 3000);
        int feasible = 0;
        for (int trial = 0; trial < 500; ++trial)
        {
                const double length = km(rng);
                const auto r = route(length, length * loss_per_km(rng), max_loss(rng), bw(rng));
                const std::size_t expected = brute_force_segments(r);
                if (expected == 0)
                {
                        EXPECT_THROW(plan_cascade(r), PlanError);
                        continue;
                }
                ++feasible;
                const auto plan = plan_cascade(r);
                EXPECT_EQ(plan.segments.size(), expected);
                EXPECT_NO_THROW(check_plan(plan));
        }
        EXPECT_GT(feasible, 100);
}

TEST(Plan, CheckPlanCatchesViolations)
{
        auto plan = plan_cascade(route(600, 167, 42));
        auto heavy = plan;
        heavy.segments[2].loss_db = 50;
        EXPECT_THROW(check_plan(heavy), PlanError);
        auto short_plan = plan;
        short_plan.segments[0].length_km = 100;
        EXPECT_THROW(check_plan(short_plan), PlanError);
        auto no_station = plan;
        no_station.stations.pop_back();
        EXPECT_THROW(check_plan(no_station), PlanError);
        auto lazy = plan;
        lazy.stations[0].functions.pop_back();
        EXPECT_THROW(check_plan(lazy), PlanError);
        EXPECT_THROW(split_route(route(600, 167, 42), 0), PlanError);
}

TEST(AllanIntegral, WhiteFrequencyNoise)
{
        const double h0 = 1e-26;
        const auto s_phi = [&](double f) { return h0 * nu0 * nu0 / (f * f); };
        for (const double tau : {1.0, 10.0, 100.0})
        {
                const double v = allan_variance_from_phase_psd(s_phi, tau, nu0, 0.0, 5000.0);
                EXPECT_NEAR(v / (h0 / (2 * tau)), 1.0, 0.01) << tau;
        }
}

TEST(AllanIntegral, FilteredWhitePhaseNoise)
{
        const double h = 1e-6;
        const double bw = 10.0;
        const auto s_phi = [&](double) { return h; };
        for (const double tau : {10.0, 100.0})
        {
                const double v = allan_variance_from_phase_psd(s_phi, tau, nu0, bw, 5000.0);
                const double expected = 3 * h * bw / (8 * pi * nu0 * nu0 * tau * tau);
                EXPECT_NEAR(v / expected, 1.0, 0.02) << tau;
        }
}

TEST(Prediction, SegmentsAddInQuadrature)
{
        const auto r = route(600, 167, 42);
        const auto plan = plan_cascade(r);
        PredictionOptions opt;
        opt.station_white_pm = 1e-6;
        const auto p = predict_cascade(plan, r.lineic_noise, {1, 10, 100}, opt);
        ASSERT_EQ(p.segment_variance.size(), 4u);
        for (std::size_t t = 0; t < p.taus.size(); ++t)
        {
                double total = p.station_variance[t];
                for (const auto& seg : p.segment_variance)
                {
                        total += seg[t];
                        EXPECT_NEAR(seg[t], p.segment_variance[0][t], 1e-12 * seg[t]);
                }
                EXPECT_NEAR(p.adev[t].sigma * p.adev[t].sigma, total, 1e-12 * total);
        }
}

TEST(Prediction, MonotoneInNoiseAndStations)
{
        const auto r = route(600, 167, 42);
        const auto plan = plan_cascade(r);
        const std::vector<double> taus{1, 10, 100};
        const auto base = predict_cascade_adev(plan, r.lineic_noise, taus);
        const auto louder = predict_cascade_adev(plan, r.lineic_noise.scaled(4.0), taus);
        PredictionOptions noisy_stations;
        noisy_stations.station_white_pm = 1e-4;
        const auto stations = predict_cascade_adev(plan, r.lineic_noise, taus, noisy_stations);
        for (std::size_t t = 0; t < taus.size(); ++t)
        {
                EXPECT_NEAR(louder[t].sigma / base[t].sigma, 2.0, 1e-9);
                EXPECT_GT(stations[t].sigma, base[t].sigma);
                if (t > 0)
                {
                        EXPECT_LT(base[t].sigma, base[t - 1].sigma);
                }
        }
}

TEST(Prediction, DelayLimitedSplitScalesWithSegmentCount)
{
        const auto r = route(600, 167, 200);
        const std::vector<double> taus{10, 100};
        const auto one = predict_cascade_adev(split_route(r, 1), r.lineic_noise, taus);
        const auto two = predict_cascade_adev(split_route(r, 2), r.lineic_noise, taus);
        const auto three = predict_cascade_adev(split_route(r, 3), r.lineic_noise, taus);
        for (std::size_t t = 0; t < taus.size(); ++t)
        {
                EXPECT_NEAR(one[t].sigma / two[t].sigma, 2.0, 0.2);
                EXPECT_NEAR(one[t].sigma / three[t].sigma, 3.0, 0.3);
        }
}

TEST(Prediction, ClosedLoopStaysAboveDelayLimit)
{
        const auto r = route(600, 167, 42);
        const auto plan = plan_cascade(r);
        PredictionOptions closed;
        closed.model = ResidualModel::closed_loop;
        closed.detection_white_pm = 0.0;
        const auto a = predict_cascade_adev(plan, r.lineic_noise, {10, 100});
        const auto b = predict_cascade_adev(plan, r.lineic_noise, {10, 100}, closed);
        for (std::size_t t = 0; t < a.size(); ++t)
        {
                // Finite gain leaves more than the infinite-gain limit.
                EXPECT_GT(b[t].sigma, 0.9 * a[t].sigma);
                EXPECT_LT(b[t].sigma, 10.0 * a[t].sigma);
        }
}

TEST(CascadeSimulation, DeterministicAndSized)
{
        const auto r = route(200, 50, 30);
        const auto plan = plan_cascade(r);
        ASSERT_EQ(plan.segments.size(), 2u);
        const SimConfig sim{2000.0, 5.0, 12};
        PredictionOptions opt;
        opt.fs_hz = 2000.0;
        opt.cells_per_segment = 8;
        const auto a = simulate_cascade_residual(plan, sim, opt);
        const auto b = simulate_cascade_residual(plan, sim, opt);
        EXPECT_EQ(a.size(), 10000u);
        EXPECT_EQ(a.samples, b.samples);
        const auto link = segment_link(plan, 1);
        EXPECT_NEAR(link.total_length_km(), 100.0, 1e-9);
        EXPECT_THROW(segment_link(plan, 2), std::out_of_range);
}
