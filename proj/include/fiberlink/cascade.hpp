#pragma once

#include "fiberlink/metrology.hpp"
#include "fiberlink/power_law.hpp"
#include "fiberlink/servo.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fiberlink
{
inline constexpr std::size_t max_cascade_segments = 64;

struct RouteSpec
{
        double total_length_km = 0.0;
        double total_loss_db = 0.0;
        PowerLawNoiseModel lineic_noise{{}, true};
        double max_segment_loss_db = 0.0;
        // Compared against each segment's delay cap.
        double min_loop_bandwidth_hz = 0.0;
        double group_velocity_m_per_s = 2.0e8;
};

struct CascadeSegment
{
        std::size_t id = 0;
        double length_km = 0.0;
        double loss_db = 0.0;
        double tau_oneway_s = 0.0;
        double loop_bandwidth_cap_hz = 0.0;
};

enum class StationFunction
{
        send_back,
        amplify_filter,
        compensate_next
};

std::string to_string(StationFunction function);

struct Station
{
        std::size_t index = 0;
        double position_km = 0.0;
        std::vector<StationFunction> functions;
        std::string repeater;
};

struct CascadePlan
{
        RouteSpec route;
        std::vector<CascadeSegment> segments;
        // Interior stations only, between consecutive segments.
        std::vector<Station> stations;
        double total_length_km = 0.0;
        double total_loss_db = 0.0;
};

// Raised when no equal split up to max_cascade_segments satisfies the route.
class PlanError : public std::runtime_error
{
public:
        using std::runtime_error::runtime_error;
};

// Smallest N in [1, 64] whose equal segments meet both the loss and the
// bandwidth constraint.
CascadePlan plan_cascade(const RouteSpec& route);

// Throws PlanError if a plan violates its own constraints.
void check_plan(const CascadePlan& plan);

enum class ResidualModel
{
        // residual_transfer_ratio times the free-running segment PSD.
        delay_limited,
        // Full discrete closed-loop response of each segment's servo.
        closed_loop
};

struct PredictionOptions
{
        ResidualModel model = ResidualModel::delay_limited;
        double fs_hz = 10e3;
        double nu0_hz = 1.944e14;
        // First-order measurement filter before counting; 0 disables it.
        double measurement_bandwidth_hz = 10.0;
        // closed_loop only: servo bandwidth as a fraction of each segment cap.
        double bandwidth_fraction = default_bandwidth_fraction;
        double integrator_corner_ratio = default_integrator_corner_ratio;
        std::size_t cells_per_segment = 64;
        // closed_loop only: white PM at each segment's two detectors, rad^2/Hz.
        double detection_white_pm = default_detection_noise_rad2_per_hz;
        // Extra white PM per repeater station, rad^2/Hz.
        double station_white_pm = 0.0;
};

struct CascadePrediction
{
        std::vector<double> taus;
        // Allan variance contribution of each segment, per tau.
        std::vector<std::vector<double>> segment_variance;
        std::vector<double> station_variance;
        AdevSeries adev;
};

// Segments are independent, so their Allan variances add.
CascadePrediction predict_cascade(const CascadePlan& plan, const PowerLawNoiseModel& lineic_noise,
                                  const std::vector<double>& taus, const PredictionOptions& options = {});

AdevSeries predict_cascade_adev(const CascadePlan& plan, const PowerLawNoiseModel& lineic_noise,
                                const std::vector<double>& taus, const PredictionOptions& options = {});

// Allan variance of a phase PSD seen through a first-order measurement filter:
// 2 int S_y(f) |H(f)|^2 sin^4(pi f tau) / (pi f tau)^2 df, S_y = (f / nu0)^2 S_phi.
template <typename Psd>
double allan_variance_from_phase_psd(const Psd& s_phi, double tau, double nu0_hz, double measurement_bandwidth_hz,
                                     double f_max);

// Equal split of a route into n segments, without constraint checks.
CascadePlan split_route(const RouteSpec& route, std::size_t n);

// Single-span link of one segment carrying the route's lineic noise.
LinkTopology segment_link(const CascadePlan& plan, std::size_t segment);

// Sum of the residuals of every segment, each simulated as an independent
// compensated link with a servo set as in options. Segment i draws from
// derive_seed(sim.seed, "cascade-segment", i).
PhaseSeries simulate_cascade_residual(const CascadePlan& plan, const SimConfig& sim,
                                      const PredictionOptions& options = {});
}

#include "fiberlink/detail/allan_integral.hpp"
