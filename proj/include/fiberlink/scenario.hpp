#pragma once

#include "fiberlink/cascade.hpp"
#include "fiberlink/csv.hpp"
#include "fiberlink/link.hpp"
#include "fiberlink/metrology.hpp"
#include "fiberlink/servo.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fiberlink
{
inline constexpr std::size_t default_max_samples = 50'000'000;

struct ServoSection
{
        bool enabled = true;
        // Either an absolute bandwidth or a fraction of the delay cap.
        std::optional<double> loop_bandwidth_hz;
        double loop_bandwidth_fraction = default_bandwidth_fraction;
        double integrator_corner_ratio = default_integrator_corner_ratio;
        double actuator_range_hz = 1e6;
        PowerLawNoiseModel detection_noise = PowerLawNoiseModel::white_pm(default_detection_noise_rad2_per_hz);
};

struct SimSection
{
        double fs_hz = 10e3;
        double duration_s = 0.0;
        std::optional<std::uint64_t> seed;
        std::size_t cells_per_span = default_cells_per_span;
        std::size_t max_samples = default_max_samples;
};

struct AnalysisSection
{
        double welch_segment_s = 200.0;
        double welch_overlap = 0.5;
        double counter_gate_s = 1e-3;
        bool tracking_filter = true;
        double tracking_bandwidth_hz = 10.0;
        double unfiltered_bandwidth_hz = 250.0;
        std::vector<double> taus_s{1, 2, 5, 10, 20, 50, 100};
        double rejection_probe_hz = 1.0;
        // Band used for the slope fit of the filtered residual ADEV.
        double slope_tau_low_s = 1.0;
        double slope_tau_high_s = 100.0;
        double integration_low_hz = 1.0;
        double integration_high_hz = 1000.0;
};

struct OutputSection
{
        std::string directory;
        bool export_time_series = false;
        std::size_t time_series_decimation = 1;
};

struct Scenario
{
        std::string name;
        LinkConfig link;
        // Lineic noise per span id.
        std::map<std::string, PowerLawNoiseModel> noise;
        ServoSection servo;
        SimSection sim;
        AnalysisSection analysis;
        OutputSection outputs;
};

struct RouteScenario
{
        std::string name;
        std::uint64_t seed = 0;
        RouteSpec route;
        // Duration of the emitted single-segment scenario.
        double segment_duration_s = 200.0;
        std::vector<double> taus_s{1, 10, 100, 1000};
        PredictionOptions prediction;
        OutputSection outputs;
};

struct ValidationResult
{
        std::vector<std::string> errors;
        std::vector<std::string> warnings;

        bool ok() const noexcept
        {
                return errors.empty();
        }
};

class ConfigError : public std::runtime_error
{
public:
        explicit ConfigError(std::vector<std::string> errors);

        const std::vector<std::string>& errors() const noexcept
        {
                return errors_;
        }

private:
        std::vector<std::string> errors_;
};

// Checks a scenario or route file and reports every problem at once.
ValidationResult validate_config(const std::filesystem::path& path);

bool is_route_config(const std::filesystem::path& path);

// Throw ConfigError carrying every validation error.
Scenario load_scenario(const std::filesystem::path& path);
RouteScenario load_route(const std::filesystem::path& path);

// Spans carry the noise from the scenario's noise section.
LinkTopology scenario_link(const Scenario& scenario);

ServoConfig scenario_servo(const Scenario& scenario, const LinkTopology& link);

struct RejectionSummary
{
        double probe_hz = 1.0;
        double engine_db = 0.0;
        double configured_analytic_db = 0.0;
        double uniform_analytic_db = 0.0;
        double rule_of_thumb_db = 0.0;
};

struct RunReport
{
        std::string scenario_name;
        std::uint64_t seed = 0;
        double fs_hz = 0.0;
        double duration_s = 0.0;
        double one_way_delay_s = 0.0;
        double loop_bandwidth_hz = 0.0;
        double loop_bandwidth_cap_hz = 0.0;
        double lock_acquired_at_s = 0.0;
        BudgetReport budget;
        RejectionSummary rejection;
        double free_psd_at_probe = 0.0;
        double integrated_phase_rad = 0.0;
        double integrated_phase_free_rad = 0.0;
        AdevSeries residual_filtered;
        AdevSeries residual_unfiltered;
        AdevSeries correction;
        double adev_slope = 0.0;
        double white_pm_coefficient = 0.0;
        double floor = 0.0;
        std::vector<std::string> warnings;
        std::vector<std::string> artifacts;
};

// Runs the free-running and compensated simulations and writes every CSV
// artifact plus report.txt into output_dir.
RunReport run_scenario(const std::filesystem::path& path, const std::filesystem::path& output_dir);

RunReport run_scenario(const Scenario& scenario, const std::filesystem::path& output_dir);

std::string format_report(const RunReport& report);

struct PlanOutput
{
        CascadePlan plan;
        CascadePrediction prediction;
        std::vector<std::string> artifacts;
};

// Plans the cascade and writes plan.csv, prediction.csv and a runnable
// single-segment scenario.
PlanOutput run_plan(const std::filesystem::path& path, const std::filesystem::path& output_dir);

// Overlapping ADEV at octave taus of a (t_s, phase_rad) or (t_s, y) CSV.
// Phase is counted with a gate of one sample period.
AdevSeries analyze_adev(const std::filesystem::path& csv_path, double nu0_hz);

// Welch PSD of a (t_s, phase_rad) CSV; segment_s <= 0 picks an eighth of
// the record.
PsdEstimate analyze_psd(const std::filesystem::path& csv_path, double segment_s);
}
