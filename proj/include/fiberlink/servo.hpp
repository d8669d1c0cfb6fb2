#pragma once

#include "fiberlink/link.hpp"
#include "fiberlink/noise.hpp"
#include "fiberlink/phase_series.hpp"
#include "fiberlink/power_law.hpp"

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fiberlink
{
// Raised for loop settings past the delay stability cap, or when the
// time-domain loop diverges.
class UnstableLoopError : public std::runtime_error
{
public:
        using std::runtime_error::runtime_error;
};

struct SimConfig
{
        double fs_hz = 10e3;
        double duration_s = 0.0;
        std::uint64_t seed = 0;

        std::size_t samples() const;
};

inline constexpr double default_bandwidth_fraction = 0.25;
inline constexpr double default_integrator_corner_ratio = 6.0;
inline constexpr double default_detection_noise_rad2_per_hz = 1e-8;

// Proportional + integral control of the AOM frequency from the halved
// round-trip beat phase. Gains are in rad/s per rad and rad/s^2 per rad.
struct ServoConfig
{
        double proportional_gain = 0.0;
        double integrator_gain = 0.0;
        double target_loop_bandwidth_hz = 0.0;
        double actuator_range_hz = 1e6;
        PowerLawNoiseModel detection_noise = PowerLawNoiseModel::white_pm(default_detection_noise_rad2_per_hz);
        bool enabled = true;

        // Slowest closed-loop time constant: the integrator corner.
        double time_constant_s() const noexcept;
};

// Kp = 2 pi B, integrator corner at B / corner_ratio.
ServoConfig servo_for_bandwidth(double bandwidth_hz, double integrator_corner_ratio = default_integrator_corner_ratio);

// default_bandwidth_fraction of the delay cap for a link of the given delay.
ServoConfig default_servo(double tau_oneway_s);

// 1 / (4 tau): the null of the round-trip plant, above which the loop
// cannot close.
double loop_bandwidth_limit(double tau_oneway_s);

// Throws std::invalid_argument for negative gains or range, and
// UnstableLoopError when the target bandwidth exceeds the cap.
void validate_servo(const ServoConfig& servo, double tau_oneway_s);

// Link noise as seen by the two detectors, with every delay rounded to whole
// samples. Cells enter only through these two sums, so cells that share a
// delay are indistinguishable to the loop.
struct LinkDrive
{
        double fs = 1.0;
        std::size_t total_delay = 0;
        // sum_k phi_k(t - (tau - tau_k)): free-running phase at the remote output.
        std::vector<double> forward;
        // sum_k phi_k(t - 2 tau + tau_k) + phi_k(t - tau_k): link part of the
        // round-trip beat at the input.
        std::vector<double> roundtrip;

        LinkDrive() = default;
        LinkDrive(double fs, std::size_t total_delay, std::size_t n);

        std::size_t size() const noexcept
        {
                return forward.size();
        }

        // Adds a source located delay_samples from the input. Samples before
        // the start are held at the first value.
        void add(std::span<const double> source, std::size_t delay_samples);
};

std::size_t delay_in_samples(double delay_s, double fs);

// Maps every cell to its link position and accumulates it.
LinkDrive make_drive(const LinkTopology& link, const std::vector<NoiseField>& fields, double fs);

// Same statistics as make_drive over fiber_noise_field outputs, but cells
// sharing a rounded delay are drawn as one process with their summed PSD.
// The bin at delay d uses derive_seed(seed, "link-delay-bin", d).
LinkDrive synth_link_drive(const LinkTopology& link, std::size_t cells_per_span, double fs, std::size_t n, std::uint64_t seed);

struct TransferResult
{
        PhaseSeries residual_phase;
        PhaseSeries correction_phase;
        PhaseSeries roundtrip_beat_phase;
        double lock_acquired_at_s = 0.0;
        std::size_t saturated_samples = 0;
        ServoConfig servo;
        SimConfig sim;

        std::size_t lock_index() const noexcept;
};

TransferResult simulate_free_running(const LinkTopology& link, const std::vector<NoiseField>& fields, const SimConfig& sim);

TransferResult simulate_free_running(const LinkTopology& link, const LinkDrive& drive, const SimConfig& sim);

TransferResult simulate_compensated(
        const LinkTopology& link,
        const std::vector<NoiseField>& fields,
        const ServoConfig& servo,
        const SimConfig& sim);

TransferResult simulate_compensated(
        const LinkTopology& link,
        const LinkDrive& drive,
        const ServoConfig& servo,
        const SimConfig& sim);

// The bare time-domain loop, with no stability pre-check. Detector noise
// spans may be empty. Throws UnstableLoopError on divergence.
TransferResult run_compensation_loop(
        const LinkDrive& drive,
        const ServoConfig& servo,
        std::span<const double> roundtrip_detector_noise,
        std::span<const double> output_detector_noise);

// --- analytic suppression ----------------------------------------------------

struct UniformDistribution
{
};

struct LumpedAt
{
        double z_fraction = 0.0;
};

// Piecewise-uniform noise along the link, positions as fractions of length.
struct ProfilePiece
{
        double start_fraction = 0.0;
        double end_fraction = 1.0;
        double weight = 1.0;
};

struct NoiseProfile
{
        std::vector<ProfilePiece> pieces;
};

using NoiseDistribution = std::variant<UniformDistribution, LumpedAt, NoiseProfile>;

// Low-frequency residual/free PSD ratio of an infinite-gain round-trip loop.
// A source at z_fraction of the link contributes (2 pi f tau z)^2, so uniform
// noise gives (1/3)(2 pi f tau)^2. Requires f < 1 / (4 tau).
double residual_transfer_ratio(double f, double tau_oneway_s, const NoiseDistribution& distribution);

// The common (f t_trip)^2 rule of thumb, without the 2 pi.
double rule_of_thumb_ratio(double f, double t_trip_s);

// Noise profile of a configured link, spans weighted by their PSD at f.
NoiseProfile link_noise_profile(const LinkTopology& link, double f);

// Frequency response of the discrete loop, matching run_compensation_loop.
class LoopModel
{
public:
        LoopModel(const ServoConfig& servo, double fs, std::size_t total_delay);

        // Residual at the output per unit phase of a cell d samples from the input.
        std::complex<double> cell_response(double f, std::size_t d) const;

        // Actuator phase per unit phase of a cell.
        std::complex<double> correction_response(double f, std::size_t d) const;

        // Residual per unit phase noise at the round-trip detector.
        std::complex<double> detector_response(double f) const;

private:
        struct Terms
        {
                std::complex<double> z_inv;
                std::complex<double> half_c;
                std::complex<double> denominator;
        };

        Terms terms(double f) const;

        ServoConfig servo_;
        double fs_;
        std::size_t total_delay_;
};
}
