#include "fiberlink/servo.hpp"

#include "fiberlink/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace fiberlink
{
namespace
{
constexpr double two_pi = 2.0 * std::numbers::pi;

// Lock is declared after this many loop time constants.
constexpr double lock_time_constants = 10.0;

// Sums terms that share an exponent so that PSD evaluation stays cheap.
PowerLawNoiseModel merge_terms(const PowerLawNoiseModel& model)
{
        std::map<double, double> by_alpha;
        for (const auto& t : model.terms())
        {
                by_alpha[t.alpha] += t.h;
        }
        std::vector<PowerLawTerm> terms;
        for (const auto& [alpha, h] : by_alpha)
        {
                terms.push_back({alpha, h});
        }
        return PowerLawNoiseModel(std::move(terms), model.lineic());
}

std::complex<double> z_pow(double w, double k)
{
        return std::polar(1.0, -w * k);
}

void check_sim(const SimConfig& sim, double tau)
{
        if (!(sim.fs_hz > 0))
        {
                throw std::invalid_argument("sample rate must be positive");
        }
        if (sim.duration_s < 100.0 * tau)
        {
                throw std::invalid_argument("simulation shorter than 100 one-way link delays");
        }
}
}

std::size_t SimConfig::samples() const
{
        if (!(fs_hz > 0) || !(duration_s > 0))
        {
                throw std::invalid_argument("simulation needs positive fs and duration");
        }
        return static_cast<std::size_t>(std::llround(fs_hz * duration_s));
}

double ServoConfig::time_constant_s() const noexcept
{
        if (proportional_gain > 0 && integrator_gain > 0)
        {
                return proportional_gain / integrator_gain;
        }
        if (proportional_gain > 0)
        {
                return 1.0 / proportional_gain;
        }
        if (integrator_gain > 0)
        {
                return 1.0 / std::sqrt(integrator_gain);
        }
        return 0.0;
}

ServoConfig servo_for_bandwidth(double bandwidth_hz, double integrator_corner_ratio)
{
        if (!(bandwidth_hz > 0) || !std::isfinite(bandwidth_hz))
        {
                throw std::invalid_argument("loop bandwidth must be positive");
        }
        if (!(integrator_corner_ratio > 0))
        {
                throw std::invalid_argument("integrator corner ratio must be positive");
        }
        ServoConfig servo;
        servo.proportional_gain = two_pi * bandwidth_hz;
        servo.integrator_gain = servo.proportional_gain * two_pi * bandwidth_hz / integrator_corner_ratio;
        servo.target_loop_bandwidth_hz = bandwidth_hz;
        return servo;
}

double loop_bandwidth_limit(double tau_oneway_s)
{
        if (!(tau_oneway_s > 0))
        {
                throw std::invalid_argument("one-way delay must be positive");
        }
        return 1.0 / (4.0 * tau_oneway_s);
}

ServoConfig default_servo(double tau_oneway_s)
{
        return servo_for_bandwidth(default_bandwidth_fraction * loop_bandwidth_limit(tau_oneway_s));
}

void validate_servo(const ServoConfig& servo, double tau_oneway_s)
{
        if (!(servo.proportional_gain >= 0) || !(servo.integrator_gain >= 0))
        {
                throw std::invalid_argument("servo gains must be non-negative");
        }
        if (!(servo.actuator_range_hz > 0))
        {
                throw std::invalid_argument("actuator range must be positive");
        }
        if (servo.detection_noise.lineic())
        {
                throw std::invalid_argument("detection noise must be a lumped model");
        }
        const double cap = loop_bandwidth_limit(tau_oneway_s);
        // A proportional gain of 2 pi B puts the unity-gain crossing near B.
        const double effective = std::max(servo.target_loop_bandwidth_hz, servo.proportional_gain / two_pi);
        if (effective > cap * (1.0 + 1e-9))
        {
                throw UnstableLoopError("loop bandwidth " + std::to_string(effective) +
                                        " Hz exceeds the delay limit of " + std::to_string(cap) + " Hz");
        }
}

// --- link drive ----------------------------------------------------------------

LinkDrive::LinkDrive(double fs_hz, std::size_t delay, std::size_t n)
    : fs(fs_hz), total_delay(delay), forward(n, 0.0), roundtrip(n, 0.0)
{
}

void LinkDrive::add(std::span<const double> source, std::size_t delay_samples)
{
        if (source.size() != size())
        {
                throw std::invalid_argument("source length does not match the drive");
        }
        if (delay_samples > total_delay)
        {
                throw std::out_of_range("source lies beyond the link end");
        }
        const std::size_t n = size();
        if (n == 0)
        {
                return;
        }
        const auto delayed = [&](std::size_t i, std::size_t lag) { return i >= lag ? source[i - lag] : source[0]; };

        const std::size_t to_output = total_delay - delay_samples;
        const std::size_t outbound = 2 * total_delay - delay_samples;
        for (std::size_t i = 0; i < n; ++i)
        {
                forward[i] += delayed(i, to_output);
                roundtrip[i] += delayed(i, outbound) + delayed(i, delay_samples);
        }
}

std::size_t delay_in_samples(double delay_s, double fs)
{
        if (!(delay_s >= 0) || !(fs > 0))
        {
                throw std::invalid_argument("delay and sample rate must be non-negative and positive");
        }
        return static_cast<std::size_t>(std::llround(delay_s * fs));
}

LinkDrive make_drive(const LinkTopology& link, const std::vector<NoiseField>& fields, double fs)
{
        std::size_t n = 0;
        for (const auto& field : fields)
        {
                if (field.fs != fs)
                {
                        throw std::invalid_argument("noise field '" + field.span_id + "' has a different sample rate");
                }
                for (const auto& cell : field.cells)
                {
                        if (n == 0)
                        {
                                n = cell.series.size();
                        }
                        else if (cell.series.size() != n)
                        {
                                throw std::invalid_argument("noise fields have different lengths");
                        }
                }
        }

        LinkDrive drive(fs, delay_in_samples(link.one_way_delay_s(), fs), n);
        for (const auto& field : fields)
        {
                const double offset = link.span_offset_km(field.span_id);
                for (const auto& cell : field.cells)
                {
                        const auto d = delay_in_samples(link.delay_at_km(offset + cell.position_km), fs);
                        drive.add(cell.series.samples, std::min(d, drive.total_delay));
                }
        }
        return drive;
}

LinkDrive synth_link_drive(const LinkTopology& link, std::size_t cells_per_span, double fs, std::size_t n, std::uint64_t seed)
{
        if (cells_per_span == 0)
        {
                throw std::invalid_argument("a span needs at least one cell");
        }
        LinkDrive drive(fs, delay_in_samples(link.one_way_delay_s(), fs), n);

        std::map<std::size_t, PowerLawNoiseModel> bins;
        double offset = 0;
        for (const auto& span : link.spans())
        {
                const double cell_km = span.length_km / static_cast<double>(cells_per_span);
                const auto cell_model = PowerLawNoiseModel(span.lineic_noise.terms(), true).over_length(cell_km);
                for (std::size_t k = 0; k < cells_per_span; ++k)
                {
                        const double z = offset + (static_cast<double>(k) + 0.5) * cell_km;
                        const auto d = std::min(delay_in_samples(link.delay_at_km(z), fs), drive.total_delay);
                        bins[d] += cell_model;
                }
                offset += span.length_km;
        }

        for (const auto& [d, model] : bins)
        {
                const auto merged = merge_terms(model);
                if (merged.silent())
                {
                        continue;
                }
                const auto series = synth_power_law_phase_noise(merged, fs, n, derive_seed(seed, "link-delay-bin", d));
                drive.add(series.samples, d);
        }
        return drive;
}

// --- engine --------------------------------------------------------------------

std::size_t TransferResult::lock_index() const noexcept
{
        const auto i = static_cast<std::size_t>(std::ceil(lock_acquired_at_s * residual_phase.fs - 1e-9));
        return std::min(i, residual_phase.size());
}

TransferResult simulate_free_running(const LinkTopology& link, const std::vector<NoiseField>& fields, const SimConfig& sim)
{
        check_sim(sim, link.one_way_delay_s());
        const LinkDrive drive = make_drive(link, fields, sim.fs_hz);
        if (drive.size() != sim.samples())
        {
                throw std::invalid_argument("noise fields do not match the simulation length");
        }
        return simulate_free_running(link, drive, sim);
}

TransferResult simulate_free_running(const LinkTopology& link, const LinkDrive& drive, const SimConfig& sim)
{
        check_sim(sim, link.one_way_delay_s());
        if (drive.fs != sim.fs_hz)
        {
                throw std::invalid_argument("drive sample rate differs from the simulation");
        }
        TransferResult result;
        result.sim = sim;
        result.servo.enabled = false;
        result.residual_phase.fs = drive.fs;
        result.residual_phase.samples = drive.forward;
        result.correction_phase.fs = drive.fs;
        result.correction_phase.samples.assign(drive.size(), 0.0);
        result.roundtrip_beat_phase.fs = drive.fs;
        result.roundtrip_beat_phase.samples = drive.roundtrip;
        return result;
}

TransferResult simulate_compensated(
        const LinkTopology& link,
        const std::vector<NoiseField>& fields,
        const ServoConfig& servo,
        const SimConfig& sim)
{
        check_sim(sim, link.one_way_delay_s());
        const LinkDrive drive = make_drive(link, fields, sim.fs_hz);
        if (drive.size() != sim.samples())
        {
                throw std::invalid_argument("noise fields do not match the simulation length");
        }
        return simulate_compensated(link, drive, servo, sim);
}

TransferResult simulate_compensated(
        const LinkTopology& link,
        const LinkDrive& drive,
        const ServoConfig& servo,
        const SimConfig& sim)
{
        if (!servo.enabled)
        {
                TransferResult result = simulate_free_running(link, drive, sim);
                result.servo = servo;
                return result;
        }
        check_sim(sim, link.one_way_delay_s());
        validate_servo(servo, link.one_way_delay_s());
        if (drive.fs != sim.fs_hz)
        {
                throw std::invalid_argument("drive sample rate differs from the simulation");
        }

        const std::size_t n = drive.size();
        const auto rt_noise = synth_power_law_phase_noise(servo.detection_noise, drive.fs, n,
                                                          derive_seed(sim.seed, "detector-roundtrip", 0));
        const auto out_noise = synth_power_law_phase_noise(servo.detection_noise, drive.fs, n,
                                                           derive_seed(sim.seed, "detector-output", 0));
        TransferResult result = run_compensation_loop(drive, servo, rt_noise.samples, out_noise.samples);
        result.sim = sim;
        return result;
}

TransferResult run_compensation_loop(
        const LinkDrive& drive,
        const ServoConfig& servo,
        std::span<const double> roundtrip_detector_noise,
        std::span<const double> output_detector_noise)
{
        const std::size_t n = drive.size();
        if ((!roundtrip_detector_noise.empty() && roundtrip_detector_noise.size() != n) ||
            (!output_detector_noise.empty() && output_detector_noise.size() != n))
        {
                throw std::invalid_argument("detector noise length does not match the drive");
        }

        TransferResult result;
        result.servo = servo;
        result.sim.fs_hz = drive.fs;
        result.sim.duration_s = static_cast<double>(n) / drive.fs;
        result.lock_acquired_at_s = servo.enabled ? lock_time_constants * servo.time_constant_s() : 0.0;

        auto& residual = result.residual_phase.samples;
        auto& correction = result.correction_phase.samples;
        auto& beat = result.roundtrip_beat_phase.samples;
        residual.resize(n);
        correction.resize(n);
        beat.resize(n);
        result.residual_phase.fs = result.correction_phase.fs = result.roundtrip_beat_phase.fs = drive.fs;

        const double dt = 1.0 / drive.fs;
        const std::size_t delay = drive.total_delay;
        const double kp = servo.enabled ? servo.proportional_gain : 0.0;
        const double ki = servo.enabled ? servo.integrator_gain : 0.0;
        const double w_max = two_pi * servo.actuator_range_hz;
        const std::size_t lock = static_cast<std::size_t>(std::ceil(result.lock_acquired_at_s * drive.fs));

        double w = 0;
        double integ = 0;
        for (std::size_t i = 0; i < n; ++i)
        {
                correction[i] = i == 0 ? 0.0 : correction[i - 1] + dt * w;

                // The correction reaches the far end after tau and returns after 2 tau.
                const double back = i >= 2 * delay ? correction[i - 2 * delay] : correction[0];
                const double rt = roundtrip_detector_noise.empty() ? 0.0 : roundtrip_detector_noise[i];
                beat[i] = correction[i] + back + drive.roundtrip[i] + rt;

                const double e = 0.5 * beat[i];
                if (!std::isfinite(e) || std::abs(e) > 1e9)
                {
                        throw UnstableLoopError("compensation loop diverged at t = " +
                                                std::to_string(static_cast<double>(i) * dt) + " s");
                }
                integ += ki * dt * e;
                w = -(kp * e + integ);
                if (std::abs(w) > w_max)
                {
                        w = std::copysign(w_max, w);
                        if (i >= lock)
                        {
                                ++result.saturated_samples;
                        }
                }

                const double out = i >= delay ? correction[i - delay] : correction[0];
                const double od = output_detector_noise.empty() ? 0.0 : output_detector_noise[i];
                residual[i] = out + drive.forward[i] + od;
        }
        return result;
}

// --- analytic suppression ------------------------------------------------------

double residual_transfer_ratio(double f, double tau_oneway_s, const NoiseDistribution& distribution)
{
        if (!(tau_oneway_s > 0))
        {
                throw std::invalid_argument("one-way delay must be positive");
        }
        if (!(f >= 0) || !(f < loop_bandwidth_limit(tau_oneway_s)))
        {
                throw std::out_of_range("frequency outside the validity range [0, 1/(4 tau))");
        }
        const double x = two_pi * f * tau_oneway_s;
        const double x2 = x * x;

        if (std::holds_alternative<UniformDistribution>(distribution))
        {
                return x2 / 3.0;
        }
        if (const auto* lumped = std::get_if<LumpedAt>(&distribution))
        {
                if (!(lumped->z_fraction >= 0 && lumped->z_fraction <= 1))
                {
                        throw std::invalid_argument("lumped position must be a fraction in [0, 1]");
                }
                return x2 * lumped->z_fraction * lumped->z_fraction;
        }

        const auto& profile = std::get<NoiseProfile>(distribution);
        double num = 0;
        double den = 0;
        for (const auto& p : profile.pieces)
        {
                if (!(p.start_fraction >= 0 && p.end_fraction <= 1 && p.start_fraction <= p.end_fraction) ||
                    !(p.weight >= 0))
                {
                        throw std::invalid_argument("invalid noise profile piece");
                }
                const double a = p.start_fraction;
                const double b = p.end_fraction;
                // mean of z^2 over the piece
                const double mean_z2 = b > a ? (b * b * b - a * a * a) / (3.0 * (b - a)) : a * a;
                num += p.weight * mean_z2;
                den += p.weight;
        }
        if (!(den > 0))
        {
                throw std::invalid_argument("noise profile carries no weight");
        }
        return x2 * num / den;
}

double rule_of_thumb_ratio(double f, double t_trip_s)
{
        const double x = f * t_trip_s;
        return x * x;
}

NoiseProfile link_noise_profile(const LinkTopology& link, double f)
{
        const double tau = link.one_way_delay_s();
        NoiseProfile profile;
        double start = 0;
        for (const auto& span : link.spans())
        {
                const double end = start + span.one_way_delay_s();
                const double weight = span.lineic_noise.terms().empty() ? 0.0 : span.lineic_noise.psd(f) * span.length_km;
                profile.pieces.push_back({start / tau, std::min(1.0, end / tau), weight});
                start = end;
        }
        return profile;
}

// --- loop frequency response -----------------------------------------------------

LoopModel::LoopModel(const ServoConfig& servo, double fs, std::size_t total_delay)
    : servo_(servo), fs_(fs), total_delay_(total_delay)
{
        if (!(fs > 0))
        {
                throw std::invalid_argument("sample rate must be positive");
        }
}

LoopModel::Terms LoopModel::terms(double f) const
{
        const double w = two_pi * f / fs_;
        Terms t;
        t.z_inv = z_pow(w, 1.0);
        if (!servo_.enabled)
        {
                t.half_c = 0.0;
                t.denominator = 1.0;
                return t;
        }
        const double dt = 1.0 / fs_;
        const std::complex<double> acc = 1.0 / (1.0 - t.z_inv);
        const std::complex<double> c =
                dt * t.z_inv * acc * (servo_.proportional_gain + servo_.integrator_gain * dt * acc);
        t.half_c = 0.5 * c;
        t.denominator = 1.0 + t.half_c * (1.0 + z_pow(w, 2.0 * static_cast<double>(total_delay_)));
        return t;
}

std::complex<double> LoopModel::correction_response(double f, std::size_t d) const
{
        if (d > total_delay_)
        {
                throw std::out_of_range("cell lies beyond the link end");
        }
        const Terms t = terms(f);
        const double w = two_pi * f / fs_;
        const auto dd = static_cast<double>(d);
        const auto big = static_cast<double>(total_delay_);
        return -t.half_c * (z_pow(w, 2.0 * big - dd) + z_pow(w, dd)) / t.denominator;
}

std::complex<double> LoopModel::cell_response(double f, std::size_t d) const
{
        const double w = two_pi * f / fs_;
        const auto dd = static_cast<double>(d);
        const auto big = static_cast<double>(total_delay_);
        return z_pow(w, big - dd) + z_pow(w, big) * correction_response(f, d);
}

std::complex<double> LoopModel::detector_response(double f) const
{
        const Terms t = terms(f);
        const double w = two_pi * f / fs_;
        return -z_pow(w, static_cast<double>(total_delay_)) * t.half_c / t.denominator;
}
}
