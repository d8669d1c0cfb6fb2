#include "fiberlink/cascade.hpp"

#include "fiberlink/seeding.hpp"

#include <cmath>
#include <algorithm>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace fiberlink
{
namespace
{
constexpr double rel_tol = 1e-9;

void check_route(const RouteSpec& route)
{
        std::vector<std::string> errors;
        if (!(route.total_length_km > 0))
        {
                errors.push_back("route length must be positive");
        }
        if (!(route.total_loss_db > 0))
        {
                errors.push_back("route loss must be positive");
        }
        if (!(route.max_segment_loss_db > 0))
        {
                errors.push_back("max segment loss must be positive");
        }
        if (!(route.min_loop_bandwidth_hz >= 0))
        {
                errors.push_back("min loop bandwidth must be non-negative");
        }
        if (!(route.group_velocity_m_per_s > 0))
        {
                errors.push_back("group velocity must be positive");
        }
        if (!route.lineic_noise.lineic() && !route.lineic_noise.terms().empty())
        {
                errors.push_back("route noise model must be lineic");
        }
        if (!errors.empty())
        {
                std::ostringstream msg;
                msg << "invalid route:";
                for (const auto& e : errors)
                {
                        msg << ' ' << e << ';';
                }
                throw PlanError(msg.str());
        }
}

bool loss_ok(const RouteSpec& route, std::size_t n)
{
        return route.total_loss_db / static_cast<double>(n) <= route.max_segment_loss_db * (1 + rel_tol);
}

bool bandwidth_ok(const RouteSpec& route, std::size_t n)
{
        const double tau = route.total_length_km / static_cast<double>(n) * 1000.0 / route.group_velocity_m_per_s;
        return loop_bandwidth_limit(tau) * (1 + rel_tol) >= route.min_loop_bandwidth_hz;
}

ServoConfig segment_servo(double tau, const PredictionOptions& options)
{
        ServoConfig servo = servo_for_bandwidth(options.bandwidth_fraction * loop_bandwidth_limit(tau),
                                                options.integrator_corner_ratio);
        servo.detection_noise = PowerLawNoiseModel::white_pm(options.detection_white_pm);
        return servo;
}

// Residual phase PSD of one compensated segment.
std::function<double(double)> segment_residual_psd(const CascadeSegment& segment, const PowerLawNoiseModel& lineic,
                                                   const PredictionOptions& options)
{
        const auto lumped = PowerLawNoiseModel(lineic.terms(), true).over_length(segment.length_km);
        const double tau = segment.tau_oneway_s;

        if (options.model == ResidualModel::delay_limited)
        {
                return [lumped, tau](double f)
                {
                        const double x = 2.0 * std::numbers::pi * f * tau;
                        return lumped.psd(f) * std::min(1.0, x * x / 3.0);
                };
        }

        const std::size_t cells = std::max<std::size_t>(1, options.cells_per_segment);
        const std::size_t total_delay = delay_in_samples(tau, options.fs_hz);
        std::map<std::size_t, double> multiplicity;
        for (std::size_t k = 0; k < cells; ++k)
        {
                const double frac = (static_cast<double>(k) + 0.5) / static_cast<double>(cells);
                const auto d = std::min(delay_in_samples(frac * tau, options.fs_hz), total_delay);
                multiplicity[d] += 1.0 / static_cast<double>(cells);
        }
        const LoopModel model(segment_servo(tau, options), options.fs_hz, total_delay);
        const double det = options.detection_white_pm;
        return [lumped, multiplicity, model, det](double f)
        {
                double h2 = 0;
                for (const auto& [d, weight] : multiplicity)
                {
                        h2 += weight * std::norm(model.cell_response(f, d));
                }
                return lumped.psd(f) * h2 + det * (std::norm(model.detector_response(f)) + 1.0);
        };
}
}

std::string to_string(StationFunction function)
{
        switch (function)
        {
        case StationFunction::send_back:
                return "send_back";
        case StationFunction::amplify_filter:
                return "amplify_filter";
        case StationFunction::compensate_next:
                return "compensate_next";
        }
        return "unknown";
}

CascadePlan split_route(const RouteSpec& route, std::size_t n)
{
        if (n == 0)
        {
                throw PlanError("a route needs at least one segment");
        }
        CascadePlan plan;
        plan.route = route;
        const double length = route.total_length_km / static_cast<double>(n);
        const double loss = route.total_loss_db / static_cast<double>(n);
        const double tau = length * 1000.0 / route.group_velocity_m_per_s;
        for (std::size_t i = 0; i < n; ++i)
        {
                plan.segments.push_back({i + 1, length, loss, tau, loop_bandwidth_limit(tau)});
                plan.total_length_km += length;
                plan.total_loss_db += loss;
        }
        for (std::size_t i = 1; i < n; ++i)
        {
                plan.stations.push_back({i,
                                         length * static_cast<double>(i),
                                         {StationFunction::send_back, StationFunction::amplify_filter,
                                          StationFunction::compensate_next},
                                         "laser phase-locked to the incoming signal"});
        }
        return plan;
}

CascadePlan plan_cascade(const RouteSpec& route)
{
        check_route(route);
        for (std::size_t n = 1; n <= max_cascade_segments; ++n)
        {
                if (loss_ok(route, n) && bandwidth_ok(route, n))
                {
                        CascadePlan plan = split_route(route, n);
                        check_plan(plan);
                        return plan;
                }
        }
        if (!loss_ok(route, max_cascade_segments))
        {
                throw PlanError("loss constraint unsatisfiable within N <= 64");
        }
        throw PlanError("bandwidth constraint unsatisfiable within N <= 64");
}

void check_plan(const CascadePlan& plan)
{
        const auto& route = plan.route;
        if (plan.segments.empty())
        {
                throw PlanError("plan has no segments");
        }
        double length = 0;
        for (const auto& s : plan.segments)
        {
                length += s.length_km;
                if (s.loss_db > route.max_segment_loss_db * (1 + rel_tol))
                {
                        throw PlanError("segment " + std::to_string(s.id) + " exceeds the loss limit");
                }
                if (s.loop_bandwidth_cap_hz * (1 + rel_tol) < route.min_loop_bandwidth_hz)
                {
                        throw PlanError("segment " + std::to_string(s.id) + " cannot reach the minimum bandwidth");
                }
        }
        if (std::abs(length - route.total_length_km) > rel_tol * route.total_length_km)
        {
                throw PlanError("segment lengths do not add up to the route length");
        }
        if (plan.stations.size() + 1 != plan.segments.size())
        {
                throw PlanError("plan needs one station between each pair of segments");
        }
        for (const auto& st : plan.stations)
        {
                if (st.functions.size() != 3)
                {
                        throw PlanError("station " + std::to_string(st.index) + " lacks a function");
                }
        }
}

CascadePrediction predict_cascade(const CascadePlan& plan, const PowerLawNoiseModel& lineic_noise,
                                  const std::vector<double>& taus, const PredictionOptions& options)
{
        check_plan(plan);
        if (!(options.fs_hz > 0) || !(options.nu0_hz > 0))
        {
                throw std::invalid_argument("prediction needs positive fs and carrier frequency");
        }
        const double f_max = options.fs_hz / 2.0;

        CascadePrediction out;
        out.taus = taus;
        out.segment_variance.assign(plan.segments.size(), std::vector<double>(taus.size(), 0.0));
        out.station_variance.assign(taus.size(), 0.0);

        for (std::size_t s = 0; s < plan.segments.size(); ++s)
        {
                const auto psd = segment_residual_psd(plan.segments[s], lineic_noise, options);
                for (std::size_t t = 0; t < taus.size(); ++t)
                {
                        out.segment_variance[s][t] = allan_variance_from_phase_psd(
                                psd, taus[t], options.nu0_hz, options.measurement_bandwidth_hz, f_max);
                }
        }
        if (options.station_white_pm > 0 && !plan.stations.empty())
        {
                const double h = options.station_white_pm * static_cast<double>(plan.stations.size());
                const auto flat = [h](double) { return h; };
                for (std::size_t t = 0; t < taus.size(); ++t)
                {
                        out.station_variance[t] = allan_variance_from_phase_psd(
                                flat, taus[t], options.nu0_hz, options.measurement_bandwidth_hz, f_max);
                }
        }
        for (std::size_t t = 0; t < taus.size(); ++t)
        {
                double total = out.station_variance[t];
                for (const auto& seg : out.segment_variance)
                {
                        total += seg[t];
                }
                out.adev.push_back({taus[t], std::sqrt(total), 1});
        }
        return out;
}

AdevSeries predict_cascade_adev(const CascadePlan& plan, const PowerLawNoiseModel& lineic_noise,
                                const std::vector<double>& taus, const PredictionOptions& options)
{
        return predict_cascade(plan, lineic_noise, taus, options).adev;
}

LinkTopology segment_link(const CascadePlan& plan, std::size_t segment)
{
        const auto& s = plan.segments.at(segment);
        FiberSpan span;
        span.id = "segment-" + std::to_string(s.id);
        span.length_km = s.length_km;
        span.loss_db = s.loss_db;
        span.lineic_noise = plan.route.lineic_noise.terms().empty() ? PowerLawNoiseModel({}, true)
                                                                    : plan.route.lineic_noise;
        span.group_velocity_m_per_s = plan.route.group_velocity_m_per_s;
        LinkConfig config;
        config.items.emplace_back(span);
        return build_link(config);
}

PhaseSeries simulate_cascade_residual(const CascadePlan& plan, const SimConfig& sim, const PredictionOptions& options)
{
        check_plan(plan);
        const std::size_t n = sim.samples();
        PhaseSeries total;
        total.fs = sim.fs_hz;
        total.samples.assign(n, 0.0);

        for (std::size_t i = 0; i < plan.segments.size(); ++i)
        {
                const LinkTopology link = segment_link(plan, i);
                SimConfig seg_sim = sim;
                seg_sim.seed = derive_seed(sim.seed, "cascade-segment", i);
                const auto drive = synth_link_drive(link, options.cells_per_segment, sim.fs_hz, n, seg_sim.seed);
                const auto servo = segment_servo(link.one_way_delay_s(), options);
                const auto result = simulate_compensated(link, drive, servo, seg_sim);
                for (std::size_t k = 0; k < n; ++k)
                {
                        total.samples[k] += result.residual_phase.samples[k];
                }
        }
        if (options.station_white_pm > 0)
        {
                const auto station_model = PowerLawNoiseModel::white_pm(options.station_white_pm);
                for (const auto& st : plan.stations)
                {
                        const auto noise = synth_power_law_phase_noise(station_model, sim.fs_hz, n,
                                                                       derive_seed(sim.seed, "cascade-station", st.index));
                        for (std::size_t k = 0; k < n; ++k)
                        {
                                total.samples[k] += noise.samples[k];
                        }
                }
        }
        return total;
}
}
