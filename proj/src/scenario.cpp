#include "fiberlink/scenario.hpp"

#include "fiberlink/csv.hpp"
#include "fiberlink/seeding.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace fiberlink
{
namespace
{
namespace fs = std::filesystem;

std::string join_errors(const std::vector<std::string>& errors)
{
        std::string out = "invalid configuration";
        for (const auto& e : errors)
        {
                out += "\n  " + e;
        }
        return out;
}

// Collects schema errors instead of stopping at the first one.
class Reader
{
public:
        explicit Reader(std::vector<std::string>& errors) : errors_(errors)
        {
        }

        void error(const std::string& where, const std::string& what)
        {
                errors_.push_back(where + ": " + what);
        }

        bool map(const YAML::Node& node, const std::string& where, std::initializer_list<std::string_view> allowed)
        {
                if (!node.IsMap())
                {
                        error(where, "expected a mapping");
                        return false;
                }
                for (const auto& kv : node)
                {
                        const auto key = kv.first.as<std::string>();
                        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                        {
                                error(where, "unknown key '" + key + "'");
                        }
                }
                return true;
        }

        template <typename T>
        std::optional<T> get(const YAML::Node& node, const std::string& key, const std::string& where, bool required)
        {
                const YAML::Node v = node[key];
                if (!v)
                {
                        if (required)
                        {
                                error(where, "missing '" + key + "'");
                        }
                        return std::nullopt;
                }
                try
                {
                        if (!v.IsScalar())
                        {
                                throw YAML::Exception(v.Mark(), "not a scalar");
                        }
                        return v.as<T>();
                }
                catch (const YAML::Exception&)
                {
                        error(where, "'" + key + "' has the wrong type");
                        return std::nullopt;
                }
        }

        // Reads a finite number and applies a lower bound check.
        void number(const YAML::Node& node, const std::string& key, const std::string& where, double& target,
                    bool required, double min, bool strict)
        {
                const auto v = get<double>(node, key, where, required);
                if (!v)
                {
                        return;
                }
                if (!std::isfinite(*v) || (strict ? !(*v > min) : !(*v >= min)))
                {
                        error(where, key + (strict ? " must be greater than " : " must be at least ") + fmt(min));
                        return;
                }
                target = *v;
        }

        void positive(const YAML::Node& node, const std::string& key, const std::string& where, double& target,
                      bool required = false)
        {
                number(node, key, where, target, required, 0.0, true);
        }

        void non_negative(const YAML::Node& node, const std::string& key, const std::string& where, double& target,
                          bool required = false)
        {
                number(node, key, where, target, required, 0.0, false);
        }

        void flag(const YAML::Node& node, const std::string& key, const std::string& where, bool& target)
        {
                if (const auto v = get<bool>(node, key, where, false))
                {
                        target = *v;
                }
        }

        void count(const YAML::Node& node, const std::string& key, const std::string& where, std::size_t& target,
                   std::size_t min)
        {
                const auto v = get<long long>(node, key, where, false);
                if (!v)
                {
                        return;
                }
                if (*v < static_cast<long long>(min))
                {
                        error(where, key + " must be at least " + std::to_string(min));
                        return;
                }
                target = static_cast<std::size_t>(*v);
        }

        std::optional<std::vector<double>> list(const YAML::Node& node, const std::string& key, const std::string& where)
        {
                const YAML::Node v = node[key];
                if (!v)
                {
                        return std::nullopt;
                }
                try
                {
                        if (!v.IsSequence())
                        {
                                throw YAML::Exception(v.Mark(), "not a list");
                        }
                        return v.as<std::vector<double>>();
                }
                catch (const YAML::Exception&)
                {
                        error(where, "'" + key + "' must be a list of numbers");
                        return std::nullopt;
                }
        }

        // A list of {alpha, <coefficient_key>} terms.
        std::optional<PowerLawNoiseModel> terms(const YAML::Node& node, const std::string& where,
                                                const std::string& coefficient_key, bool lineic)
        {
                if (!node.IsSequence())
                {
                        error(where, "expected a list of power-law terms");
                        return std::nullopt;
                }
                std::vector<PowerLawTerm> out;
                bool ok = true;
                for (std::size_t i = 0; i < node.size(); ++i)
                {
                        const std::string at = where + "[" + std::to_string(i) + "]";
                        if (!map(node[i], at, {"alpha", coefficient_key}))
                        {
                                ok = false;
                                continue;
                        }
                        PowerLawTerm term{-1.0, -1.0};
                        number(node[i], "alpha", at, term.alpha, true, 0.0, false);
                        non_negative(node[i], coefficient_key, at, term.h, true);
                        if (term.alpha > PowerLawNoiseModel::max_alpha)
                        {
                                error(at, "alpha must not exceed 3");
                                ok = false;
                        }
                        if (term.alpha < 0 || term.h < 0)
                        {
                                ok = false;
                        }
                        out.push_back(term);
                }
                if (!ok)
                {
                        return std::nullopt;
                }
                return PowerLawNoiseModel(std::move(out), lineic);
        }

        static std::string fmt(double v)
        {
                std::ostringstream s;
                s << v;
                return s.str();
        }

private:
        std::vector<std::string>& errors_;
};

YAML::Node load_yaml(const fs::path& path, std::vector<std::string>& errors)
{
        std::ifstream in(path);
        if (!in)
        {
                errors.push_back(path.string() + ": cannot read file");
                return {};
        }
        try
        {
                YAML::Node root = YAML::Load(in);
                if (!root.IsMap())
                {
                        errors.push_back(path.string() + ": top level must be a mapping");
                        return {};
                }
                return root;
        }
        catch (const YAML::Exception& e)
        {
                errors.push_back(path.string() + ": " + e.what());
                return {};
        }
}

void read_seed(Reader& r, const YAML::Node& root, std::optional<std::uint64_t>& seed)
{
        if (!root["seed"])
        {
                r.error("seed", "seed required for reproducibility");
                return;
        }
        if (const auto v = r.get<std::uint64_t>(root, "seed", "seed", true))
        {
                seed = *v;
        }
}

void parse_link(Reader& r, const YAML::Node& node, LinkConfig& link, std::vector<std::string>& span_ids)
{
        if (!r.map(node, "link", {"carrier_frequency_hz", "input_power_w", "sensitivity_w", "path"}))
        {
                return;
        }
        r.positive(node, "carrier_frequency_hz", "link", link.carrier_frequency_hz);
        r.non_negative(node, "input_power_w", "link", link.input_power_w);
        r.non_negative(node, "sensitivity_w", "link", link.sensitivity_w);

        const YAML::Node path = node["path"];
        if (!path || !path.IsSequence() || path.size() == 0)
        {
                r.error("link.path", "expected a non-empty list of span and element entries");
                return;
        }
        std::set<std::string> ids;
        for (std::size_t i = 0; i < path.size(); ++i)
        {
                std::string where = "link.path[" + std::to_string(i) + "]";
                const YAML::Node item = path[i];
                if (!item.IsMap() || item.size() != 1 || !(item["span"] || item["element"]))
                {
                        r.error(where, "each entry must be a single 'span' or 'element' mapping");
                        continue;
                }
                const bool is_span = static_cast<bool>(item["span"]);
                const YAML::Node body = is_span ? item["span"] : item["element"];
                const auto id = body.IsMap() ? r.get<std::string>(body, "id", where, true) : std::nullopt;
                if (id)
                {
                        where += " " + std::string(is_span ? "span" : "element") + " '" + *id + "'";
                        if (!ids.insert(*id).second)
                        {
                                r.error(where, "duplicate id");
                        }
                }

                if (is_span)
                {
                        if (!r.map(body, where, {"id", "length_km", "loss_db", "group_velocity_m_per_s"}))
                        {
                                continue;
                        }
                        FiberSpan span;
                        span.id = id.value_or("");
                        r.positive(body, "length_km", where, span.length_km, true);
                        r.non_negative(body, "loss_db", where, span.loss_db);
                        r.positive(body, "group_velocity_m_per_s", where, span.group_velocity_m_per_s);
                        span_ids.push_back(span.id);
                        link.items.emplace_back(std::move(span));
                }
                else
                {
                        if (!r.map(body, where,
                                   {"id", "kind", "insertion_loss_db", "gain_db", "isolation_adjacent_db",
                                    "isolation_other_db", "bidirectional"}))
                        {
                                continue;
                        }
                        OpticalElement e;
                        e.id = id.value_or("");
                        if (const auto kind = r.get<std::string>(body, "kind", where, true))
                        {
                                try
                                {
                                        e.kind = parse_element_kind(*kind);
                                }
                                catch (const std::invalid_argument&)
                                {
                                        r.error(where, "unknown element kind '" + *kind + "'");
                                }
                        }
                        r.non_negative(body, "insertion_loss_db", where, e.insertion_loss_db);
                        r.non_negative(body, "gain_db", where, e.gain_db);
                        r.non_negative(body, "isolation_adjacent_db", where, e.isolation_adjacent_db);
                        r.non_negative(body, "isolation_other_db", where, e.isolation_other_db);
                        r.flag(body, "bidirectional", where, e.bidirectional);
                        if (e.gain_db > 0 && e.kind != ElementKind::amplifier)
                        {
                                r.error(where, "gain_db is only allowed on amplifiers");
                        }
                        link.items.emplace_back(std::move(e));
                }
        }
}

Scenario parse_scenario(const YAML::Node& root, ValidationResult& result)
{
        Reader r(result.errors);
        Scenario sc;
        r.map(root, "scenario", {"name", "seed", "link", "noise", "servo", "sim", "analysis", "outputs"});
        sc.name = r.get<std::string>(root, "name", "scenario", true).value_or("");
        read_seed(r, root, sc.sim.seed);

        std::vector<std::string> span_ids;
        if (root["link"])
        {
                parse_link(r, root["link"], sc.link, span_ids);
        }
        else
        {
                r.error("scenario", "missing 'link'");
        }

        if (const YAML::Node noise = root["noise"])
        {
                if (!noise.IsMap())
                {
                        r.error("noise", "expected a mapping from span id to power-law terms");
                }
                else
                {
                        for (const auto& kv : noise)
                        {
                                const auto id = kv.first.as<std::string>();
                                const std::string where = "noise." + id;
                                if (std::find(span_ids.begin(), span_ids.end(), id) == span_ids.end())
                                {
                                        r.error(where, "span '" + id + "' is not defined in link.path");
                                        continue;
                                }
                                if (auto model = r.terms(kv.second, where, "h_rad2_per_hz_per_km", true))
                                {
                                        sc.noise[id] = std::move(*model);
                                }
                        }
                }
        }
        for (const auto& id : span_ids)
        {
                if (!sc.noise.contains(id) && !id.empty())
                {
                        result.warnings.push_back("span '" + id + "' has no noise model and is silent");
                }
        }

        if (const YAML::Node s = root["servo"])
        {
                if (r.map(s, "servo",
                          {"enabled", "loop_bandwidth_hz", "loop_bandwidth_fraction", "integrator_corner_ratio",
                           "actuator_range_hz", "detection_noise_rad2_per_hz"}))
                {
                        auto& sv = sc.servo;
                        r.flag(s, "enabled", "servo", sv.enabled);
                        if (s["loop_bandwidth_hz"])
                        {
                                double b = 0;
                                r.positive(s, "loop_bandwidth_hz", "servo", b);
                                if (b > 0)
                                {
                                        sv.loop_bandwidth_hz = b;
                                }
                                if (s["loop_bandwidth_fraction"])
                                {
                                        r.error("servo", "give either loop_bandwidth_hz or loop_bandwidth_fraction");
                                }
                        }
                        r.positive(s, "loop_bandwidth_fraction", "servo", sv.loop_bandwidth_fraction);
                        r.positive(s, "integrator_corner_ratio", "servo", sv.integrator_corner_ratio);
                        r.positive(s, "actuator_range_hz", "servo", sv.actuator_range_hz);
                        double det = default_detection_noise_rad2_per_hz;
                        r.non_negative(s, "detection_noise_rad2_per_hz", "servo", det);
                        sv.detection_noise = PowerLawNoiseModel::white_pm(det);
                }
        }

        if (const YAML::Node s = root["sim"])
        {
                if (r.map(s, "sim", {"fs_hz", "duration_s", "cells_per_span", "max_samples"}))
                {
                        r.positive(s, "fs_hz", "sim", sc.sim.fs_hz);
                        r.positive(s, "duration_s", "sim", sc.sim.duration_s, true);
                        r.count(s, "cells_per_span", "sim", sc.sim.cells_per_span, 1);
                        r.count(s, "max_samples", "sim", sc.sim.max_samples, 2);
                }
        }
        else
        {
                r.error("scenario", "missing 'sim'");
        }

        if (const YAML::Node a = root["analysis"])
        {
                if (r.map(a, "analysis",
                          {"welch_segment_s", "welch_overlap", "counter_gate_s", "tracking_filter",
                           "tracking_bandwidth_hz", "unfiltered_bandwidth_hz", "taus_s", "rejection_probe_hz",
                           "integration_low_hz", "integration_high_hz", "slope_tau_low_s", "slope_tau_high_s"}))
                {
                        auto& an = sc.analysis;
                        r.positive(a, "welch_segment_s", "analysis", an.welch_segment_s);
                        r.non_negative(a, "welch_overlap", "analysis", an.welch_overlap);
                        if (an.welch_overlap > 0.9)
                        {
                                r.error("analysis", "welch_overlap must not exceed 0.9");
                        }
                        r.positive(a, "counter_gate_s", "analysis", an.counter_gate_s);
                        r.flag(a, "tracking_filter", "analysis", an.tracking_filter);
                        r.positive(a, "tracking_bandwidth_hz", "analysis", an.tracking_bandwidth_hz);
                        r.positive(a, "unfiltered_bandwidth_hz", "analysis", an.unfiltered_bandwidth_hz);
                        if (auto taus = r.list(a, "taus_s", "analysis"))
                        {
                                if (taus->empty() || !std::is_sorted(taus->begin(), taus->end()) ||
                                    std::adjacent_find(taus->begin(), taus->end()) != taus->end() ||
                                    !(taus->front() > 0))
                                {
                                        r.error("analysis", "taus_s must be positive and strictly increasing");
                                }
                                else
                                {
                                        an.taus_s = std::move(*taus);
                                }
                        }
                        r.positive(a, "rejection_probe_hz", "analysis", an.rejection_probe_hz);
                        r.positive(a, "integration_low_hz", "analysis", an.integration_low_hz);
                        r.positive(a, "integration_high_hz", "analysis", an.integration_high_hz);
                        r.positive(a, "slope_tau_low_s", "analysis", an.slope_tau_low_s);
                        r.positive(a, "slope_tau_high_s", "analysis", an.slope_tau_high_s);
                }
        }

        if (const YAML::Node o = root["outputs"])
        {
                if (r.map(o, "outputs", {"directory", "export_time_series", "time_series_decimation"}))
                {
                        sc.outputs.directory = r.get<std::string>(o, "directory", "outputs", false).value_or("");
                        r.flag(o, "export_time_series", "outputs", sc.outputs.export_time_series);
                        r.count(o, "time_series_decimation", "outputs", sc.outputs.time_series_decimation, 1);
                }
        }
        return sc;
}

bool is_multiple(double value, double unit)
{
        const double ratio = value / unit;
        return ratio >= 1.0 - 1e-9 && std::abs(ratio - std::round(ratio)) <= 1e-6 * ratio;
}

// Cross-module checks, run once the schema is clean.
void check_scenario(const Scenario& sc, ValidationResult& result)
{
        auto& errors = result.errors;
        LinkTopology link;
        try
        {
                link = scenario_link(sc);
        }
        catch (const std::invalid_argument& e)
        {
                std::istringstream lines(e.what());
                std::string line;
                std::getline(lines, line);
                while (std::getline(lines, line))
                {
                        errors.push_back("link: " + line.substr(line.find_first_not_of(' ')));
                }
                return;
        }

        const double fs = sc.sim.fs_hz;
        const double tau = link.one_way_delay_s();
        const double nyquist = fs / 2.0;
        const double samples = fs * sc.sim.duration_s;
        if (samples > static_cast<double>(sc.sim.max_samples))
        {
                errors.push_back("sim: duration_s * fs_hz = " + Reader::fmt(samples) + " exceeds max_samples " +
                                 std::to_string(sc.sim.max_samples));
        }
        if (sc.sim.duration_s < 100.0 * tau)
        {
                errors.push_back("sim: duration_s must cover at least 100 one-way delays (" + Reader::fmt(100 * tau) +
                                 " s)");
        }

        const ServoConfig servo = scenario_servo(sc, link);
        const double cap = loop_bandwidth_limit(tau);
        if (sc.servo.enabled && servo.target_loop_bandwidth_hz > cap * (1 + 1e-9))
        {
                errors.push_back("servo: loop bandwidth " + Reader::fmt(servo.target_loop_bandwidth_hz) +
                                 " Hz exceeds the delay limit of " + Reader::fmt(cap) + " Hz");
        }
        const double lock_s = sc.servo.enabled ? 10.0 * servo.time_constant_s() : 0.0;
        const double usable_s = sc.sim.duration_s - lock_s;

        const auto& an = sc.analysis;
        if (an.welch_segment_s * fs < 16)
        {
                errors.push_back("analysis: welch_segment_s is shorter than 16 samples");
        }
        if (an.welch_segment_s > usable_s)
        {
                errors.push_back("analysis: welch_segment_s exceeds the record after lock (" + Reader::fmt(usable_s) +
                                 " s)");
        }
        if (!is_multiple(an.counter_gate_s * fs, 1.0))
        {
                errors.push_back("analysis: counter_gate_s must be a whole number of samples");
        }
        for (const double t : an.taus_s)
        {
                if (!is_multiple(t, an.counter_gate_s))
                {
                        errors.push_back("analysis: tau " + Reader::fmt(t) + " s is not a multiple of counter_gate_s");
                }
                else if (3.0 * t > usable_s)
                {
                        errors.push_back("analysis: tau " + Reader::fmt(t) + " s needs at least " +
                                         Reader::fmt(3 * t) + " s of locked data");
                }
        }
        if (an.tracking_bandwidth_hz >= nyquist || an.unfiltered_bandwidth_hz >= nyquist)
        {
                errors.push_back("analysis: measurement bandwidths must stay below fs_hz / 2");
        }
        const double df = 1.0 / an.welch_segment_s;
        if (!(an.integration_low_hz < an.integration_high_hz) || an.integration_low_hz < df ||
            an.integration_high_hz > nyquist)
        {
                errors.push_back("analysis: integration band must lie inside [1 / welch_segment_s, fs_hz / 2]");
        }
        if (an.rejection_probe_hz / 1.25 < df || an.rejection_probe_hz >= cap)
        {
                errors.push_back("analysis: rejection_probe_hz must lie between the PSD resolution and the delay limit");
        }
        if (an.rejection_probe_hz * 1.25 > an.integration_high_hz)
        {
                errors.push_back("analysis: rejection_probe_hz lies above the exported PSD range");
        }
        if (!(an.slope_tau_low_s < an.slope_tau_high_s))
        {
                errors.push_back("analysis: slope_tau_low_s must be below slope_tau_high_s");
        }

        for (const auto& w : link_budget(link).warnings)
        {
                result.warnings.push_back("budget: " + w);
        }
}

RouteScenario parse_route(const YAML::Node& root, ValidationResult& result)
{
        Reader r(result.errors);
        RouteScenario rs;
        r.map(root, "route config", {"name", "seed", "route", "constraints", "prediction", "segment_scenario", "outputs"});
        rs.name = r.get<std::string>(root, "name", "route config", true).value_or("");
        std::optional<std::uint64_t> seed;
        read_seed(r, root, seed);
        rs.seed = seed.value_or(0);

        auto& route = rs.route;
        if (r.map(root["route"], "route",
                  {"total_length_km", "total_loss_db", "group_velocity_m_per_s", "noise"}))
        {
                const YAML::Node n = root["route"];
                r.positive(n, "total_length_km", "route", route.total_length_km, true);
                r.positive(n, "total_loss_db", "route", route.total_loss_db, true);
                r.positive(n, "group_velocity_m_per_s", "route", route.group_velocity_m_per_s);
                if (n["noise"])
                {
                        if (auto model = r.terms(n["noise"], "route.noise", "h_rad2_per_hz_per_km", true))
                        {
                                route.lineic_noise = std::move(*model);
                        }
                }
                else
                {
                        result.warnings.push_back("route has no noise model and is silent");
                }
        }
        if (const YAML::Node c = root["constraints"];
            c && r.map(c, "constraints", {"max_segment_loss_db", "min_loop_bandwidth_hz"}))
        {
                r.positive(c, "max_segment_loss_db", "constraints", route.max_segment_loss_db, true);
                r.non_negative(c, "min_loop_bandwidth_hz", "constraints", route.min_loop_bandwidth_hz);
        }
        else if (!c)
        {
                r.error("route config", "missing 'constraints'");
        }

        auto& p = rs.prediction;
        if (const YAML::Node n = root["prediction"];
            n && r.map(n, "prediction",
                       {"model", "taus_s", "fs_hz", "carrier_frequency_hz", "measurement_bandwidth_hz",
                        "bandwidth_fraction", "integrator_corner_ratio", "cells_per_segment",
                        "detection_noise_rad2_per_hz", "station_white_pm_rad2_per_hz"}))
        {
                if (const auto model = r.get<std::string>(n, "model", "prediction", false))
                {
                        if (*model == "delay_limited")
                        {
                                p.model = ResidualModel::delay_limited;
                        }
                        else if (*model == "closed_loop")
                        {
                                p.model = ResidualModel::closed_loop;
                        }
                        else
                        {
                                r.error("prediction", "model must be delay_limited or closed_loop");
                        }
                }
                if (auto taus = r.list(n, "taus_s", "prediction"))
                {
                        if (taus->empty() || !std::is_sorted(taus->begin(), taus->end()) || !(taus->front() > 0))
                        {
                                r.error("prediction", "taus_s must be positive and increasing");
                        }
                        else
                        {
                                rs.taus_s = std::move(*taus);
                        }
                }
                r.positive(n, "fs_hz", "prediction", p.fs_hz);
                r.positive(n, "carrier_frequency_hz", "prediction", p.nu0_hz);
                r.non_negative(n, "measurement_bandwidth_hz", "prediction", p.measurement_bandwidth_hz);
                r.positive(n, "bandwidth_fraction", "prediction", p.bandwidth_fraction);
                if (p.bandwidth_fraction > 1.0)
                {
                        r.error("prediction", "bandwidth_fraction must not exceed 1");
                }
                r.positive(n, "integrator_corner_ratio", "prediction", p.integrator_corner_ratio);
                r.count(n, "cells_per_segment", "prediction", p.cells_per_segment, 1);
                r.non_negative(n, "detection_noise_rad2_per_hz", "prediction", p.detection_white_pm);
                r.non_negative(n, "station_white_pm_rad2_per_hz", "prediction", p.station_white_pm);
        }
        if (const YAML::Node n = root["segment_scenario"]; n && r.map(n, "segment_scenario", {"duration_s"}))
        {
                r.positive(n, "duration_s", "segment_scenario", rs.segment_duration_s);
        }
        if (const YAML::Node o = root["outputs"]; o && r.map(o, "outputs", {"directory"}))
        {
                rs.outputs.directory = r.get<std::string>(o, "directory", "outputs", false).value_or("");
        }

        if (result.errors.empty())
        {
                try
                {
                        plan_cascade(route);
                }
                catch (const PlanError& e)
                {
                        result.errors.push_back(std::string("constraints: ") + e.what());
                }
        }
        return rs;
}

void ensure_directory(const fs::path& dir)
{
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec || !fs::is_directory(dir))
        {
                throw OutputError("cannot create output directory " + dir.string());
        }
}

PsdEstimate truncate(const PsdEstimate& psd, double f_max)
{
        PsdEstimate out = psd;
        const auto end = std::upper_bound(out.frequency_hz.begin(), out.frequency_hz.end(), f_max * (1 + 1e-12));
        const auto keep = static_cast<std::size_t>(end - out.frequency_hz.begin());
        out.frequency_hz.resize(keep);
        out.values.resize(keep);
        return out;
}

AdevSeries measure_adev(const PhaseSeries& phase, double bandwidth_hz, double gate_s, double nu0,
                        const std::vector<double>& taus)
{
        const auto y = pi_counter(tracking_filter(phase, bandwidth_hz), gate_s, nu0);
        std::vector<double> usable;
        for (const double t : taus)
        {
                if (3.0 * t <= static_cast<double>(y.y.size()) * y.gate_s * (1 + 1e-12))
                {
                        usable.push_back(t);
                }
        }
        return allan_deviation(y, usable);
}

// sigma^2 = a / tau^2 + b, weighted by relative error.
std::pair<double, double> fit_floor(const AdevSeries& adev)
{
        double s_uu = 0, s_u = 0, s_1 = 0, s_uv = 0, s_v = 0;
        for (const auto& p : adev)
        {
                if (!(p.sigma > 0))
                {
                        continue;
                }
                const double v = p.sigma * p.sigma;
                const double w = 1.0 / (v * v);
                const double u = 1.0 / (p.tau_s * p.tau_s);
                s_uu += w * u * u;
                s_u += w * u;
                s_1 += w;
                s_uv += w * u * v;
                s_v += w * v;
        }
        const double det = s_uu * s_1 - s_u * s_u;
        if (!(std::abs(det) > 0))
        {
                return {0.0, 0.0};
        }
        const double a = (s_uv * s_1 - s_u * s_v) / det;
        const double b = (s_uu * s_v - s_u * s_uv) / det;
        return {a, b};
}

void write_text(const fs::path& path, const std::string& text)
{
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << text;
        out.flush();
        if (!out)
        {
                throw OutputError("cannot write " + path.string());
        }
}

std::string sci(double v)
{
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", v);
        return buf;
}

std::string fixed(double v, int digits)
{
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.*f", digits, v);
        return buf;
}
}

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors))
{
}

bool is_route_config(const fs::path& path)
{
        std::vector<std::string> errors;
        const YAML::Node root = load_yaml(path, errors);
        return errors.empty() && root["route"];
}

ValidationResult validate_config(const fs::path& path)
{
        ValidationResult result;
        const YAML::Node root = load_yaml(path, result.errors);
        if (!result.errors.empty())
        {
                return result;
        }
        if (root["route"])
        {
                parse_route(root, result);
                return result;
        }
        const Scenario sc = parse_scenario(root, result);
        if (result.errors.empty())
        {
                check_scenario(sc, result);
        }
        return result;
}

Scenario load_scenario(const fs::path& path)
{
        ValidationResult result;
        const YAML::Node root = load_yaml(path, result.errors);
        if (!result.errors.empty())
        {
                throw ConfigError(result.errors);
        }
        if (root["route"])
        {
                throw ConfigError({path.string() + ": is a route file; use plan"});
        }
        Scenario sc = parse_scenario(root, result);
        if (result.errors.empty())
        {
                check_scenario(sc, result);
        }
        if (!result.errors.empty())
        {
                throw ConfigError(result.errors);
        }
        return sc;
}

RouteScenario load_route(const fs::path& path)
{
        ValidationResult result;
        const YAML::Node root = load_yaml(path, result.errors);
        if (!result.errors.empty())
        {
                throw ConfigError(result.errors);
        }
        if (!root["route"])
        {
                throw ConfigError({path.string() + ": has no 'route' section"});
        }
        RouteScenario rs = parse_route(root, result);
        if (!result.errors.empty())
        {
                throw ConfigError(result.errors);
        }
        return rs;
}

LinkTopology scenario_link(const Scenario& scenario)
{
        LinkConfig config = scenario.link;
        for (auto& item : config.items)
        {
                if (auto* span = std::get_if<FiberSpan>(&item))
                {
                        const auto it = scenario.noise.find(span->id);
                        span->lineic_noise = it != scenario.noise.end() ? it->second : PowerLawNoiseModel({}, true);
                }
        }
        return build_link(config);
}

ServoConfig scenario_servo(const Scenario& scenario, const LinkTopology& link)
{
        const auto& s = scenario.servo;
        const double bandwidth =
                s.loop_bandwidth_hz.value_or(s.loop_bandwidth_fraction * loop_bandwidth_limit(link.one_way_delay_s()));
        ServoConfig servo = servo_for_bandwidth(bandwidth, s.integrator_corner_ratio);
        servo.actuator_range_hz = s.actuator_range_hz;
        servo.detection_noise = s.detection_noise;
        servo.enabled = s.enabled;
        return servo;
}

RunReport run_scenario(const fs::path& path, const fs::path& output_dir)
{
        return run_scenario(load_scenario(path), output_dir);
}

RunReport run_scenario(const Scenario& sc, const fs::path& output_dir)
{
        {
                ValidationResult check;
                check_scenario(sc, check);
                if (!check.errors.empty())
                {
                        throw ConfigError(check.errors);
                }
        }
        ensure_directory(output_dir);

        const LinkTopology link = scenario_link(sc);
        const ServoConfig servo = scenario_servo(sc, link);
        SimConfig sim{sc.sim.fs_hz, sc.sim.duration_s, sc.sim.seed.value()};
        const std::size_t n = sim.samples();
        const double tau = link.one_way_delay_s();
        const auto& an = sc.analysis;
        const double nu0 = link.carrier_frequency_hz();

        RunReport report;
        report.scenario_name = sc.name;
        report.seed = sim.seed;
        report.fs_hz = sim.fs_hz;
        report.duration_s = sim.duration_s;
        report.one_way_delay_s = tau;
        report.loop_bandwidth_cap_hz = loop_bandwidth_limit(tau);
        report.loop_bandwidth_hz = servo.enabled ? servo.target_loop_bandwidth_hz : 0.0;
        report.budget = link_budget(link);
        for (const auto& w : report.budget.warnings)
        {
                report.warnings.push_back("budget: " + w);
        }

        const LinkDrive drive = synth_link_drive(link, sc.sim.cells_per_span, sim.fs_hz, n, derive_seed(sim.seed, "link", 0));
        TransferResult comp = simulate_compensated(link, drive, servo, sim);
        report.lock_acquired_at_s = comp.lock_acquired_at_s;
        if (comp.saturated_samples > 0)
        {
                report.warnings.push_back("actuator saturated on " + std::to_string(comp.saturated_samples) +
                                          " samples after lock");
        }

        const std::size_t skip = comp.lock_index();
        const std::size_t keep = n - skip;
        const PhaseSeries free_out = slice(PhaseSeries{drive.forward, sim.fs_hz, 0.0}, skip, keep);
        const PhaseSeries residual = slice(comp.residual_phase, skip, keep);
        const PhaseSeries correction = slice(comp.correction_phase, skip, keep);

        const WelchOptions welch{static_cast<std::size_t>(std::llround(an.welch_segment_s * sim.fs_hz)),
                                 an.welch_overlap, Window::hann};
        const PsdEstimate psd_free = welch_psd(free_out, welch);
        const PsdEstimate psd_comp = welch_psd(residual, welch);
        const PsdEstimate psd_corr = welch_psd(correction, welch);

        const double probe = an.rejection_probe_hz;
        auto& rej = report.rejection;
        rej.probe_hz = probe;
        const double free_band = band_average(psd_free, probe / 1.25, probe * 1.25);
        rej.engine_db = 10.0 * std::log10(band_average(psd_comp, probe / 1.25, probe * 1.25) / free_band);
        rej.configured_analytic_db = 10.0 * std::log10(residual_transfer_ratio(probe, tau, link_noise_profile(link, probe)));
        rej.uniform_analytic_db = 10.0 * std::log10(residual_transfer_ratio(probe, tau, UniformDistribution{}));
        rej.rule_of_thumb_db = 10.0 * std::log10(rule_of_thumb_ratio(probe, tau));
        report.free_psd_at_probe = free_band;

        report.integrated_phase_rad = integrated_rms_phase(psd_comp, an.integration_low_hz, an.integration_high_hz);
        report.integrated_phase_free_rad = integrated_rms_phase(psd_free, an.integration_low_hz, an.integration_high_hz);

        const double filtered_bw = an.tracking_filter ? an.tracking_bandwidth_hz : an.unfiltered_bandwidth_hz;
        report.residual_filtered = measure_adev(residual, filtered_bw, an.counter_gate_s, nu0, an.taus_s);
        report.residual_unfiltered =
                measure_adev(residual, an.unfiltered_bandwidth_hz, an.counter_gate_s, nu0, an.taus_s);
        report.correction = measure_adev(correction, filtered_bw, an.counter_gate_s, nu0, an.taus_s);
        const AdevSeries adev_free = measure_adev(free_out, filtered_bw, an.counter_gate_s, nu0, an.taus_s);
        try
        {
                report.adev_slope = loglog_slope(report.residual_filtered, an.slope_tau_low_s, an.slope_tau_high_s);
        }
        catch (const std::invalid_argument&)
        {
                report.adev_slope = std::numeric_limits<double>::quiet_NaN();
                report.warnings.push_back("too few ADEV points for the slope fit");
        }
        const auto [a, b] = fit_floor(report.residual_filtered);
        report.white_pm_coefficient = std::sqrt(std::max(a, 0.0));
        report.floor = std::sqrt(std::max(b, 0.0));

        const auto emit = [&](const std::string& name, auto&& writer)
        {
                writer(output_dir / name);
                report.artifacts.push_back(name);
        };
        emit("budget.csv", [&](const fs::path& p) { csv::write_budget(p, report.budget); });
        emit("psd_free.csv", [&](const fs::path& p) { csv::write_psd(p, truncate(psd_free, an.integration_high_hz)); });
        emit("psd_compensated.csv",
             [&](const fs::path& p) { csv::write_psd(p, truncate(psd_comp, an.integration_high_hz)); });
        emit("psd_correction.csv",
             [&](const fs::path& p) { csv::write_psd(p, truncate(psd_corr, an.integration_high_hz)); });
        emit("rejection.csv", [&](const fs::path& p)
             { csv::write_rejection(p, rejection_spectrum(truncate(psd_free, an.integration_high_hz),
                                                          truncate(psd_comp, an.integration_high_hz))); });
        emit("adev_residual_filtered.csv", [&](const fs::path& p) { csv::write_adev(p, report.residual_filtered); });
        emit("adev_residual_unfiltered.csv",
             [&](const fs::path& p) { csv::write_adev(p, report.residual_unfiltered); });
        emit("adev_correction.csv", [&](const fs::path& p) { csv::write_adev(p, report.correction); });
        emit("adev_free.csv", [&](const fs::path& p) { csv::write_adev(p, adev_free); });
        if (sc.outputs.export_time_series)
        {
                emit("timeseries.csv", [&](const fs::path& p)
                     { csv::write_transfer(p, comp.residual_phase, comp.correction_phase,
                                           sc.outputs.time_series_decimation); });
        }
        report.artifacts.push_back("report.txt");
        write_text(output_dir / "report.txt", format_report(report));
        return report;
}

std::string format_report(const RunReport& r)
{
        std::ostringstream o;
        o << "scenario            " << r.scenario_name << '\n'
          << "seed                " << r.seed << '\n'
          << "fs_hz               " << Reader::fmt(r.fs_hz) << '\n'
          << "duration_s          " << Reader::fmt(r.duration_s) << '\n'
          << "one_way_delay_s     " << sci(r.one_way_delay_s) << '\n'
          << "loop_bandwidth_hz   " << fixed(r.loop_bandwidth_hz, 1) << " (delay limit "
          << fixed(r.loop_bandwidth_cap_hz, 1) << ")\n"
          << "lock_acquired_at_s  " << sci(r.lock_acquired_at_s) << "\n\n";

        o << "[budget]                                   budget.csv\n"
          << "total one-way loss  " << fixed(r.budget.total_one_way_loss_db, 2) << " dB\n"
          << "total gain          " << fixed(r.budget.total_gain_db, 2) << " dB\n"
          << "net one-way loss    " << fixed(r.budget.net_one_way_loss_db, 2) << " dB\n"
          << "round-trip loss     " << fixed(r.budget.total_round_trip_loss_db, 2) << " dB\n"
          << "remote power        "
          << sci(r.budget.ledger.empty() ? r.budget.input_power_w : r.budget.ledger.back().power_w) << " W\n\n";

        const auto& j = r.rejection;
        o << "[rejection at " << Reader::fmt(j.probe_hz) << " Hz]             psd_free.csv, psd_compensated.csv\n"
          << "engine (band average " << fixed(j.probe_hz / 1.25, 2) << "-" << fixed(j.probe_hz * 1.25, 2)
          << " Hz)    " << fixed(j.engine_db, 2) << " dB\n"
          << "analytic, configured distribution    " << fixed(j.configured_analytic_db, 2) << " dB\n"
          << "analytic, uniform (1/3)(2 pi f tau)^2  " << fixed(j.uniform_analytic_db, 2) << " dB\n"
          << "rule of thumb (f tau)^2              " << fixed(j.rule_of_thumb_db, 2) << " dB\n"
          << "note: the two analytic conventions differ by "
          << fixed(j.uniform_analytic_db - j.rule_of_thumb_db, 1)
          << " dB; the rule of thumb omits the 2 pi and the 1/3 distribution factor. Both are shown, neither is "
             "preferred.\n"
          << "free-running PSD    " << sci(r.free_psd_at_probe) << " rad^2/Hz\n\n";

        o << "[integrated phase]                         psd_compensated.csv, psd_free.csv\n"
          << "compensated rms     " << fixed(r.integrated_phase_rad, 3) << " rad\n"
          << "free-running rms    " << fixed(r.integrated_phase_free_rad, 3) << " rad\n\n";

        o << "[allan deviation]     adev_residual_filtered.csv, adev_residual_unfiltered.csv, adev_correction.csv\n"
          << "tau_s        filtered     unfiltered   correction\n";
        for (std::size_t i = 0; i < r.residual_filtered.size(); ++i)
        {
                const double t = r.residual_filtered[i].tau_s;
                char line[128];
                std::snprintf(line, sizeof line, "%-12g %-12.3e %-12.3e %-12.3e\n", t, r.residual_filtered[i].sigma,
                              adev_at(r.residual_unfiltered, t), adev_at(r.correction, t));
                o << line;
        }
        const double f1 = adev_at(r.residual_filtered, 1.0);
        const double u1 = adev_at(r.residual_unfiltered, 1.0);
        if (std::isfinite(f1) && f1 > 0 && std::isfinite(u1))
        {
                o << "unfiltered/filtered at 1 s  " << fixed(u1 / f1, 2) << '\n';
        }
        o << "slope (filtered)    " << fixed(r.adev_slope, 3) << '\n'
          << "fit sigma^2 = a/tau^2 + b:  sqrt(a) " << sci(r.white_pm_coefficient) << ", floor sqrt(b) "
          << sci(r.floor) << "\n\n";

        o << "[warnings]\n";
        if (r.warnings.empty())
        {
                o << "none\n";
        }
        for (const auto& w : r.warnings)
        {
                o << w << '\n';
        }
        o << "\n[artifacts]\n";
        for (const auto& a : r.artifacts)
        {
                o << a << '\n';
        }
        return o.str();
}

PlanOutput run_plan(const fs::path& path, const fs::path& output_dir)
{
        const RouteScenario rs = load_route(path);
        ensure_directory(output_dir);

        PlanOutput out;
        out.plan = plan_cascade(rs.route);
        out.prediction = predict_cascade(out.plan, rs.route.lineic_noise, rs.taus_s, rs.prediction);

        csv::Table segs{{"segment_id", "length_km", "loss_db", "tau_s", "bw_hz"}, {{}, {}, {}, {}, {}}};
        for (const auto& s : out.plan.segments)
        {
                segs.columns[0].push_back(static_cast<double>(s.id));
                segs.columns[1].push_back(s.length_km);
                segs.columns[2].push_back(s.loss_db);
                segs.columns[3].push_back(s.tau_oneway_s);
                segs.columns[4].push_back(s.loop_bandwidth_cap_hz);
        }
        csv::write(output_dir / "plan.csv", segs);
        out.artifacts.push_back("plan.csv");

        {
                std::ofstream st(output_dir / "stations.csv", std::ios::binary | std::ios::trunc);
                st << "station,position_km,functions,repeater\n";
                for (const auto& s : out.plan.stations)
                {
                        std::string functions;
                        for (const auto f : s.functions)
                        {
                                functions += (functions.empty() ? "" : ";") + to_string(f);
                        }
                        st << s.index << ',' << csv::format_number(s.position_km) << ',' << functions << ','
                           << s.repeater << '\n';
                }
                st.flush();
                if (!st)
                {
                        throw OutputError("cannot write " + (output_dir / "stations.csv").string());
                }
                out.artifacts.push_back("stations.csv");
        }

        csv::write_adev(output_dir / "prediction.csv", out.prediction.adev);
        out.artifacts.push_back("prediction.csv");

        // Runnable scenario for one segment.
        const auto& seg = out.plan.segments.front();
        YAML::Emitter y;
        y.SetDoublePrecision(12);
        y << YAML::BeginMap;
        y << YAML::Key << "name" << YAML::Value << rs.name + "-segment";
        y << YAML::Key << "seed" << YAML::Value << rs.seed;
        y << YAML::Key << "link" << YAML::Value << YAML::BeginMap;
        y << YAML::Key << "carrier_frequency_hz" << YAML::Value << rs.prediction.nu0_hz;
        y << YAML::Key << "path" << YAML::Value << YAML::BeginSeq;
        y << YAML::BeginMap << YAML::Key << "span" << YAML::Value << YAML::BeginMap;
        y << YAML::Key << "id" << YAML::Value << "segment-1";
        y << YAML::Key << "length_km" << YAML::Value << seg.length_km;
        y << YAML::Key << "loss_db" << YAML::Value << seg.loss_db;
        y << YAML::Key << "group_velocity_m_per_s" << YAML::Value << rs.route.group_velocity_m_per_s;
        y << YAML::EndMap << YAML::EndMap;
        y << YAML::EndSeq << YAML::EndMap;
        if (!rs.route.lineic_noise.terms().empty())
        {
                y << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
                y << YAML::Key << "segment-1" << YAML::Value << YAML::BeginSeq;
                for (const auto& t : rs.route.lineic_noise.terms())
                {
                        y << YAML::Flow << YAML::BeginMap << YAML::Key << "alpha" << YAML::Value << t.alpha
                          << YAML::Key << "h_rad2_per_hz_per_km" << YAML::Value << t.h << YAML::EndMap;
                }
                y << YAML::EndSeq << YAML::EndMap;
        }
        y << YAML::Key << "servo" << YAML::Value << YAML::BeginMap;
        y << YAML::Key << "loop_bandwidth_fraction" << YAML::Value << rs.prediction.bandwidth_fraction;
        y << YAML::Key << "integrator_corner_ratio" << YAML::Value << rs.prediction.integrator_corner_ratio;
        y << YAML::Key << "detection_noise_rad2_per_hz" << YAML::Value << rs.prediction.detection_white_pm;
        y << YAML::EndMap;
        y << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
        y << YAML::Key << "fs_hz" << YAML::Value << rs.prediction.fs_hz;
        y << YAML::Key << "duration_s" << YAML::Value << rs.segment_duration_s;
        y << YAML::Key << "cells_per_span" << YAML::Value << rs.prediction.cells_per_segment;
        y << YAML::EndMap;
        y << YAML::Key << "analysis" << YAML::Value << YAML::BeginMap;
        y << YAML::Key << "welch_segment_s" << YAML::Value << std::min(200.0, rs.segment_duration_s / 4.0);
        std::vector<double> taus;
        for (const double t : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0})
        {
                if (3.0 * t <= rs.segment_duration_s * 0.9)
                {
                        taus.push_back(t);
                }
        }
        y << YAML::Key << "taus_s" << YAML::Value << YAML::Flow << taus;
        y << YAML::Key << "tracking_bandwidth_hz" << YAML::Value << rs.prediction.measurement_bandwidth_hz;
        y << YAML::EndMap;
        y << YAML::EndMap;
        write_text(output_dir / "segment_scenario.cfg", std::string(y.c_str()) + "\n");
        out.artifacts.push_back("segment_scenario.cfg");

        std::ostringstream txt;
        txt << "route               " << rs.name << '\n'
            << "length              " << fixed(out.plan.total_length_km, 3) << " km\n"
            << "loss                " << fixed(out.plan.total_loss_db, 3) << " dB\n"
            << "segments            " << out.plan.segments.size() << " x " << fixed(seg.length_km, 3) << " km, "
            << fixed(seg.loss_db, 3) << " dB, delay limit " << fixed(seg.loop_bandwidth_cap_hz, 1) << " Hz\n"
            << "interior stations   " << out.plan.stations.size() << '\n'
            << "\npredicted ADEV (" << (rs.prediction.model == ResidualModel::closed_loop ? "closed_loop" : "delay_limited")
            << ")\n";
        for (const auto& p : out.prediction.adev)
        {
                txt << Reader::fmt(p.tau_s) << " s  " << sci(p.sigma) << '\n';
        }
        write_text(output_dir / "plan.txt", txt.str());
        out.artifacts.push_back("plan.txt");
        return out;
}

AdevSeries analyze_adev(const fs::path& csv_path, double nu0_hz)
{
        const csv::Table t = csv::read(csv_path);
        if (t.columns.size() < 2 || t.columns[0].size() < 4)
        {
                throw std::invalid_argument(csv_path.string() + ": need a time column, a value column and 4 rows");
        }
        const double dt = t.columns[0][1] - t.columns[0][0];
        if (!(dt > 0))
        {
                throw std::invalid_argument(csv_path.string() + ": time column must increase");
        }
        FractionalFreqSeries y;
        if (t.header[1] == "y")
        {
                y.y = t.columns[1];
                y.gate_s = dt;
                y.nu0_hz = nu0_hz;
        }
        else
        {
                y = pi_counter(PhaseSeries{t.columns[1], 1.0 / dt, t.columns[0][0]}, dt, nu0_hz);
        }
        return allan_deviation(y, octave_taus(y, y.gate_s, std::numeric_limits<double>::infinity()));
}

PsdEstimate analyze_psd(const fs::path& csv_path, double segment_s)
{
        const csv::Table t = csv::read(csv_path);
        if (t.columns.size() < 2 || t.columns[0].size() < 16)
        {
                throw std::invalid_argument(csv_path.string() + ": need a time column, a phase column and 16 rows");
        }
        const double dt = t.columns[0][1] - t.columns[0][0];
        if (!(dt > 0))
        {
                throw std::invalid_argument(csv_path.string() + ": time column must increase");
        }
        const PhaseSeries series{t.columns[1], 1.0 / dt, t.columns[0][0]};
        const std::size_t len = segment_s > 0 ? static_cast<std::size_t>(std::llround(segment_s / dt))
                                              : std::max<std::size_t>(16, series.size() / 8);
        return welch_psd(series, {len, 0.5, Window::hann});
}
}
