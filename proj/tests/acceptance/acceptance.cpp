// Acceptance checks, one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include "fiberlink/cascade.hpp"
#include "fiberlink/csv.hpp"
#include "fiberlink/noise.hpp"
#include "fiberlink/scenario.hpp"
#include "fiberlink/servo.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace fiberlink;
namespace fs = std::filesystem;

namespace
{
const fs::path scenario_dir = FIBERLINK_SCENARIO_DIR;
const fs::path work_dir = fs::temp_directory_path() / "fiberlink-acceptance";
constexpr double nu0 = default_carrier_frequency_hz;
constexpr std::size_t seeds = 10;

struct Outcome
{
        bool pass = false;
        std::string detail;
};

std::string fmt(const char* format, auto... args)
{
        char buf[512];
        std::snprintf(buf, sizeof buf, format, args...);
        return buf;
}

double db(double ratio)
{
        return 10.0 * std::log10(ratio);
}

double band(const PsdEstimate& psd, double f)
{
        return band_average(psd, f / 1.25, f * 1.25);
}

std::vector<double> log_points(double lo, double hi, int per_decade)
{
        std::vector<double> f;
        const int n = static_cast<int>(std::lround(std::log10(hi / lo) * per_decade));
        for (int k = 0; k <= n; ++k)
        {
                f.push_back(lo * std::pow(10.0, static_cast<double>(k) / per_decade));
        }
        return f;
}

double elapsed_s(std::chrono::steady_clock::time_point start)
{
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

PsdEstimate read_psd(const fs::path& path)
{
        const auto t = csv::read(path);
        PsdEstimate psd;
        psd.frequency_hz = t.columns.at(0);
        psd.values = t.columns.at(1);
        psd.resolution_bw_hz = psd.frequency_hz.at(1) - psd.frequency_hz.at(0);
        psd.segments = 1;
        return psd;
}

// Seed-averaged results of a shipped scenario, shared by several criteria.
struct Ensemble
{
        std::vector<RunReport> reports;
        PsdEstimate free;
        PsdEstimate compensated;
        PsdEstimate correction;
        // rms over seeds
        std::vector<double> taus;
        std::vector<double> filtered;
        std::vector<double> unfiltered;
        double single_run_s = 0.0;
        std::string first_report_text;
};

Ensemble run_ensemble(const std::string& config)
{
        Ensemble e;
        Scenario sc = load_scenario(scenario_dir / config);
        const std::uint64_t base = sc.sim.seed.value();
        std::vector<PsdEstimate> free, comp, corr;
        for (std::size_t k = 0; k < seeds; ++k)
        {
                sc.sim.seed = base + k;
                const fs::path out = work_dir / (sc.name + "-" + std::to_string(k));
                const auto start = std::chrono::steady_clock::now();
                e.reports.push_back(run_scenario(sc, out));
                if (k == 0)
                {
                        e.single_run_s = elapsed_s(start);
                        std::ifstream in(out / "report.txt");
                        e.first_report_text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
                }
                free.push_back(read_psd(out / "psd_free.csv"));
                comp.push_back(read_psd(out / "psd_compensated.csv"));
                corr.push_back(read_psd(out / "psd_correction.csv"));
        }
        e.free = average(free);
        e.compensated = average(comp);
        e.correction = average(corr);
        for (std::size_t i = 0; i < e.reports[0].residual_filtered.size(); ++i)
        {
                double f2 = 0, u2 = 0;
                for (const auto& r : e.reports)
                {
                        f2 += r.residual_filtered[i].sigma * r.residual_filtered[i].sigma;
                        u2 += r.residual_unfiltered[i].sigma * r.residual_unfiltered[i].sigma;
                }
                e.taus.push_back(e.reports[0].residual_filtered[i].tau_s);
                e.filtered.push_back(std::sqrt(f2 / seeds));
                e.unfiltered.push_back(std::sqrt(u2 / seeds));
        }
        return e;
}

Ensemble& link108()
{
        static Ensemble e = run_ensemble("link108.cfg");
        return e;
}

Ensemble& link86()
{
        static Ensemble e = run_ensemble("link86.cfg");
        return e;
}

double at_tau(const Ensemble& e, const std::vector<double>& values, double tau)
{
        for (std::size_t i = 0; i < e.taus.size(); ++i)
        {
                if (std::abs(e.taus[i] - tau) < 1e-9)
                {
                        return values[i];
                }
        }
        return std::nan("");
}

// --- criteria -------------------------------------------------------------------

// 108 km of uniform noise, 64 cells, 2000 s, ten seeds.
Outcome rejection_scaling()
{
        const auto start = std::chrono::steady_clock::now();
        FiberSpan span;
        span.id = "uniform108";
        span.length_km = 108;
        span.loss_db = 21.6;
        span.lineic_noise = PowerLawNoiseModel({{2.0, 4.0}}, true);
        const auto link = build_link({{span}});
        const double tau = link.one_way_delay_s();
        const auto servo = default_servo(tau);

        std::vector<PsdEstimate> free, comp;
        for (std::size_t k = 0; k < seeds; ++k)
        {
                const SimConfig sim{10e3, 2000.0, 1000 + k};
                const auto drive = synth_link_drive(link, 64, sim.fs_hz, sim.samples(), sim.seed);
                const auto r = simulate_compensated(link, drive, servo, sim);
                const std::size_t skip = r.lock_index();
                const std::size_t keep = sim.samples() - skip;
                const WelchOptions welch{1u << 21, 0.5, Window::hann};
                free.push_back(welch_psd(slice(PhaseSeries{drive.forward, sim.fs_hz, 0.0}, skip, keep), welch));
                comp.push_back(welch_psd(slice(r.residual_phase, skip, keep), welch));
        }
        const auto pf = average(free);
        const auto pc = average(comp);

        std::vector<double> f = log_points(0.02, 2.0, 10);
        std::vector<double> ratio;
        double worst = 0;
        for (const double x : f)
        {
                ratio.push_back(band(pc, x) / band(pf, x));
                worst = std::max(worst, std::abs(db(ratio.back() / residual_transfer_ratio(x, tau, UniformDistribution{}))));
        }
        const double slope = 10.0 * loglog_slope(f, ratio, 0.02, 2.0);
        const double runtime = elapsed_s(start);
        return {std::abs(slope - 20.0) <= 2.0 && worst <= 1.5 && runtime <= 300.0,
                fmt("slope %+.2f dB/decade over [0.02, 2] Hz, worst deviation from (1/3)(2 pi f tau)^2 %.2f dB, "
                    "%zu seeds, %.0f s",
                    slope, worst, seeds, runtime)};
}

Outcome rejection_at_1hz()
{
        const auto& e = link108();
        const double engine = db(band(e.compensated, 1.0) / band(e.free, 1.0));
        const auto& rej = e.reports[0].rejection;
        const bool close = std::abs(engine - rej.configured_analytic_db) <= 1.5;
        const bool conventions = std::abs(rej.uniform_analytic_db - -54.2) < 0.05 &&
                                 std::abs(rej.rule_of_thumb_db - -65.4) < 0.05;
        const auto& text = e.first_report_text;
        const bool shown = text.find(fmt("%.2f dB", rej.uniform_analytic_db)) != std::string::npos &&
                           text.find(fmt("%.2f dB", rej.rule_of_thumb_db)) != std::string::npos &&
                           text.find("differ by 11.2 dB") != std::string::npos;
        return {close && conventions && shown,
                fmt("engine %.2f dB vs configured analytic %.2f dB; report shows uniform %.2f dB and rule of thumb "
                    "%.2f dB with the 11.2 dB gap flagged: %s",
                    engine, rej.configured_analytic_db, rej.uniform_analytic_db, rej.rule_of_thumb_db,
                    shown ? "yes" : "no")};
}

Outcome free_running_level()
{
        const auto& e = link108();
        const double level = band(e.free, 1.0);
        double worst = 0;
        for (const double f : log_points(0.1, 10.0, 5))
        {
                worst = std::max(worst, std::abs(db(band(e.correction, f) / band(e.free, f))));
        }
        return {std::abs(db(level / 430.0)) <= 1.5 && worst <= 1.0,
                fmt("free PSD at 1 Hz %.1f rad^2/Hz (target 430); correction vs free over [0.1, 10] Hz worst %.2f dB",
                    level, worst)};
}

Outcome adev_slope()
{
        const auto& e = link108();
        const double slope = loglog_slope(e.taus, e.filtered, 1.0, 100.0);
        const double one = at_tau(e, e.filtered, 1.0);
        return {std::abs(slope + 1.0) <= 0.15 && one >= 1e-16 && one <= 1e-15,
                fmt("slope %.3f over [1, 100] s, ADEV(1 s) %.2e", slope, one)};
}

Outcome tracking_ratio()
{
        const auto& e = link108();
        const double ratio = at_tau(e, e.unfiltered, 1.0) / at_tau(e, e.filtered, 1.0);
        return {ratio >= 4.0 && ratio <= 6.0 && e.single_run_s <= 120.0,
                fmt("ADEV(1 s) 250 Hz / 10 Hz = %.2f, single run %.0f s", ratio, e.single_run_s)};
}

Outcome estimator_suite()
{
        std::vector<std::string> failures;

        // White FM synthesized directly as y.
        const double h0 = 2e-24;
        const double gate = 0.01;
        const auto white = synth_power_law_phase_noise(PowerLawNoiseModel::white_pm(h0), 1.0 / gate, 400000, 17);
        double worst_white = 0;
        for (const auto& p : allan_deviation({white.samples, gate, nu0}, {0.01, 0.1, 1.0, 10.0}))
        {
                worst_white = std::max(worst_white, std::abs(p.sigma / std::sqrt(h0 / (2 * p.tau_s)) - 1.0));
        }
        if (worst_white > 0.05)
        {
                failures.push_back(fmt("white FM off by %.1f%%", 100 * worst_white));
        }

        struct Case
        {
                const char* name;
                double alpha;
                bool as_frequency;
                double slope;
                double tolerance;
        };
        const Case cases[] = {{"white PM", 0, false, -1.0, 0.1},
                              {"flicker PM", 1, false, -1.0, 0.15},
                              {"white FM", 0, true, -0.5, 0.1},
                              {"flicker FM", 1, true, 0.0, 0.15},
                              {"random-walk FM", 2, true, 0.5, 0.1}};
        const std::vector<double> taus{0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50, 100};
        std::string slopes;
        for (const auto& c : cases)
        {
                std::vector<double> var(taus.size(), 0.0);
                for (std::uint64_t s = 0; s < 4; ++s)
                {
                        const auto x = synth_power_law_phase_noise(PowerLawNoiseModel({{c.alpha, 1.0}}, false), 100.0,
                                                                   1u << 20, 1000 + s);
                        const auto y = c.as_frequency ? FractionalFreqSeries{x.samples, 0.01, nu0} : pi_counter(x, 0.01, nu0);
                        const auto adev = allan_deviation(y, taus);
                        for (std::size_t i = 0; i < taus.size(); ++i)
                        {
                                var[i] += adev[i].sigma * adev[i].sigma / 4;
                        }
                }
                for (auto& v : var)
                {
                        v = std::sqrt(v);
                }
                const double slope = loglog_slope(taus, var, 0.1, 100);
                slopes += fmt(" %s %+.2f", c.name, slope);
                if (std::abs(slope - c.slope) > c.tolerance)
                {
                        failures.push_back(fmt("%s slope %.2f", c.name, slope));
                }
        }

        // Parseval on a white-dominated mixture: windowed and plain segment
        // variances agree when there is little in-segment trend.
        const auto mixed = synth_power_law_phase_noise(PowerLawNoiseModel({{0.0, 1.0}, {2.0, 0.1}}, false), 200.0,
                                                       1u << 20, 3);
        const std::size_t seg = 1u << 13;
        const auto mixed_psd = welch_psd(mixed, {seg, 0.5, Window::hann});
        double variance = 0;
        std::size_t segments = 0;
        for (std::size_t start = 0; start + seg <= mixed.size(); start += seg / 2, ++segments)
        {
                double m = 0;
                for (std::size_t i = 0; i < seg; ++i)
                {
                        m += mixed.samples[start + i];
                }
                m /= static_cast<double>(seg);
                double v = 0;
                for (std::size_t i = 0; i < seg; ++i)
                {
                        v += (mixed.samples[start + i] - m) * (mixed.samples[start + i] - m);
                }
                variance += v / static_cast<double>(seg);
        }
        variance /= static_cast<double>(segments);
        const double parseval =
                std::accumulate(mixed_psd.values.begin(), mixed_psd.values.end(), 0.0) * mixed_psd.resolution_bw_hz /
                        variance -
                1.0;
        if (std::abs(parseval) > 0.1)
        {
                failures.push_back(fmt("Parseval off by %.1f%%", 100 * parseval));
        }

        // Synthesis level of a random-walk phase over two decades.
        const PowerLawNoiseModel model({{2.0, 1.0}}, false);
        const auto x = synth_power_law_phase_noise(model, 1000.0, 1u << 22, 99);
        const auto psd = welch_psd(x, {1u << 16, 0.5, Window::hann});
        double worst_level = 0;
        for (const double f : log_points(0.5, 50.0, 5))
        {
                worst_level = std::max(worst_level, std::abs(db(band(psd, f) / model.psd(f))));
        }
        if (worst_level > 1.0)
        {
                failures.push_back(fmt("synthesis off by %.2f dB", worst_level));
        }

        std::string detail = fmt("white FM within %.1f%%; slopes", 100 * worst_white) + slopes +
                             fmt("; Parseval %+.1f%%; synthesis within %.2f dB over [0.5, 50] Hz", 100 * parseval,
                                 worst_level);
        for (const auto& f : failures)
        {
                detail += "; FAILED " + f;
        }
        return {failures.empty(), detail};
}

Outcome budget()
{
        const auto link = scenario_link(load_scenario(scenario_dir / "link108.cfg"));
        const auto b = link_budget(link);
        bool monotone = true;
        double previous = 0;
        for (const auto& e : b.ledger)
        {
                monotone = monotone && e.cumulative_db >= previous;
                previous = e.cumulative_db;
        }
        const double node = node_power_w(b, "up13-excess");
        const auto route = load_route(scenario_dir / "cascade600.cfg");
        const auto plan = plan_cascade(route.route);
        const bool route_ok = route.route.total_loss_db == 167.0 && std::abs(plan.total_loss_db - 167.0) < 1e-9;
        return {std::abs(b.net_one_way_loss_db - 38.0) <= 1.0 && monotone && std::abs(node - 35e-6) <= 1e-6 && route_ok,
                fmt("link108 %.2f dB, ledger monotone: %s, %.1f mW -> %.1f uW after up13-excess; cascade600 route "
                    "%.1f dB, plan sums to %.3f dB",
                    b.net_one_way_loss_db, monotone ? "yes" : "no", 1e3 * b.input_power_w, 1e6 * node,
                    route.route.total_loss_db, plan.total_loss_db)};
}

Outcome integrated_phase()
{
        const double long_link = integrated_rms_phase(link108().compensated, 1.0, 1000.0);
        const double short_link = integrated_rms_phase(link86().compensated, 1.0, 1000.0);
        const bool in_band = long_link >= 0.5 && long_link <= 3.0;
        // Ordering is the hard requirement; the band is reported, not enforced.
        return {short_link < long_link,
                fmt("108 km %.2f rad, 86 km %.2f rad, ordering holds: %s; soft band [0.5, 3] rad for 108 km: %s",
                    long_link, short_link, short_link < long_link ? "yes" : "no", in_band ? "inside" : "MISSED")};
}

// ADEV(1 s) of a simulated cascade, rms over seeds, and its prediction.
std::pair<double, double> cascade_adev(const RouteSpec& route, std::size_t n, const PredictionOptions& options)
{
        const auto plan = split_route(route, n);
        double var = 0;
        const std::size_t runs = 4;
        for (std::size_t k = 0; k < runs; ++k)
        {
                const SimConfig sim{options.fs_hz, 200.0, 600 + k};
                const auto residual = simulate_cascade_residual(plan, sim, options);
                // Skip lock acquisition and the filter start-up.
                const std::size_t skip = static_cast<std::size_t>(2.0 * sim.fs_hz);
                const auto kept = slice(residual, skip, residual.size() - skip);
                const auto y = pi_counter(tracking_filter(kept, options.measurement_bandwidth_hz), 1e-3, options.nu0_hz);
                const double s = allan_deviation(y, {1.0})[0].sigma;
                var += s * s / runs;
        }
        const double predicted = predict_cascade_adev(plan, route.lineic_noise, {1.0}, options)[0].sigma;
        return {std::sqrt(var), predicted};
}

Outcome cascade_oracle()
{
        const auto start = std::chrono::steady_clock::now();
        RouteSpec route;
        route.total_length_km = 600;
        route.total_loss_db = 120;
        route.max_segment_loss_db = 200;
        route.lineic_noise = PowerLawNoiseModel({{2.0, 1.4}}, true);
        PredictionOptions options;
        options.model = ResidualModel::closed_loop;

        const auto [whole, whole_pred] = cascade_adev(route, 1, options);
        const auto [split, split_pred] = cascade_adev(route, 2, options);
        const double gain = whole / split;
        const double error = std::abs(split_pred / split - 1.0);
        const double runtime = elapsed_s(start);
        return {gain >= 1.6 && gain <= 2.4 && error <= 0.3 && runtime <= 600.0,
                fmt("600 km ADEV(1 s) %.2e unsplit, %.2e in 2 segments: gain %.2f; predicted %.2e (%+.0f%%), "
                    "unsplit predicted %.2e (%+.0f%%), %.0f s",
                    whole, split, gain, split_pred, 100 * (split_pred / split - 1.0), whole_pred,
                    100 * (whole_pred / whole - 1.0), runtime)};
}

Outcome determinism()
{
        const fs::path a = work_dir / "determinism-a";
        const fs::path b = work_dir / "determinism-b";
        const std::string cfg = (scenario_dir / "link86.cfg").string();
        for (const auto& out : {a, b})
        {
                const std::string cmd = "\"" + std::string(FIBERLINK_CLI) + "\" run \"" + cfg + "\" --out \"" +
                                        out.string() + "\" > /dev/null";
                if (std::system(cmd.c_str()) != 0)
                {
                        return {false, "fiberlink run failed"};
                }
        }
        std::size_t files = 0;
        for (const auto& entry : fs::directory_iterator(a))
        {
                const auto name = entry.path().filename();
                std::ifstream fa(a / name, std::ios::binary), fb(b / name, std::ios::binary);
                const std::string sa{std::istreambuf_iterator<char>(fa), std::istreambuf_iterator<char>()};
                const std::string sb{std::istreambuf_iterator<char>(fb), std::istreambuf_iterator<char>()};
                if (sa != sb)
                {
                        return {false, name.string() + " differs between runs"};
                }
                ++files;
        }
        return {files >= 10, fmt("%zu artifacts byte-identical across two runs of link86.cfg", files)};
}
}

int main(int argc, char** argv)
{
        const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
                {"rejection scaling law", rejection_scaling},
                {"rejection magnitude at 1 Hz", rejection_at_1hz},
                {"free-running PSD level", free_running_level},
                {"ADEV slope", adev_slope},
                {"tracking-filter ratio", tracking_ratio},
                {"estimator validation suite", estimator_suite},
                {"budget", budget},
                {"integrated phase", integrated_phase},
                {"cascade oracle", cascade_oracle},
                {"determinism", determinism},
        };

        std::set<std::size_t> selected;
        for (int i = 1; i < argc; ++i)
        {
                selected.insert(static_cast<std::size_t>(std::atoi(argv[i])));
        }
        fs::remove_all(work_dir);
        fs::create_directories(work_dir);

        int failed = 0;
        for (std::size_t i = 0; i < criteria.size(); ++i)
        {
                if (!selected.empty() && !selected.count(i + 1))
                {
                        continue;
                }
                Outcome o;
                try
                {
                        o = criteria[i].second();
                }
                catch (const std::exception& e)
                {
                        o = {false, std::string("exception: ") + e.what()};
                }
                failed += o.pass ? 0 : 1;
                std::cout << (o.pass ? "PASS" : "FAIL") << " C" << i + 1 << " " << criteria[i].first << ": " << o.detail
                          << std::endl;
        }
        fs::remove_all(work_dir);
        return failed == 0 ? 0 : 1;
}
