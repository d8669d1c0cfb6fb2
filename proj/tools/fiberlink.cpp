#include "fiberlink/csv.hpp"
#include "fiberlink/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace
{
namespace fs = std::filesystem;
using namespace fiberlink;

enum Exit
{
        ok = 0,
        config_error = 1,
        simulation_failure = 2,
        io_failure = 3
};

// Explicit --out wins; otherwise the output root from FIBERLINK_OUT (or the
// working directory) joined with the configured directory or the file stem.
fs::path output_dir(const std::string& explicit_out, const std::string& configured, const fs::path& cfg)
{
        if (!explicit_out.empty())
        {
                return explicit_out;
        }
        const char* root = std::getenv("FIBERLINK_OUT");
        const fs::path base = root != nullptr && *root != '\0' ? fs::path(root) : fs::current_path();
        return base / (configured.empty() ? cfg.stem().string() : configured);
}

int report_config_error(const ConfigError& e)
{
        for (const auto& line : e.errors())
        {
                std::cerr << "error: " << line << '\n';
        }
        return config_error;
}

int validate(const fs::path& cfg)
{
        const ValidationResult result = validate_config(cfg);
        for (const auto& w : result.warnings)
        {
                std::cout << "warning: " << w << '\n';
        }
        for (const auto& e : result.errors)
        {
                std::cerr << "error: " << e << '\n';
        }
        if (!result.ok())
        {
                return config_error;
        }
        std::cout << cfg.string() << ": valid\n";
        return ok;
}

int run(const fs::path& cfg, const std::string& out)
{
        const Scenario sc = load_scenario(cfg);
        const fs::path dir = output_dir(out, sc.outputs.directory, cfg);
        const RunReport report = run_scenario(sc, dir);
        std::cout << format_report(report);
        std::cout << "wrote " << report.artifacts.size() << " files to " << dir.string() << '\n';
        return ok;
}

int plan(const fs::path& cfg, const std::string& out)
{
        const RouteScenario rs = load_route(cfg);
        const fs::path dir = output_dir(out, rs.outputs.directory, cfg);
        const PlanOutput result = run_plan(cfg, dir);
        std::cout << result.plan.segments.size() << " segment(s), " << result.plan.stations.size()
                  << " interior station(s)\n";
        for (const auto& p : result.prediction.adev)
        {
                std::cout << "  tau " << p.tau_s << " s  predicted adev " << p.sigma << '\n';
        }
        std::cout << "wrote " << result.artifacts.size() << " files to " << dir.string() << '\n';
        return ok;
}

int analyze(const fs::path& input, bool adev, double nu0, double segment_s, const std::string& out)
{
        if (adev)
        {
                const auto series = analyze_adev(input, nu0);
                if (out.empty())
                {
                        std::cout << "tau_s,adev,count\n";
                        for (const auto& p : series)
                        {
                                std::cout << csv::format_number(p.tau_s) << ',' << csv::format_number(p.sigma) << ','
                                          << csv::format_number(static_cast<double>(p.count)) << '\n';
                        }
                }
                else
                {
                        csv::write_adev(out, series);
                }
                return ok;
        }
        const auto psd = analyze_psd(input, segment_s);
        if (out.empty())
        {
                std::cout << "freq_hz,psd_rad2_per_hz\n";
                for (std::size_t i = 0; i < psd.values.size(); ++i)
                {
                        std::cout << csv::format_number(psd.frequency_hz[i]) << ','
                                  << csv::format_number(psd.values[i]) << '\n';
                }
        }
        else
        {
                csv::write_psd(out, psd);
        }
        return ok;
}
}

int main(int argc, char** argv)
{
        CLI::App app{"Simulate and analyse compensated optical fiber frequency links"};
        app.require_subcommand(1);

        std::string cfg;
        std::string out;
        auto* v = app.add_subcommand("validate", "Check a scenario or route file and list every problem");
        v->add_option("config", cfg, "Scenario or route file")->required();

        auto* r = app.add_subcommand("run", "Simulate a scenario and write CSV artifacts and report.txt");
        r->add_option("config", cfg, "Scenario file")->required();
        r->add_option("--out", out, "Output directory (default: $FIBERLINK_OUT/<outputs.directory>)");

        auto* p = app.add_subcommand("plan", "Plan a multi-segment cascade for a route");
        p->add_option("config", cfg, "Route file")->required();
        p->add_option("--out", out, "Output directory (default: $FIBERLINK_OUT/<outputs.directory>)");

        std::string input;
        bool adev = false;
        bool psd = false;
        double nu0 = fiberlink::default_carrier_frequency_hz;
        double segment_s = 0;
        auto* a = app.add_subcommand("analyze", "ADEV or PSD of a time-series CSV");
        a->add_option("csv", input, "CSV with t_s and phase_rad (or y) columns")->required()->check(CLI::ExistingFile);
        auto* adev_flag = a->add_flag("--adev", adev, "Overlapping Allan deviation");
        auto* psd_flag = a->add_flag("--psd", psd, "Welch phase PSD");
        adev_flag->excludes(psd_flag);
        a->add_option("--nu0", nu0, "Carrier frequency in Hz");
        a->add_option("--segment-s", segment_s, "Welch segment length in s");
        a->add_option("--out", out, "Write the result to this CSV instead of stdout");

        try
        {
                app.parse(argc, argv);
        }
        catch (const CLI::ParseError& e)
        {
                return app.exit(e) == 0 ? ok : config_error;
        }

        try
        {
                if (*v)
                {
                        return validate(cfg);
                }
                if (*r)
                {
                        return run(cfg, out);
                }
                if (*p)
                {
                        return plan(cfg, out);
                }
                if (!adev && !psd)
                {
                        std::cerr << "error: analyze needs --adev or --psd\n";
                        return config_error;
                }
                return analyze(input, adev, nu0, segment_s, out);
        }
        catch (const fiberlink::ConfigError& e)
        {
                return report_config_error(e);
        }
        catch (const fiberlink::PlanError& e)
        {
                std::cerr << "error: " << e.what() << '\n';
                return config_error;
        }
        catch (const fiberlink::OutputError& e)
        {
                std::cerr << "error: " << e.what() << '\n';
                return io_failure;
        }
        catch (const fiberlink::UnstableLoopError& e)
        {
                std::cerr << "simulation failed: " << e.what() << '\n';
                return simulation_failure;
        }
        catch (const std::invalid_argument& e)
        {
                std::cerr << "error: " << e.what() << '\n';
                return *a ? config_error : simulation_failure;
        }
        catch (const std::exception& e)
        {
                std::cerr << "simulation failed: " << e.what() << '\n';
                return simulation_failure;
        }
}
