#include "fiberlink/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fiberlink::csv
{
namespace
{
std::ofstream open_out(const std::filesystem::path& path)
{
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
        {
                throw OutputError("cannot write " + path.string());
        }
        return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
        out.flush();
        if (!out)
        {
                throw OutputError("failed while writing " + path.string());
        }
}

std::vector<std::string> split(const std::string& line)
{
        std::vector<std::string> fields;
        std::string field;
        std::istringstream in(line);
        while (std::getline(in, field, ','))
        {
                if (!field.empty() && field.back() == '\r')
                {
                        field.pop_back();
                }
                fields.push_back(field);
        }
        return fields;
}

std::size_t step(std::size_t decimation)
{
        return decimation == 0 ? 1 : decimation;
}
}

std::string format_number(double value)
{
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.8e", value);
        return buf;
}

void write(const std::filesystem::path& path, const Table& table)
{
        if (table.columns.size() != table.header.size())
        {
                throw std::invalid_argument("table header and columns differ in count");
        }
        const std::size_t rows = table.columns.empty() ? 0 : table.columns.front().size();
        for (const auto& c : table.columns)
        {
                if (c.size() != rows)
                {
                        throw std::invalid_argument("table columns differ in length");
                }
        }

        auto out = open_out(path);
        for (std::size_t j = 0; j < table.header.size(); ++j)
        {
                out << (j ? "," : "") << table.header[j];
        }
        out << '\n';
        std::string line;
        for (std::size_t i = 0; i < rows; ++i)
        {
                line.clear();
                for (std::size_t j = 0; j < table.columns.size(); ++j)
                {
                        if (j)
                        {
                                line += ',';
                        }
                        line += format_number(table.columns[j][i]);
                }
                out << line << '\n';
        }
        finish(out, path);
}

Table read(const std::filesystem::path& path)
{
        std::ifstream in(path);
        if (!in)
        {
                throw OutputError("cannot read " + path.string());
        }
        Table table;
        std::string line;
        if (!std::getline(in, line))
        {
                throw std::invalid_argument(path.string() + " is empty");
        }
        table.header = split(line);
        table.columns.resize(table.header.size());
        std::size_t line_no = 1;
        while (std::getline(in, line))
        {
                ++line_no;
                if (line.empty() || line == "\r")
                {
                        continue;
                }
                const auto fields = split(line);
                if (fields.size() != table.header.size())
                {
                        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                                    ": wrong number of fields");
                }
                for (std::size_t j = 0; j < fields.size(); ++j)
                {
                        char* end = nullptr;
                        errno = 0;
                        const double v = std::strtod(fields[j].c_str(), &end);
                        if (end == fields[j].c_str() || *end != '\0')
                        {
                                throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                                            ": not a number '" + fields[j] + "'");
                        }
                        table.columns[j].push_back(v);
                }
        }
        return table;
}

void write_psd(const std::filesystem::path& path, const PsdEstimate& psd)
{
        write(path, {{"freq_hz", "psd_rad2_per_hz"}, {psd.frequency_hz, psd.values}});
}

void write_adev(const std::filesystem::path& path, const AdevSeries& adev)
{
        Table t{{"tau_s", "adev", "count"}, {{}, {}, {}}};
        for (const auto& p : adev)
        {
                t.columns[0].push_back(p.tau_s);
                t.columns[1].push_back(p.sigma);
                t.columns[2].push_back(static_cast<double>(p.count));
        }
        write(path, t);
}

void write_rejection(const std::filesystem::path& path, const RejectionSpectrum& rejection)
{
        write(path, {{"freq_hz", "rejection_db"}, {rejection.frequency_hz, rejection.db}});
}

void write_phase(const std::filesystem::path& path, const PhaseSeries& series, std::size_t decimation)
{
        Table t{{"t_s", "phase_rad"}, {{}, {}}};
        for (std::size_t i = 0; i < series.size(); i += step(decimation))
        {
                t.columns[0].push_back(series.time_at(i));
                t.columns[1].push_back(series.samples[i]);
        }
        write(path, t);
}

void write_frequency(const std::filesystem::path& path, const FractionalFreqSeries& y)
{
        Table t{{"t_s", "y"}, {{}, {}}};
        for (std::size_t i = 0; i < y.y.size(); ++i)
        {
                t.columns[0].push_back(static_cast<double>(i) * y.gate_s);
                t.columns[1].push_back(y.y[i]);
        }
        write(path, t);
}

void write_budget(const std::filesystem::path& path, const BudgetReport& budget)
{
        auto out = open_out(path);
        out << "element_id,kind,loss_db,gain_db,cumulative_db,power_w\n";
        for (const auto& e : budget.ledger)
        {
                out << e.element_id << ',' << e.kind << ',' << format_number(e.loss_db) << ','
                    << format_number(e.gain_db) << ',' << format_number(e.cumulative_db) << ','
                    << format_number(e.power_w) << '\n';
        }
        finish(out, path);
}

void write_transfer(const std::filesystem::path& path, const PhaseSeries& residual, const PhaseSeries& correction,
                    std::size_t decimation)
{
        if (residual.size() != correction.size())
        {
                throw std::invalid_argument("residual and correction differ in length");
        }
        Table t{{"t_s", "residual_phase_rad", "correction_phase_rad"}, {{}, {}, {}}};
        for (std::size_t i = 0; i < residual.size(); i += step(decimation))
        {
                t.columns[0].push_back(residual.time_at(i));
                t.columns[1].push_back(residual.samples[i]);
                t.columns[2].push_back(correction.samples[i]);
        }
        write(path, t);
}
}
