#pragma once

#include "fiberlink/link.hpp"
#include "fiberlink/metrology.hpp"
#include "fiberlink/phase_series.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fiberlink
{
// A file or directory could not be written or read.
class OutputError : public std::runtime_error
{
public:
        using std::runtime_error::runtime_error;
};
}

namespace fiberlink::csv
{
// Decimal scientific notation, 9 significant digits.
std::string format_number(double value);

struct Table
{
        std::vector<std::string> header;
        std::vector<std::vector<double>> columns;
};

// Header row, then comma-separated rows. Throws OutputError on I/O failure.
void write(const std::filesystem::path& path, const Table& table);

// Numeric CSV with a header row. Throws OutputError when unreadable and
// std::invalid_argument when malformed.
Table read(const std::filesystem::path& path);

void write_psd(const std::filesystem::path& path, const PsdEstimate& psd);
void write_adev(const std::filesystem::path& path, const AdevSeries& adev);
void write_rejection(const std::filesystem::path& path, const RejectionSpectrum& rejection);
void write_phase(const std::filesystem::path& path, const PhaseSeries& series, std::size_t decimation = 1);
void write_frequency(const std::filesystem::path& path, const FractionalFreqSeries& y);
void write_budget(const std::filesystem::path& path, const BudgetReport& budget);

// t_s, residual_phase_rad, correction_phase_rad.
void write_transfer(const std::filesystem::path& path, const PhaseSeries& residual, const PhaseSeries& correction,
                    std::size_t decimation = 1);
}
