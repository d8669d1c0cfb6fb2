#pragma once

#include "fiberlink/power_law.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fiberlink
{
inline constexpr double default_group_velocity_m_per_s = 2.0e8;

// c / 1542.14 nm.
inline constexpr double default_carrier_frequency_hz = 1.944e14;

inline constexpr double default_sensitivity_w = 10e-9;

struct FiberSpan
{
        std::string id;
        double length_km = 0.0;
        PowerLawNoiseModel lineic_noise{{}, true};
        double loss_db = 0.0;
        double group_velocity_m_per_s = default_group_velocity_m_per_s;

        double one_way_delay_s() const noexcept
        {
                return length_km * 1000.0 / group_velocity_m_per_s;
        }
};

enum class ElementKind
{
        oadm,
        connector,
        amplifier,
        coupler
};

std::string_view to_string(ElementKind kind) noexcept;

// Throws std::invalid_argument for an unknown kind name.
ElementKind parse_element_kind(std::string_view name);

// Lumped optical element. Elements have no length and no delay.
struct OpticalElement
{
        std::string id;
        ElementKind kind = ElementKind::connector;
        double insertion_loss_db = 0.0;
        double gain_db = 0.0;
        double isolation_adjacent_db = 0.0;
        double isolation_other_db = 0.0;
        bool bidirectional = true;
};

using LinkItem = std::variant<FiberSpan, OpticalElement>;

struct LinkConfig
{
        std::vector<LinkItem> items;
        double carrier_frequency_hz = default_carrier_frequency_hz;
        double input_power_w = 2e-3;
        double sensitivity_w = default_sensitivity_w;
};

// Validated, immutable link. The default-constructed topology is the empty
// degenerate link; build_link never returns one.
class LinkTopology
{
public:
        LinkTopology() = default;

        const std::vector<LinkItem>& items() const noexcept
        {
                return items_;
        }

        std::vector<FiberSpan> spans() const;

        const FiberSpan& span(std::string_view id) const;

        // Distance from the input to the start of the span.
        double span_offset_km(std::string_view id) const;

        double total_length_km() const noexcept;

        double one_way_delay_s() const noexcept;

        // One-way delay from the input to a position along the link.
        double delay_at_km(double position_km) const;

        double carrier_frequency_hz() const noexcept
        {
                return carrier_frequency_hz_;
        }

        double input_power_w() const noexcept
        {
                return input_power_w_;
        }

        double sensitivity_w() const noexcept
        {
                return sensitivity_w_;
        }

private:
        friend LinkTopology build_link(const LinkConfig& config);

        std::vector<LinkItem> items_;
        double carrier_frequency_hz_ = default_carrier_frequency_hz;
        double input_power_w_ = 0.0;
        double sensitivity_w_ = default_sensitivity_w;
};

// Throws std::invalid_argument listing every violated invariant.
LinkTopology build_link(const LinkConfig& config);

// --- loss budget -----------------------------------------------------------

struct BudgetEntry
{
        std::string element_id;
        std::string kind;
        double loss_db = 0.0;
        double gain_db = 0.0;
        double cumulative_db = 0.0;
        double power_w = 0.0;
};

enum class Direction
{
        forward,
        backward
};

struct BudgetReport
{
        std::vector<BudgetEntry> ledger;
        double total_one_way_loss_db = 0.0;
        double total_gain_db = 0.0;
        double net_one_way_loss_db = 0.0;
        double total_round_trip_loss_db = 0.0;
        double input_power_w = 0.0;
        std::vector<std::string> warnings;
};

// Node powers follow input_power * 10^(-cumulative_db / 10), where
// cumulative_db is the running net loss (losses minus gains).
BudgetReport link_budget(const LinkTopology& link, Direction direction = Direction::forward);

// Power at the node following the named item (forward direction).
double node_power_w(const BudgetReport& report, std::string_view element_id);

// --- crosstalk -------------------------------------------------------------

struct CrosstalkEntry
{
        std::string element_id;
        double isolation_db = 0.0;
        double leaked_power_w = 0.0;
        double metrology_power_w = 0.0;
        double margin_db = 0.0;
};

struct CrosstalkReport
{
        std::size_t channel_separation = 0;
        double data_channel_power_w = 0.0;
        std::vector<CrosstalkEntry> entries;
};

// Separation 1 uses the adjacent-channel isolation, larger separations the
// other-channel isolation. Throws when the link has no OADM.
CrosstalkReport crosstalk_report(const LinkTopology& link, double data_channel_power_w, std::size_t channel_separation);

// --- delays ----------------------------------------------------------------

struct PositionDelay
{
        double position_km = 0.0;
        // Input to position.
        double one_way_s = 0.0;
        // Launch at the input to the return pass at this position, after the
        // reflection at the far end: 2 * tau_link - one_way.
        double round_trip_s = 0.0;
};

std::vector<PositionDelay> propagation_delays(const LinkTopology& link, const std::vector<double>& positions_km);
}
