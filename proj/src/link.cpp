#include "fiberlink/link.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fiberlink
{
namespace
{
template <class... Ts>
struct overloaded : Ts...
{
        using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const std::string& item_id(const LinkItem& item)
{
        return std::visit([](const auto& x) -> const std::string& { return x.id; }, item);
}

bool bad(double v)
{
        return !std::isfinite(v) || v < 0;
}
}

std::string_view to_string(ElementKind kind) noexcept
{
        switch (kind)
        {
        case ElementKind::oadm:
                return "oadm";
        case ElementKind::connector:
                return "connector";
        case ElementKind::amplifier:
                return "amplifier";
        case ElementKind::coupler:
                return "coupler";
        }
        return "unknown";
}

ElementKind parse_element_kind(std::string_view name)
{
        for (const auto kind : {ElementKind::oadm, ElementKind::connector, ElementKind::amplifier, ElementKind::coupler})
        {
                if (to_string(kind) == name)
                {
                        return kind;
                }
        }
        throw std::invalid_argument("unknown element kind '" + std::string(name) + "'");
}

LinkTopology build_link(const LinkConfig& config)
{
        std::vector<std::string> errors;
        std::set<std::string> ids;
        std::size_t span_count = 0;

        for (const auto& item : config.items)
        {
                const auto& id = item_id(item);
                if (id.empty())
                {
                        errors.push_back("link item without an id");
                }
                else if (!ids.insert(id).second)
                {
                        errors.push_back("duplicate link item id '" + id + "'");
                }
                std::visit(overloaded{
                                   [&](const FiberSpan& s)
                                   {
                                           ++span_count;
                                           if (!(s.length_km > 0) || !std::isfinite(s.length_km))
                                           {
                                                   errors.push_back("span '" + s.id + "': length_km must be positive");
                                           }
                                           if (bad(s.loss_db))
                                           {
                                                   errors.push_back("span '" + s.id + "': loss_db must be non-negative");
                                           }
                                           if (!(s.group_velocity_m_per_s > 0) || !std::isfinite(s.group_velocity_m_per_s))
                                           {
                                                   errors.push_back("span '" + s.id +
                                                                    "': group_velocity_m_per_s must be positive");
                                           }
                                           if (!s.lineic_noise.lineic() && !s.lineic_noise.terms().empty())
                                           {
                                                   errors.push_back("span '" + s.id + "': noise model must be lineic");
                                           }
                                   },
                                   [&](const OpticalElement& e)
                                   {
                                           if (bad(e.insertion_loss_db))
                                           {
                                                   errors.push_back("element '" + e.id +
                                                                    "': insertion_loss_db must be non-negative");
                                           }
                                           if (bad(e.gain_db))
                                           {
                                                   errors.push_back("element '" + e.id + "': gain_db must be non-negative");
                                           }
                                           else if (e.gain_db > 0 && e.kind != ElementKind::amplifier)
                                           {
                                                   errors.push_back("element '" + e.id + "': only amplifiers have gain");
                                           }
                                           if (bad(e.isolation_adjacent_db) || bad(e.isolation_other_db))
                                           {
                                                   errors.push_back("element '" + e.id +
                                                                    "': isolation values must be non-negative");
                                           }
                                   }},
                           item);
        }
        if (span_count == 0)
        {
                errors.push_back("link has no fiber span");
        }
        if (!(config.carrier_frequency_hz > 0) || !std::isfinite(config.carrier_frequency_hz))
        {
                errors.push_back("carrier_frequency_hz must be positive");
        }
        if (bad(config.input_power_w))
        {
                errors.push_back("input_power_w must be non-negative");
        }
        if (bad(config.sensitivity_w))
        {
                errors.push_back("sensitivity_w must be non-negative");
        }

        if (!errors.empty())
        {
                std::ostringstream msg;
                msg << "invalid link:";
                for (const auto& e : errors)
                {
                        msg << "\n  " << e;
                }
                throw std::invalid_argument(msg.str());
        }

        LinkTopology link;
        link.items_ = config.items;
        link.carrier_frequency_hz_ = config.carrier_frequency_hz;
        link.input_power_w_ = config.input_power_w;
        link.sensitivity_w_ = config.sensitivity_w;
        return link;
}

std::vector<FiberSpan> LinkTopology::spans() const
{
        std::vector<FiberSpan> out;
        for (const auto& item : items_)
        {
                if (const auto* s = std::get_if<FiberSpan>(&item))
                {
                        out.push_back(*s);
                }
        }
        return out;
}

const FiberSpan& LinkTopology::span(std::string_view id) const
{
        for (const auto& item : items_)
        {
                if (const auto* s = std::get_if<FiberSpan>(&item); s != nullptr && s->id == id)
                {
                        return *s;
                }
        }
        throw std::out_of_range("no span '" + std::string(id) + "'");
}

double LinkTopology::span_offset_km(std::string_view id) const
{
        double offset = 0;
        for (const auto& item : items_)
        {
                if (const auto* s = std::get_if<FiberSpan>(&item))
                {
                        if (s->id == id)
                        {
                                return offset;
                        }
                        offset += s->length_km;
                }
        }
        throw std::out_of_range("no span '" + std::string(id) + "'");
}

double LinkTopology::total_length_km() const noexcept
{
        double total = 0;
        for (const auto& item : items_)
        {
                if (const auto* s = std::get_if<FiberSpan>(&item))
                {
                        total += s->length_km;
                }
        }
        return total;
}

double LinkTopology::one_way_delay_s() const noexcept
{
        double total = 0;
        for (const auto& item : items_)
        {
                if (const auto* s = std::get_if<FiberSpan>(&item))
                {
                        total += s->one_way_delay_s();
                }
        }
        return total;
}

double LinkTopology::delay_at_km(double position_km) const
{
        const double length = total_length_km();
        // Allow for rounding in positions computed from span sums.
        const double slack = 1e-9 * std::max(1.0, length);
        if (!(position_km >= -slack) || !(position_km <= length + slack))
        {
                throw std::out_of_range("position " + std::to_string(position_km) + " km is outside the link");
        }
        double start = 0;
        double delay = 0;
        for (const auto& item : items_)
        {
                const auto* s = std::get_if<FiberSpan>(&item);
                if (s == nullptr)
                {
                        continue;
                }
                const double end = start + s->length_km;
                if (position_km <= end)
                {
                        const double inside = std::max(0.0, position_km - start);
                        return delay + inside * 1000.0 / s->group_velocity_m_per_s;
                }
                delay += s->one_way_delay_s();
                start = end;
        }
        return delay;
}

BudgetReport link_budget(const LinkTopology& link, Direction direction)
{
        BudgetReport report;
        report.input_power_w = link.input_power_w();

        std::vector<const LinkItem*> order;
        for (const auto& item : link.items())
        {
                order.push_back(&item);
        }
        if (direction == Direction::backward)
        {
                std::reverse(order.begin(), order.end());
        }

        double cumulative = 0;
        for (const auto* item : order)
        {
                BudgetEntry entry;
                std::visit(overloaded{[&](const FiberSpan& s)
                                      {
                                              entry.element_id = s.id;
                                              entry.kind = "span";
                                              entry.loss_db = s.loss_db;
                                      },
                                      [&](const OpticalElement& e)
                                      {
                                              entry.element_id = e.id;
                                              entry.kind = std::string(to_string(e.kind));
                                              entry.loss_db = e.insertion_loss_db;
                                              // A one-way amplifier passes nothing useful backwards.
                                              const bool active = e.bidirectional || direction == Direction::forward;
                                              entry.gain_db = active ? e.gain_db : 0.0;
                                      }},
                           *item);
                cumulative += entry.loss_db - entry.gain_db;
                entry.cumulative_db = cumulative;
                entry.power_w = report.input_power_w * std::pow(10.0, -cumulative / 10.0);
                report.total_one_way_loss_db += entry.loss_db;
                report.total_gain_db += entry.gain_db;
                if (entry.power_w < link.sensitivity_w())
                {
                        report.warnings.push_back("heterodyne detection marginal after '" + entry.element_id + "'");
                }
                report.ledger.push_back(std::move(entry));
        }
        report.net_one_way_loss_db = report.total_one_way_loss_db - report.total_gain_db;

        // Out on the forward ledger, back on the backward one.
        double back_net = 0;
        if (direction == Direction::forward)
        {
                double back_gain = 0;
                double back_loss = 0;
                for (const auto& item : link.items())
                {
                        if (const auto* e = std::get_if<OpticalElement>(&item))
                        {
                                back_loss += e->insertion_loss_db;
                                back_gain += e->bidirectional ? e->gain_db : 0.0;
                        }
                        else
                        {
                                back_loss += std::get<FiberSpan>(item).loss_db;
                        }
                }
                back_net = back_loss - back_gain;
                report.total_round_trip_loss_db = report.net_one_way_loss_db + back_net;
        }
        else
        {
                report.total_round_trip_loss_db = link_budget(link, Direction::forward).total_round_trip_loss_db;
        }
        return report;
}

double node_power_w(const BudgetReport& report, std::string_view element_id)
{
        for (const auto& entry : report.ledger)
        {
                if (entry.element_id == element_id)
                {
                        return entry.power_w;
                }
        }
        throw std::out_of_range("no ledger entry '" + std::string(element_id) + "'");
}

CrosstalkReport crosstalk_report(const LinkTopology& link, double data_channel_power_w, std::size_t channel_separation)
{
        if (channel_separation == 0)
        {
                throw std::invalid_argument("channel separation must be at least one grid slot");
        }
        if (bad(data_channel_power_w))
        {
                throw std::invalid_argument("data channel power must be non-negative");
        }
        const BudgetReport budget = link_budget(link);
        CrosstalkReport report;
        report.channel_separation = channel_separation;
        report.data_channel_power_w = data_channel_power_w;

        for (const auto& item : link.items())
        {
                const auto* e = std::get_if<OpticalElement>(&item);
                if (e == nullptr || e->kind != ElementKind::oadm)
                {
                        continue;
                }
                CrosstalkEntry entry;
                entry.element_id = e->id;
                entry.isolation_db = channel_separation == 1 ? e->isolation_adjacent_db : e->isolation_other_db;
                entry.leaked_power_w = data_channel_power_w * std::pow(10.0, -entry.isolation_db / 10.0);
                entry.metrology_power_w = node_power_w(budget, e->id);
                entry.margin_db = entry.leaked_power_w > 0
                                          ? 10.0 * std::log10(entry.metrology_power_w / entry.leaked_power_w)
                                          : std::numeric_limits<double>::infinity();
                report.entries.push_back(std::move(entry));
        }
        if (report.entries.empty())
        {
                throw std::invalid_argument("link has no OADM");
        }
        return report;
}

std::vector<PositionDelay> propagation_delays(const LinkTopology& link, const std::vector<double>& positions_km)
{
        const double tau = link.one_way_delay_s();
        std::vector<PositionDelay> out;
        out.reserve(positions_km.size());
        for (const double z : positions_km)
        {
                const double one_way = link.delay_at_km(z);
                out.push_back({z, one_way, 2.0 * tau - one_way});
        }
        return out;
}
}
