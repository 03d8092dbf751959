#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "kinex/exchange.hpp"
#include "kinex/rng.hpp"

namespace kinex {

// Percentile band [lo, hi) on the ascending income ranking; hi == 1 closes the band.
// Agent at 0-based rank r of N belongs iff lo <= r/N < hi.
struct Band {
    double lo = 0.0;
    double hi = 1.0;
};

void validate_band(const Band& band);
bool bands_disjoint(const Band& a, const Band& b);
// Agent indices in the band, ascending by income (ties by index).
std::vector<std::size_t> band_members(const Population& pop, const Band& band);

struct Inflation {
    double rate = 0.0;
};

enum class InjectionPolicy { Uniform, Proportional, BandTargeted };

struct MoneyInjection {
    Money amount = 0.0;
    InjectionPolicy policy = InjectionPolicy::Uniform;
    Band band{};  // BandTargeted only
};

enum class ThresholdKind { Absolute, Percentile };

// Zero the income of a random fraction of agents with 0 < x < threshold.
// A percentile threshold resolves to the income at rank floor(p N) when the event fires.
struct Unemployment {
    double fraction = 0.0;
    double threshold = 0.0;
    ThresholdKind threshold_kind = ThresholdKind::Absolute;
};

struct SectorTransfer {
    Band donor{};
    Band recipient{};
    double fraction = 0.0;
};

enum class EntryIncome { Zero, Fixed };

struct AgentEntry {
    std::size_t count = 0;
    EntryIncome income = EntryIncome::Zero;
    Money value = 0.0;
};

struct AgentExit {
    std::size_t count = 0;
    Band band{};
};

using Operator =
    std::variant<Inflation, MoneyInjection, Unemployment, SectorTransfer, AgentEntry, AgentExit>;

std::string operator_name(const Operator& op);

struct Event {
    std::uint64_t at_sweep = 0;
    Operator op;
};

// Events kept ordered by at_sweep; equal sweeps keep insertion order.
class Schedule {
public:
    Schedule() = default;
    explicit Schedule(std::vector<Event> events);

    void add(Event event);
    const std::vector<Event>& events() const noexcept { return events_; }
    bool empty() const noexcept { return events_.empty(); }

    // Throws InvalidConfig on bad parameters or events past the last sweep.
    void validate(std::uint64_t sweeps) const;

private:
    std::vector<Event> events_;
};

// Operators throw InvalidParameter / UndefinedAllocation on bad input.
void apply_inflation(Population& pop, double rate);
void inject_money(Population& pop, Money amount, InjectionPolicy policy, const Band& band = {});
void apply_unemployment(Population& pop, double fraction, Money threshold, Rng& rng);
void sector_transfer(Population& pop, const Band& donor, const Band& recipient, double fraction);
void adjust_agents(Population& pop, const AgentEntry& entry, const ModelSpec& model, Rng& rng);
void adjust_agents(Population& pop, const AgentExit& exit, Rng& rng);

// Resolves an Unemployment threshold against the current population.
Money resolve_threshold(const Population& pop, const Unemployment& event);

struct EventRecord {
    std::uint64_t at_sweep = 0;
    std::string op;
    Money total_before = 0.0;
    Money total_after = 0.0;
    std::size_t agents_before = 0;
    std::size_t agents_after = 0;
};

// Applies any operator, drawing randomness from rng.
EventRecord apply_event(Population& pop, const Event& event, const ModelSpec& model, Rng& rng);

struct ScenarioResult {
    std::vector<Snapshot> snapshots;
    std::vector<EventRecord> events;
};

// Like run(), except events with at_sweep == t fire once t sweeps are done and
// before the next sweep's exchanges; a snapshot flagged after_event follows every
// sweep index at which events fired.
ScenarioResult run_scenario(const RunConfig& config, const Schedule& schedule);

}  // namespace kinex
