#include "kinex/open_system.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kinex/error.hpp"

namespace kinex {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

bool is_fraction(double v) { return v >= 0.0 && v <= 1.0; }

// Round to nearest, ties to even.
std::size_t round_count(double v) {
    return static_cast<std::size_t>(std::nearbyint(v));
}

// Moves a uniformly random k-subset of items to the front (partial Fisher-Yates).
void choose_front(std::vector<std::size_t>& items, std::size_t k, Rng& rng) {
    for (std::size_t a = 0; a < k; ++a) {
        const auto b = a + static_cast<std::size_t>(rng.below(items.size() - a));
        std::swap(items[a], items[b]);
    }
}

void require_band(const Band& band, ErrorKind kind) {
    if (!(band.lo >= 0.0 && band.lo < band.hi && band.hi <= 1.0)) {
        throw Error(kind, "percentile band must satisfy 0 <= lo < hi <= 1");
    }
}

void check_operator(const Operator& op, ErrorKind kind) {
    std::visit(
        overloaded{
            [&](const Inflation& e) {
                if (!(e.rate > -1.0) || !std::isfinite(e.rate)) {
                    throw Error(kind, "inflation rate must exceed -1");
                }
            },
            [&](const MoneyInjection& e) {
                if (!(e.amount >= 0.0) || !std::isfinite(e.amount)) {
                    throw Error(kind, "injected amount must be non-negative");
                }
                if (e.policy == InjectionPolicy::BandTargeted) require_band(e.band, kind);
            },
            [&](const Unemployment& e) {
                if (!is_fraction(e.fraction)) {
                    throw Error(kind, "unemployment fraction must lie in [0, 1]");
                }
                if (e.threshold_kind == ThresholdKind::Absolute && !(e.threshold > 0.0)) {
                    throw Error(kind, "unemployment threshold must be positive");
                }
                if (e.threshold_kind == ThresholdKind::Percentile &&
                    !(e.threshold > 0.0 && e.threshold <= 1.0)) {
                    throw Error(kind, "unemployment percentile must lie in (0, 1]");
                }
            },
            [&](const SectorTransfer& e) {
                require_band(e.donor, kind);
                require_band(e.recipient, kind);
                if (!bands_disjoint(e.donor, e.recipient)) {
                    throw Error(kind, "donor and recipient bands overlap");
                }
                if (!is_fraction(e.fraction)) {
                    throw Error(kind, "transfer fraction must lie in [0, 1]");
                }
            },
            [&](const AgentEntry& e) {
                if (e.income == EntryIncome::Fixed && (!(e.value >= 0.0) || !std::isfinite(e.value))) {
                    throw Error(kind, "entrant income must be non-negative");
                }
            },
            [&](const AgentExit& e) { require_band(e.band, kind); },
        },
        op);
}

}  // namespace

void validate_band(const Band& band) { require_band(band, ErrorKind::InvalidParameter); }

bool bands_disjoint(const Band& a, const Band& b) { return a.hi <= b.lo || b.hi <= a.lo; }

std::vector<std::size_t> band_members(const Population& pop, const Band& band) {
    validate_band(band);
    const std::size_t n = pop.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pop.incomes[a] < pop.incomes[b];
    });
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < n; ++r) {
        const double rank = static_cast<double>(r) / static_cast<double>(n);
        if (band.lo <= rank && (rank < band.hi || band.hi >= 1.0)) {
            members.push_back(order[r]);
        }
    }
    return members;
}

std::string operator_name(const Operator& op) {
    return std::visit(overloaded{
                          [](const Inflation&) { return std::string("inflation"); },
                          [](const MoneyInjection&) { return std::string("injection"); },
                          [](const Unemployment&) { return std::string("unemployment"); },
                          [](const SectorTransfer&) { return std::string("transfer"); },
                          [](const AgentEntry&) { return std::string("entry"); },
                          [](const AgentExit&) { return std::string("exit"); },
                      },
                      op);
}

Schedule::Schedule(std::vector<Event> events) {
    for (auto& e : events) add(std::move(e));
}

void Schedule::add(Event event) {
    const auto pos = std::upper_bound(
        events_.begin(), events_.end(), event.at_sweep,
        [](std::uint64_t t, const Event& e) { return t < e.at_sweep; });
    events_.insert(pos, std::move(event));
}

void Schedule::validate(std::uint64_t sweeps) const {
    for (std::size_t i = 0; i < events_.size(); ++i) {
        const auto& e = events_[i];
        if (e.at_sweep > sweeps) {
            throw Error(ErrorKind::InvalidConfig, "event " + std::to_string(i) + " at sweep " +
                                                      std::to_string(e.at_sweep) +
                                                      " is past the end of the run");
        }
        check_operator(e.op, ErrorKind::InvalidConfig);
    }
}

void apply_inflation(Population& pop, double rate) {
    check_operator(Inflation{rate}, ErrorKind::InvalidParameter);
    const double factor = 1.0 + rate;
    for (auto& x : pop.incomes) x *= factor;
}

void inject_money(Population& pop, Money amount, InjectionPolicy policy, const Band& band) {
    check_operator(MoneyInjection{amount, policy, band}, ErrorKind::InvalidParameter);
    if (pop.size() == 0) {
        throw Error(ErrorKind::UndefinedAllocation, "no agents to receive the injection");
    }
    switch (policy) {
        case InjectionPolicy::Uniform: {
            const Money share = amount / static_cast<double>(pop.size());
            for (auto& x : pop.incomes) x += share;
            break;
        }
        case InjectionPolicy::Proportional: {
            const Money total = pop.total();
            if (!(total > 0.0)) {
                throw Error(ErrorKind::UndefinedAllocation,
                            "proportional injection into a population with no money");
            }
            for (auto& x : pop.incomes) x += amount * (x / total);
            break;
        }
        case InjectionPolicy::BandTargeted: {
            const auto members = band_members(pop, band);
            if (members.empty()) {
                throw Error(ErrorKind::UndefinedAllocation, "injection band holds no agents");
            }
            const Money share = amount / static_cast<double>(members.size());
            for (const auto i : members) pop.incomes[i] += share;
            break;
        }
    }
}

void apply_unemployment(Population& pop, double fraction, Money threshold, Rng& rng) {
    check_operator(Unemployment{fraction, threshold, ThresholdKind::Absolute},
                   ErrorKind::InvalidParameter);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        if (pop.incomes[i] > 0.0 && pop.incomes[i] < threshold) eligible.push_back(i);
    }
    const std::size_t k = std::min(eligible.size(),
                                   round_count(fraction * static_cast<double>(eligible.size())));
    choose_front(eligible, k, rng);
    for (std::size_t a = 0; a < k; ++a) pop.incomes[eligible[a]] = 0.0;
}

void sector_transfer(Population& pop, const Band& donor, const Band& recipient, double fraction) {
    check_operator(SectorTransfer{donor, recipient, fraction}, ErrorKind::InvalidParameter);
    const auto donors = band_members(pop, donor);
    const auto recipients = band_members(pop, recipient);
    if (recipients.empty()) {
        throw Error(ErrorKind::UndefinedAllocation, "recipient band holds no agents");
    }
    Money pool = 0.0;
    for (const auto i : donors) {
        const Money taken = fraction * pop.incomes[i];
        pop.incomes[i] -= taken;
        pool += taken;
    }
    Money recipient_total = 0.0;
    for (const auto i : recipients) recipient_total += pop.incomes[i];
    if (recipient_total > 0.0) {
        for (const auto i : recipients) pop.incomes[i] += pool * (pop.incomes[i] / recipient_total);
    } else {
        const Money share = pool / static_cast<double>(recipients.size());
        for (const auto i : recipients) pop.incomes[i] += share;
    }
}

void adjust_agents(Population& pop, const AgentEntry& entry, const ModelSpec& model, Rng& rng) {
    check_operator(entry, ErrorKind::InvalidParameter);
    const Money income = entry.income == EntryIncome::Fixed ? entry.value : 0.0;
    pop.incomes.insert(pop.incomes.end(), entry.count, income);
    if (const auto* m = std::get_if<DistributedSaving>(&model)) {
        for (std::size_t a = 0; a < entry.count; ++a) {
            pop.savings.push_back(rng.uniform(m->lo, m->hi));
        }
    }
}

void adjust_agents(Population& pop, const AgentExit& exit, Rng& rng) {
    check_operator(exit, ErrorKind::InvalidParameter);
    auto members = band_members(pop, exit.band);
    if (exit.count > members.size()) {
        throw Error(ErrorKind::InvalidParameter,
                    "cannot remove " + std::to_string(exit.count) + " agents from a band of " +
                        std::to_string(members.size()));
    }
    if (pop.size() - exit.count < 2) {
        throw Error(ErrorKind::InvalidParameter, "exit would leave fewer than 2 agents");
    }
    choose_front(members, exit.count, rng);
    std::vector<bool> leaving(pop.size(), false);
    for (std::size_t a = 0; a < exit.count; ++a) leaving[members[a]] = true;

    const bool has_savings = !pop.savings.empty();
    std::size_t out = 0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        if (leaving[i]) continue;
        pop.incomes[out] = pop.incomes[i];
        if (has_savings) pop.savings[out] = pop.savings[i];
        ++out;
    }
    pop.incomes.resize(out);
    if (has_savings) pop.savings.resize(out);
}

Money resolve_threshold(const Population& pop, const Unemployment& event) {
    if (event.threshold_kind == ThresholdKind::Absolute) {
        return event.threshold;
    }
    std::vector<Money> sorted = pop.incomes;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = std::min(
        sorted.size() - 1,
        static_cast<std::size_t>(std::floor(event.threshold * static_cast<double>(sorted.size()))));
    return sorted[rank];
}

EventRecord apply_event(Population& pop, const Event& event, const ModelSpec& model, Rng& rng) {
    EventRecord rec;
    rec.at_sweep = event.at_sweep;
    rec.op = operator_name(event.op);
    rec.total_before = pop.total();
    rec.agents_before = pop.size();
    std::visit(overloaded{
                   [&](const Inflation& e) { apply_inflation(pop, e.rate); },
                   [&](const MoneyInjection& e) { inject_money(pop, e.amount, e.policy, e.band); },
                   [&](const Unemployment& e) {
                       const Money threshold = resolve_threshold(pop, e);
                       if (threshold > 0.0) apply_unemployment(pop, e.fraction, threshold, rng);
                   },
                   [&](const SectorTransfer& e) {
                       sector_transfer(pop, e.donor, e.recipient, e.fraction);
                   },
                   [&](const AgentEntry& e) { adjust_agents(pop, e, model, rng); },
                   [&](const AgentExit& e) { adjust_agents(pop, e, rng); },
               },
               event.op);
    rec.total_after = pop.total();
    rec.agents_after = pop.size();
    return rec;
}

ScenarioResult run_scenario(const RunConfig& config, const Schedule& schedule) {
    config.validate();
    schedule.validate(config.sweeps);

    Simulation sim(config);
    ScenarioResult result;
    const auto& events = schedule.events();
    std::size_t next = 0;

    auto fire_due = [&] {
        bool fired = false;
        while (next < events.size() && events[next].at_sweep == sim.sweeps_done()) {
            result.events.push_back(
                apply_event(sim.population(), events[next], sim.model(), sim.rng()));
            ++next;
            fired = true;
        }
        if (fired) result.snapshots.push_back(sim.snapshot(true));
    };

    result.snapshots.push_back(sim.snapshot());
    fire_due();
    while (sim.sweeps_done() < config.sweeps) {
        sim.advance();
        const auto t = sim.sweeps_done();
        if (t % config.snapshot_every == 0 || t == config.sweeps) {
            result.snapshots.push_back(sim.snapshot());
        }
        fire_due();
    }
    return result;
}

}  // namespace kinex
