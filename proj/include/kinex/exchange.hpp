#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kinex/rng.hpp"

namespace kinex {

// Money is a double in abstract units.
using Money = double;

struct Population {
    std::vector<Money> incomes;
    // Per-agent saving propensities. Empty unless the model draws one per agent.
    std::vector<double> savings;

    std::size_t size() const noexcept { return incomes.size(); }
    Money total() const noexcept;

    // Throws InvalidState when an invariant is broken.
    void validate() const;
};

/// Pure exchange, no saving (lambda = 0 for everyone).
struct NoSaving {};

/// One propensity shared by all agents.
struct UniformSaving {
    double lambda = 0.0;
};

/// Propensities drawn once per agent from Uniform[lo, hi].
struct DistributedSaving {
    double lo = 0.0;
    double hi = 0.9999;
};

using ModelSpec = std::variant<NoSaving, UniformSaving, DistributedSaving>;

// "DY", "CC" or "CCM".
std::string model_name(const ModelSpec& model);
// Name plus parameters, e.g. "CC(lambda=0.5)".
std::string model_tag(const ModelSpec& model);
void validate_model(const ModelSpec& model);

struct InitEqual {};
struct InitDelta {};
struct InitExplicit {
    std::vector<Money> incomes;
};

using InitPolicy = std::variant<InitEqual, InitDelta, InitExplicit>;

struct RunConfig {
    std::size_t agent_count = 0;
    Money total_money = 0.0;
    ModelSpec model = NoSaving{};
    InitPolicy init = InitEqual{};
    std::uint64_t seed = 0;
    std::uint64_t sweeps = 0;
    std::uint64_t snapshot_every = 1;

    // Throws InvalidConfig.
    void validate() const;
};

struct Snapshot {
    std::uint64_t sweep_index = 0;
    std::vector<Money> incomes;
    Money total_money = 0.0;
    std::string model_tag;
    std::uint64_t seed = 0;
    // True for the extra snapshot emitted right after scheduled events fire.
    bool after_event = false;
};

Population init_population(std::size_t agent_count, Money total_money, const InitPolicy& policy);

// One kinetic exchange between agents i and j:
//   pool = (1 - lambda_i) x_i + (1 - lambda_j) x_j
//   x_i' = lambda_i x_i + eps * pool
//   x_j' = lambda_j x_j + (1 - eps) * pool
// x_j' is computed as (x_i + x_j) - x_i' so the pair total is preserved to a
// single rounding and neither output can go negative.
std::pair<Money, Money> exchange_pair(Money x_i, Money x_j, double lambda_i, double lambda_j,
                                      double eps) noexcept;

// Fills pop.savings according to the model (cleared unless DistributedSaving).
void assign_savings(Population& pop, const ModelSpec& model, Rng& rng);

// N pairwise interactions. Each interaction draws i uniformly, then j uniformly
// among the other N - 1 agents, then eps ~ Uniform[0, 1).
void sweep(Population& pop, const ModelSpec& model, Rng& rng);

// Stateful closed-system run. run() and the scenario runner both drive this.
class Simulation {
public:
    explicit Simulation(const RunConfig& config);

    const Population& population() const noexcept { return pop_; }
    Population& population() noexcept { return pop_; }
    const ModelSpec& model() const noexcept { return config_.model; }
    const RunConfig& config() const noexcept { return config_; }
    Rng& rng() noexcept { return rng_; }
    std::uint64_t sweeps_done() const noexcept { return sweeps_done_; }

    void advance();
    Snapshot snapshot(bool after_event = false) const;

private:
    RunConfig config_;
    Rng rng_;
    Population pop_;
    std::string tag_;
    std::uint64_t sweeps_done_ = 0;
};

// Snapshots at sweep 0 and every snapshot_every sweeps; the final sweep is
// always included.
std::vector<Snapshot> run(const RunConfig& config);

}  // namespace kinex
