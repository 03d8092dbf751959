#include "kinex/exchange.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kinex/error.hpp"

namespace kinex {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

bool valid_propensity(double lambda) { return lambda >= 0.0 && lambda < 1.0; }

// Hot loop, specialised on how an agent's propensity is looked up.
template <class PropensityOf>
void exchange_loop(std::vector<Money>& x, Rng& rng, PropensityOf propensity_of) {
    const std::size_t n = x.size();
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(rng.below(n));
        auto j = static_cast<std::size_t>(rng.below(n - 1));
        if (j >= i) {
            ++j;
        }
        const double eps = rng.uniform();
        const auto [xi, xj] = exchange_pair(x[i], x[j], propensity_of(i), propensity_of(j), eps);
        x[i] = xi;
        x[j] = xj;
    }
}

}  // namespace

Money Population::total() const noexcept {
    return std::accumulate(incomes.begin(), incomes.end(), Money{0});
}

void Population::validate() const {
    for (std::size_t i = 0; i < incomes.size(); ++i) {
        if (!(incomes[i] >= 0.0) || !std::isfinite(incomes[i])) {
            throw Error(ErrorKind::InvalidState,
                        "agent " + std::to_string(i) + " has invalid income");
        }
    }
    if (!savings.empty()) {
        if (savings.size() != incomes.size()) {
            throw Error(ErrorKind::InvalidState, "savings and incomes differ in length");
        }
        for (double lambda : savings) {
            if (!valid_propensity(lambda)) {
                throw Error(ErrorKind::InvalidState, "saving propensity outside [0, 1)");
            }
        }
    }
}

std::string model_name(const ModelSpec& model) {
    return std::visit(overloaded{
                          [](const NoSaving&) { return std::string("DY"); },
                          [](const UniformSaving&) { return std::string("CC"); },
                          [](const DistributedSaving&) { return std::string("CCM"); },
                      },
                      model);
}

std::string model_tag(const ModelSpec& model) {
    std::ostringstream os;
    os.precision(17);
    std::visit(overloaded{
                   [&](const NoSaving&) { os << "DY"; },
                   [&](const UniformSaving& m) { os << "CC(lambda=" << m.lambda << ")"; },
                   [&](const DistributedSaving& m) {
                       os << "CCM(lambda_lo=" << m.lo << ",lambda_hi=" << m.hi << ")";
                   },
               },
               model);
    return os.str();
}

void validate_model(const ModelSpec& model) {
    std::visit(overloaded{
                   [](const NoSaving&) {},
                   [](const UniformSaving& m) {
                       if (!valid_propensity(m.lambda)) {
                           throw Error(ErrorKind::InvalidConfig, "CC lambda must lie in [0, 1)");
                       }
                   },
                   [](const DistributedSaving& m) {
                       if (!(m.lo >= 0.0 && m.lo <= m.hi && m.hi < 1.0)) {
                           throw Error(ErrorKind::InvalidConfig,
                                       "CCM requires 0 <= lambda_lo <= lambda_hi < 1");
                       }
                   },
               },
               model);
}

void RunConfig::validate() const {
    if (agent_count < 2) {
        throw Error(ErrorKind::InvalidConfig, "agent count must be at least 2");
    }
    if (!(total_money > 0.0) || !std::isfinite(total_money)) {
        throw Error(ErrorKind::InvalidConfig, "total money must be positive and finite");
    }
    if (snapshot_every == 0) {
        throw Error(ErrorKind::InvalidConfig, "snapshot_every must be positive");
    }
    if (sweeps > 0 && snapshot_every > sweeps) {
        throw Error(ErrorKind::InvalidConfig, "snapshot_every exceeds sweeps");
    }
    validate_model(model);
    if (const auto* expl = std::get_if<InitExplicit>(&init)) {
        if (expl->incomes.size() != agent_count) {
            throw Error(ErrorKind::InvalidConfig, "explicit incomes do not match agent count");
        }
        const Money sum = std::accumulate(expl->incomes.begin(), expl->incomes.end(), Money{0});
        if (std::abs(sum - total_money) > 1e-9 * total_money) {
            throw Error(ErrorKind::InvalidConfig, "explicit incomes do not sum to total money");
        }
    }
}

Population init_population(std::size_t agent_count, Money total_money, const InitPolicy& policy) {
    if (agent_count < 2) {
        throw Error(ErrorKind::InvalidConfig, "agent count must be at least 2");
    }
    if (!(total_money > 0.0) || !std::isfinite(total_money)) {
        throw Error(ErrorKind::InvalidConfig, "total money must be positive and finite");
    }
    Population pop;
    std::visit(overloaded{
                   [&](const InitEqual&) {
                       pop.incomes.assign(agent_count,
                                          total_money / static_cast<double>(agent_count));
                   },
                   [&](const InitDelta&) {
                       pop.incomes.assign(agent_count, 0.0);
                       pop.incomes.front() = total_money;
                   },
                   [&](const InitExplicit& e) {
                       if (e.incomes.size() != agent_count) {
                           throw Error(ErrorKind::InvalidConfig,
                                       "explicit incomes do not match agent count");
                       }
                       pop.incomes = e.incomes;
                   },
               },
               policy);
    try {
        pop.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::InvalidConfig, e.what());
    }
    return pop;
}

std::pair<Money, Money> exchange_pair(Money x_i, Money x_j, double lambda_i, double lambda_j,
                                      double eps) noexcept {
    const Money pair_total = x_i + x_j;
    const Money pool = (1.0 - lambda_i) * x_i + (1.0 - lambda_j) * x_j;
    const Money new_i = std::min(lambda_i * x_i + eps * pool, pair_total);
    return {new_i, pair_total - new_i};
}

void assign_savings(Population& pop, const ModelSpec& model, Rng& rng) {
    pop.savings.clear();
    if (const auto* m = std::get_if<DistributedSaving>(&model)) {
        pop.savings.resize(pop.size());
        for (auto& lambda : pop.savings) {
            lambda = rng.uniform(m->lo, m->hi);
        }
    }
}

void sweep(Population& pop, const ModelSpec& model, Rng& rng) {
    if (pop.size() < 2) {
        throw Error(ErrorKind::InvalidState, "a sweep needs at least 2 agents");
    }
    std::visit(overloaded{
                   [&](const NoSaving&) {
                       exchange_loop(pop.incomes, rng, [](std::size_t) { return 0.0; });
                   },
                   [&](const UniformSaving& m) {
                       const double lambda = m.lambda;
                       exchange_loop(pop.incomes, rng, [lambda](std::size_t) { return lambda; });
                   },
                   [&](const DistributedSaving&) {
                       if (pop.savings.size() != pop.size()) {
                           throw Error(ErrorKind::InvalidState,
                                       "CCM population has no saving propensities assigned");
                       }
                       const double* lambdas = pop.savings.data();
                       exchange_loop(pop.incomes, rng,
                                     [lambdas](std::size_t a) { return lambdas[a]; });
                   },
               },
               model);
}

Simulation::Simulation(const RunConfig& config)
    : config_(config), rng_(config.seed), tag_(model_tag(config.model)) {
    config_.validate();
    pop_ = init_population(config_.agent_count, config_.total_money, config_.init);
    assign_savings(pop_, config_.model, rng_);
}

void Simulation::advance() {
    sweep(pop_, config_.model, rng_);
    ++sweeps_done_;
}

Snapshot Simulation::snapshot(bool after_event) const {
    Snapshot snap;
    snap.sweep_index = sweeps_done_;
    snap.incomes = pop_.incomes;
    snap.total_money = pop_.total();
    snap.model_tag = tag_;
    snap.seed = config_.seed;
    snap.after_event = after_event;
    return snap;
}

std::vector<Snapshot> run(const RunConfig& config) {
    Simulation sim(config);
    std::vector<Snapshot> out;
    out.push_back(sim.snapshot());
    while (sim.sweeps_done() < config.sweeps) {
        sim.advance();
        const auto t = sim.sweeps_done();
        if (t % config.snapshot_every == 0 || t == config.sweeps) {
            out.push_back(sim.snapshot());
        }
    }
    return out;
}

}  // namespace kinex
