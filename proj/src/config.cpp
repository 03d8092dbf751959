#include "kinex/config.hpp"

#include <fstream>

#include "kinex/error.hpp"

namespace kinex {

namespace {

using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::InvalidConfig, where + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) fail(where, "missing key '" + key + "'");
    return obj.at(key);
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    return v.get<double>();
}

std::uint64_t count(const json& v, const std::string& where) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        fail(where, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::string text(const json& v, const std::string& where) {
    if (!v.is_string()) fail(where, "expected a string");
    return v.get<std::string>();
}

Band band(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) fail(where, "expected [lo, hi]");
    return {number(v[0], where), number(v[1], where)};
}

json band_json(const Band& b) { return json::array({b.lo, b.hi}); }

ModelSpec parse_model(const json& v) {
    const std::string where = "model";
    const auto type = text(require(v, "type", where), where + ".type");
    if (type == "DY") return NoSaving{};
    if (type == "CC") return UniformSaving{number(require(v, "lambda", where), where + ".lambda")};
    if (type == "CCM") {
        DistributedSaving m;
        if (v.contains("lambda_lo")) m.lo = number(v.at("lambda_lo"), where + ".lambda_lo");
        if (v.contains("lambda_hi")) m.hi = number(v.at("lambda_hi"), where + ".lambda_hi");
        return m;
    }
    fail(where + ".type", "unknown model '" + type + "' (DY, CC, CCM)");
}

json model_json(const ModelSpec& model) {
    return std::visit(overloaded{
                          [](const NoSaving&) { return json{{"type", "DY"}}; },
                          [](const UniformSaving& m) { return json{{"type", "CC"}, {"lambda", m.lambda}}; },
                          [](const DistributedSaving& m) {
                              return json{{"type", "CCM"}, {"lambda_lo", m.lo}, {"lambda_hi", m.hi}};
                          },
                      },
                      model);
}

InitPolicy parse_init(const json& v) {
    const std::string where = "init";
    const auto policy = text(v.is_string() ? v : require(v, "policy", where), where + ".policy");
    if (policy == "equal") return InitEqual{};
    if (policy == "delta") return InitDelta{};
    if (policy == "explicit") {
        const auto& list = require(v, "incomes", where);
        if (!list.is_array()) fail(where + ".incomes", "expected an array");
        InitExplicit e;
        for (const auto& x : list) e.incomes.push_back(number(x, where + ".incomes"));
        return e;
    }
    fail(where + ".policy", "unknown init policy '" + policy + "' (equal, delta, explicit)");
}

json init_json(const InitPolicy& init) {
    return std::visit(overloaded{
                          [](const InitEqual&) { return json{{"policy", "equal"}}; },
                          [](const InitDelta&) { return json{{"policy", "delta"}}; },
                          [](const InitExplicit& e) {
                              return json{{"policy", "explicit"}, {"incomes", e.incomes}};
                          },
                      },
                      init);
}

Event parse_event(const json& v, std::size_t index) {
    const std::string where = "schedule[" + std::to_string(index) + "]";
    Event e;
    e.at_sweep = count(require(v, "at_sweep", where), where + ".at_sweep");
    const auto op = text(require(v, "op", where), where + ".op");
    auto num = [&](const char* key) { return number(require(v, key, where), where + "." + key); };
    if (op == "inflation") {
        e.op = Inflation{num("rate")};
    } else if (op == "injection") {
        MoneyInjection m;
        m.amount = num("amount");
        const auto policy = v.contains("policy") ? text(v.at("policy"), where + ".policy") : "uniform";
        if (policy == "uniform") m.policy = InjectionPolicy::Uniform;
        else if (policy == "proportional") m.policy = InjectionPolicy::Proportional;
        else if (policy == "band") {
            m.policy = InjectionPolicy::BandTargeted;
            m.band = band(require(v, "band", where), where + ".band");
        } else fail(where + ".policy", "unknown injection policy '" + policy + "'");
        e.op = m;
    } else if (op == "unemployment") {
        Unemployment u;
        u.fraction = num("fraction");
        if (v.contains("threshold") == v.contains("threshold_percentile")) {
            fail(where, "give exactly one of 'threshold' or 'threshold_percentile'");
        }
        if (v.contains("threshold")) {
            u.threshold = num("threshold");
        } else {
            u.threshold = num("threshold_percentile");
            u.threshold_kind = ThresholdKind::Percentile;
        }
        e.op = u;
    } else if (op == "transfer") {
        e.op = SectorTransfer{band(require(v, "donor", where), where + ".donor"),
                              band(require(v, "recipient", where), where + ".recipient"),
                              num("fraction")};
    } else if (op == "entry") {
        AgentEntry a;
        a.count = count(require(v, "count", where), where + ".count");
        const auto income = v.contains("income") ? text(v.at("income"), where + ".income") : "zero";
        if (income == "zero") a.income = EntryIncome::Zero;
        else if (income == "fixed") {
            a.income = EntryIncome::Fixed;
            a.value = num("value");
        } else fail(where + ".income", "expected 'zero' or 'fixed'");
        e.op = a;
    } else if (op == "exit") {
        e.op = AgentExit{count(require(v, "count", where), where + ".count"),
                         band(require(v, "band", where), where + ".band")};
    } else {
        fail(where + ".op", "unknown operator '" + op + "'");
    }
    return e;
}

json event_json(const Event& e) {
    json out{{"at_sweep", e.at_sweep}, {"op", operator_name(e.op)}};
    std::visit(overloaded{
                   [&](const Inflation& o) { out["rate"] = o.rate; },
                   [&](const MoneyInjection& o) {
                       out["amount"] = o.amount;
                       switch (o.policy) {
                           case InjectionPolicy::Uniform: out["policy"] = "uniform"; break;
                           case InjectionPolicy::Proportional: out["policy"] = "proportional"; break;
                           case InjectionPolicy::BandTargeted:
                               out["policy"] = "band";
                               out["band"] = band_json(o.band);
                               break;
                       }
                   },
                   [&](const Unemployment& o) {
                       out["fraction"] = o.fraction;
                       out[o.threshold_kind == ThresholdKind::Absolute ? "threshold"
                                                                       : "threshold_percentile"] =
                           o.threshold;
                   },
                   [&](const SectorTransfer& o) {
                       out["donor"] = band_json(o.donor);
                       out["recipient"] = band_json(o.recipient);
                       out["fraction"] = o.fraction;
                   },
                   [&](const AgentEntry& o) {
                       out["count"] = o.count;
                       out["income"] = o.income == EntryIncome::Zero ? "zero" : "fixed";
                       if (o.income == EntryIncome::Fixed) out["value"] = o.value;
                   },
                   [&](const AgentExit& o) {
                       out["count"] = o.count;
                       out["band"] = band_json(o.band);
                   },
               },
               e.op);
    return out;
}

AnalysisDirectives parse_analysis(const json& v) {
    const std::string where = "analysis";
    AnalysisDirectives a;
    if (v.contains("tables")) {
        for (const auto& t : v.at("tables")) {
            const auto name = text(t, where + ".tables");
            if (name != "ccdf" && name != "alpha" && name != "relative" && name != "gini") {
                fail(where + ".tables", "unknown table '" + name + "'");
            }
            a.tables.push_back(name);
        }
    }
    if (v.contains("fit")) {
        const auto& f = v.at("fit");
        const auto method = f.contains("method") ? text(f.at("method"), where + ".fit.method") : "hill";
        if (method == "hill") a.fit.method = FitMethod::Hill;
        else if (method == "ls" || method == "loglog-ls") a.fit.method = FitMethod::LogLogLeastSquares;
        else fail(where + ".fit.method", "expected 'hill' or 'ls'");
        const auto xmin = f.contains("xmin") ? text(f.at("xmin"), where + ".fit.xmin") : "top-fraction";
        if (xmin == "top-fraction") {
            TopFraction t;
            if (f.contains("q")) t.q = number(f.at("q"), where + ".fit.q");
            if (!(t.q > 0.0 && t.q <= 1.0)) fail(where + ".fit.q", "must lie in (0, 1]");
            a.fit.xmin = t;
        } else if (xmin == "ks-min") {
            KsMinimum k;
            if (f.contains("min_tail")) k.min_tail = count(f.at("min_tail"), where + ".fit.min_tail");
            a.fit.xmin = k;
        } else {
            fail(where + ".fit.xmin", "expected 'top-fraction' or 'ks-min'");
        }
    }
    if (v.contains("reference")) {
        const auto& r = v.at("reference");
        if (r.contains("snapshot")) a.reference_snapshot = count(r.at("snapshot"), where + ".reference.snapshot");
        else if (r.contains("sample")) a.reference_sample = text(r.at("sample"), where + ".reference.sample");
        else fail(where + ".reference", "expected 'snapshot' or 'sample'");
    }
    return a;
}

json analysis_json(const AnalysisDirectives& a) {
    json fit{{"method", a.fit.method == FitMethod::Hill ? "hill" : "ls"}};
    if (const auto* t = std::get_if<TopFraction>(&a.fit.xmin)) {
        fit["xmin"] = "top-fraction";
        fit["q"] = t->q;
    } else {
        fit["xmin"] = "ks-min";
        fit["min_tail"] = std::get<KsMinimum>(a.fit.xmin).min_tail;
    }
    json out{{"tables", a.tables}, {"fit", fit}};
    if (a.reference_snapshot) out["reference"] = {{"snapshot", *a.reference_snapshot}};
    else if (a.reference_sample) out["reference"] = {{"sample", *a.reference_sample}};
    return out;
}

}  // namespace

ScenarioConfig parse_scenario_config(const json& doc) {
    if (!doc.is_object()) fail("config", "expected a JSON object");
    ScenarioConfig c;
    c.run.agent_count = count(require(doc, "agents", "config"), "agents");
    c.run.total_money = number(require(doc, "total_money", "config"), "total_money");
    c.run.model = parse_model(require(doc, "model", "config"));
    if (doc.contains("init")) c.run.init = parse_init(doc.at("init"));
    c.run.seed = count(require(doc, "seed", "config"), "seed");
    c.run.sweeps = count(require(doc, "sweeps", "config"), "sweeps");
    c.run.snapshot_every = doc.contains("snapshot_every")
                               ? count(doc.at("snapshot_every"), "snapshot_every")
                               : std::max<std::uint64_t>(c.run.sweeps, 1);
    if (doc.contains("schedule")) {
        const auto& s = doc.at("schedule");
        if (!s.is_array()) fail("schedule", "expected an array");
        for (std::size_t i = 0; i < s.size(); ++i) c.schedule.add(parse_event(s[i], i));
    }
    if (doc.contains("output")) {
        const auto& o = doc.at("output");
        if (o.contains("dir")) c.output_dir = text(o.at("dir"), "output.dir");
    }
    if (doc.contains("analysis")) c.analysis = parse_analysis(doc.at("analysis"));

    c.run.validate();
    c.schedule.validate(c.run.sweeps);
    return c;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::InvalidConfig, "cannot open config " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
    }
    // A run manifest carries its config echo under "config".
    if (doc.is_object() && doc.contains("config") && doc.contains("files")) {
        doc = doc.at("config");
    }
    auto config = parse_scenario_config(doc);
    if (config.analysis.reference_sample) {
        std::filesystem::path ref(*config.analysis.reference_sample);
        if (ref.is_relative()) ref = path.parent_path() / ref;
        config.analysis.reference_sample = std::filesystem::absolute(ref).lexically_normal().string();
    }
    return config;
}

json to_json(const ScenarioConfig& c) {
    json schedule = json::array();
    for (const auto& e : c.schedule.events()) schedule.push_back(event_json(e));
    return json{
        {"agents", c.run.agent_count},
        {"total_money", c.run.total_money},
        {"model", model_json(c.run.model)},
        {"init", init_json(c.run.init)},
        {"seed", c.run.seed},
        {"sweeps", c.run.sweeps},
        {"snapshot_every", c.run.snapshot_every},
        {"schedule", schedule},
        {"output", {{"dir", c.output_dir}}},
        {"analysis", analysis_json(c.analysis)},
    };
}

}  // namespace kinex
