#include "dgan/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

#include "dgan/errors.hpp"

namespace dgan {

namespace {

using nlohmann::json;

// Strict object view: every key must be consumed, leftovers are an error.
class ObjectReader {
  public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& required(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(path_ + ": missing required key '" + key + "'");
        return take(key);
    }

    const json* optional(const std::string& key) {
        if (!j_.contains(key)) return nullptr;
        return &take(key);
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        const json* v = optional(key);
        if (!v) return fallback;
        return convert<T>(*v, key);
    }

    template <typename T>
    T get_required(const std::string& key) {
        return convert<T>(required(key), key);
    }

    std::string child_path(const std::string& key) const { return path_ + "/" + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!consumed_.count(key))
                throw ConfigError(path_ + ": unknown key '" + key + "'");
    }

  private:
    const json& take(const std::string& key) {
        consumed_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    T convert(const json& v, const std::string& key) const {
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "/" + key + ": wrong type");
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> consumed_;
};

DatasetSpec parse_dataset(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string kind = r.get_required<std::string>("kind");
    if (kind == "ring") {
        RingSpec ring;
        ring.modes = r.get<std::size_t>("modes", ring.modes);
        ring.radius = r.get<double>("radius", ring.radius);
        ring.sigma = r.get<double>("sigma", ring.sigma);
        ring.per_mode = r.get<std::size_t>("per_mode", ring.per_mode);
        r.finish();
        return ring;
    }
    if (kind == "idx") {
        IdxSpec idx;
        idx.images = r.get_required<std::string>("images");
        idx.labels = r.get_required<std::string>("labels");
        r.finish();
        return idx;
    }
    throw ConfigError(path + "/kind: unknown dataset kind '" + kind + "'");
}

PartitionSpec parse_partition(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string scheme = r.get_required<std::string>("scheme");
    if (scheme == "by_label") {
        ByLabel by;
        by.groups = r.get_required<std::vector<std::vector<int>>>("groups");
        by.allow_shared = r.get<bool>("allow_shared", false);
        by.allow_unassigned = r.get<bool>("allow_unassigned", false);
        r.finish();
        return by;
    }
    if (scheme == "shard") {
        Shard shard;
        shard.users = r.get_required<std::size_t>("users");
        r.finish();
        return shard; // seed is derived from seeds.data when the run starts
    }
    if (scheme == "none") {
        r.finish();
        return NoPartition{};
    }
    throw ConfigError(path + "/scheme: unknown partition scheme '" + scheme + "'");
}

SelectionPolicy parse_policy(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string kind = r.get_required<std::string>("kind");
    if (kind == "max_magnitude") {
        r.finish();
        return MaxMagnitude{};
    }
    if (kind == "threshold") {
        Threshold th;
        th.tau = r.get_required<double>("tau");
        r.finish();
        return th;
    }
    if (kind == "random_fraction") {
        RandomFraction rf;
        rf.fraction = r.get_required<double>("fraction");
        rf.seed = r.get<std::uint64_t>("seed", 0);
        r.finish();
        return rf;
    }
    throw ConfigError(path + "/kind: unknown selection policy '" + kind + "'");
}

NoiseDistribution parse_noise(const std::string& name, const std::string& path) {
    if (name == "normal") return NoiseDistribution::Normal;
    if (name == "uniform") return NoiseDistribution::Uniform;
    throw ConfigError(path + ": unknown noise distribution '" + name + "'");
}

} // namespace

ExperimentConfig parse_config(const json& doc) {
    ObjectReader root(doc, "config");
    ExperimentConfig cfg;

    if (const json* j = root.optional("dataset"))
        cfg.dataset = parse_dataset(*j, root.child_path("dataset"));
    if (const json* j = root.optional("partition"))
        cfg.part = parse_partition(*j, root.child_path("partition"));

    {
        const json& j = root.required("strategy");
        ObjectReader r(j, root.child_path("strategy"));
        cfg.strategy.kind = strategy_from_name(r.get_required<std::string>("kind"));
        cfg.strategy.epochs = r.get_required<std::size_t>("epochs");
        cfg.strategy.users = r.get<std::size_t>(
            "users", cfg.strategy.kind == StrategyKind::Baseline ? 1 : 2);
        if (const json* p = r.optional("policy"))
            cfg.strategy.policy = parse_policy(*p, r.child_path("policy"));
        cfg.strategy.fake_refresh = r.get<std::size_t>("fake_refresh", 1);
        cfg.strategy.upload_fraction = r.get<double>("upload_fraction", 1.0);
        cfg.strategy.g_steps = r.get<std::size_t>("g_steps", 1);
        cfg.strategy.lr_server = r.get<double>("lr_server", 0.1);
        if (const json* u = r.optional("restrict_to_user"))
            cfg.restrict_to_user = u->get<int>();
        r.finish();
    }

    if (const json* j = root.optional("gan")) {
        ObjectReader r(*j, root.child_path("gan"));
        TrainConfig& t = cfg.strategy.gan_cfg;
        t.batch_real = r.get<std::size_t>("batch_real", t.batch_real);
        t.batch_fake = r.get<std::size_t>("batch_fake", t.batch_fake);
        t.lr_d = r.get<double>("lr_d", t.lr_d);
        t.lr_g = r.get<double>("lr_g", t.lr_g);
        t.d_steps_per_g_step = r.get<std::size_t>("d_steps_per_g_step", t.d_steps_per_g_step);
        cfg.strategy.noise = parse_noise(r.get<std::string>("noise", "normal"),
                                         r.child_path("noise"));
        r.finish();
    }

    if (const json* j = root.optional("network")) {
        ObjectReader r(*j, root.child_path("network"));
        cfg.network.generator = r.get<std::string>("generator", cfg.network.generator);
        cfg.network.discriminator = r.get<std::string>("discriminator",
                                                       cfg.network.discriminator);
        cfg.network.noise_dim = r.get<std::size_t>("noise_dim", cfg.network.noise_dim);
        cfg.network.hidden = r.get<std::size_t>("hidden", cfg.network.hidden);
        r.finish();
    }

    if (const json* j = root.optional("seeds")) {
        ObjectReader r(*j, root.child_path("seeds"));
        cfg.seeds.data = r.get<std::uint64_t>("data", cfg.seeds.data);
        cfg.seeds.init = r.get<std::uint64_t>("init", cfg.seeds.init);
        cfg.seeds.train = r.get<std::uint64_t>("train", cfg.seeds.train);
        r.finish();
    }

    if (const json* j = root.optional("eval")) {
        ObjectReader r(*j, root.child_path("eval"));
        cfg.eval.samples = r.get<std::size_t>("samples", cfg.eval.samples);
        cfg.eval.every = r.get<std::size_t>("every", cfg.eval.every);
        cfg.eval.threshold_count = r.get<std::size_t>("threshold_count",
                                                      cfg.eval.threshold_count);
        r.finish();
    }

    if (const json* j = root.optional("output")) {
        ObjectReader r(*j, root.child_path("output"));
        cfg.output.dir = r.get<std::string>("dir", cfg.output.dir);
        cfg.strategy.record_wall_ms = r.get<bool>("record_wall_ms", false);
        r.finish();
    }

    cfg.strategy.workers = root.get<std::size_t>("workers", 0);

    if (const json* j = root.optional("asserts")) {
        ObjectReader r(*j, root.child_path("asserts"));
        if (const json* v = r.optional("min_covered_modes"))
            cfg.asserts.min_covered_modes = v->get<std::size_t>();
        if (const json* v = r.optional("min_quality"))
            cfg.asserts.min_quality = v->get<double>();
        r.finish();
    }

    root.finish();
    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    try {
        strategy.validate();
    } catch (const SpecError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (eval.samples == 0) throw ConfigError("config: eval/samples must be positive");
    if (output.dir.empty()) throw ConfigError("config: output/dir must not be empty");
    if (restrict_to_user) {
        if (strategy.kind != StrategyKind::Baseline)
            throw ConfigError("config: restrict_to_user is only valid for the baseline strategy");
        if (std::holds_alternative<NoPartition>(part))
            throw ConfigError("config: restrict_to_user needs a partition scheme");
        if (*restrict_to_user < 0)
            throw ConfigError("config: restrict_to_user must be non-negative");
    }
    if (strategy.kind != StrategyKind::Baseline && std::holds_alternative<NoPartition>(part))
        throw ConfigError("config: " + strategy_name(strategy.kind) +
                          " needs a partition scheme");
    if (const auto* shard = std::get_if<Shard>(&part)) {
        if (strategy.kind != StrategyKind::Baseline && shard->users != strategy.users)
            throw ConfigError("config: partition users must match strategy users");
    }
    if (const auto* by = std::get_if<ByLabel>(&part)) {
        if (strategy.kind != StrategyKind::Baseline && by->groups.size() != strategy.users)
            throw ConfigError("config: partition group count must match strategy users");
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return parse_config(doc);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

nlohmann::json config_echo(const ExperimentConfig& cfg) {
    json doc;

    if (const auto* ring = std::get_if<RingSpec>(&cfg.dataset)) {
        doc["dataset"] = {{"kind", "ring"}, {"modes", ring->modes}, {"radius", ring->radius},
                          {"sigma", ring->sigma}, {"per_mode", ring->per_mode}};
    } else {
        const auto& idx = std::get<IdxSpec>(cfg.dataset);
        doc["dataset"] = {{"kind", "idx"}, {"images", idx.images}, {"labels", idx.labels}};
    }

    if (const auto* by = std::get_if<ByLabel>(&cfg.part)) {
        doc["partition"] = {{"scheme", "by_label"}, {"groups", by->groups},
                            {"allow_shared", by->allow_shared},
                            {"allow_unassigned", by->allow_unassigned}};
    } else if (const auto* shard = std::get_if<Shard>(&cfg.part)) {
        doc["partition"] = {{"scheme", "shard"}, {"users", shard->users}};
    } else {
        doc["partition"] = {{"scheme", "none"}};
    }

    json strat = {{"kind", strategy_name(cfg.strategy.kind)},
                  {"epochs", cfg.strategy.epochs},
                  {"users", cfg.strategy.users}};
    if (cfg.strategy.kind == StrategyKind::Federated) {
        json policy;
        if (const auto* rf = std::get_if<RandomFraction>(&cfg.strategy.policy))
            policy = {{"kind", "random_fraction"}, {"fraction", rf->fraction}, {"seed", rf->seed}};
        else if (const auto* th = std::get_if<Threshold>(&cfg.strategy.policy))
            policy = {{"kind", "threshold"}, {"tau", th->tau}};
        else
            policy = {{"kind", "max_magnitude"}};
        strat["policy"] = policy;
        strat["fake_refresh"] = cfg.strategy.fake_refresh;
        strat["upload_fraction"] = cfg.strategy.upload_fraction;
        strat["g_steps"] = cfg.strategy.g_steps;
        strat["lr_server"] = cfg.strategy.lr_server;
    }
    if (cfg.restrict_to_user) strat["restrict_to_user"] = *cfg.restrict_to_user;
    doc["strategy"] = strat;

    doc["gan"] = {{"batch_real", cfg.strategy.gan_cfg.batch_real},
                  {"batch_fake", cfg.strategy.gan_cfg.batch_fake},
                  {"lr_d", cfg.strategy.gan_cfg.lr_d},
                  {"lr_g", cfg.strategy.gan_cfg.lr_g},
                  {"d_steps_per_g_step", cfg.strategy.gan_cfg.d_steps_per_g_step},
                  {"noise", cfg.strategy.noise == NoiseDistribution::Normal ? "normal"
                                                                            : "uniform"}};
    doc["network"] = {{"generator", cfg.network.generator},
                      {"discriminator", cfg.network.discriminator},
                      {"noise_dim", cfg.network.noise_dim},
                      {"hidden", cfg.network.hidden}};
    doc["seeds"] = {{"data", cfg.seeds.data}, {"init", cfg.seeds.init},
                    {"train", cfg.seeds.train}};
    doc["eval"] = {{"samples", cfg.eval.samples}, {"every", cfg.eval.every},
                   {"threshold_count", cfg.eval.threshold_count}};
    doc["output"] = {{"dir", cfg.output.dir},
                     {"record_wall_ms", cfg.strategy.record_wall_ms}};
    doc["workers"] = cfg.strategy.workers;
    if (cfg.asserts.min_covered_modes || cfg.asserts.min_quality) {
        json a = json::object();
        if (cfg.asserts.min_covered_modes) a["min_covered_modes"] = *cfg.asserts.min_covered_modes;
        if (cfg.asserts.min_quality) a["min_quality"] = *cfg.asserts.min_quality;
        doc["asserts"] = a;
    }
    return doc;
}

} // namespace dgan
