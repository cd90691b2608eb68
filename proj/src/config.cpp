#include "augrl/config.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace augrl {

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = {
        {"env.name", "string", "sprite_reacher", "environment (sprite_reacher)"},
        {"train.total_steps", "int", "30000", "environment steps"},
        {"train.seed_steps", "int", "1000", "random-action warmup steps before any update"},
        {"train.batch", "int", "256", "mini-batch size"},
        {"train.updates_per_step", "int", "1", "critic updates per environment step"},
        {"train.actor_update_every", "int", "2", "actor update period in steps"},
        {"train.target_update_every", "int", "2", "target-network update period"},
        {"train.tau", "float", "0.01", "target-network soft-update rate"},
        {"train.eval_interval", "int", "2000", "steps between evaluations"},
        {"train.eval_episodes", "int", "10", "episodes per evaluation (mean action)"},
        {"train.stats_interval", "int", "2000", "steps between statistic records"},
        {"train.stats_batch", "int", "16", "transitions per statistic record"},
        {"train.stats_psi_samples", "int", "16", "psi draws for non-finite families"},
        {"train.buffer_capacity", "int", "100000", "replay buffer capacity"},
        {"train.lr", "float", "0.001", "Adam learning rate for actor and critic"},
        {"train.alpha_lr", "float", "0.001", "Adam learning rate for the entropy coefficient"},
        {"train.expl_noise", "float", "0.2", "exploration noise stddev (deterministic actor)"},
        {"train.auto_update_schedule", "bool", "false",
         "probe transformation complexity and raise the update count when the target family is complex"},
        {"train.probe_fraction", "float", "0.2", "fraction of the budget before the probe"},
        {"loss.base_algo", "string", "sac", "base algorithm: sac | ddpg"},
        {"loss.critic_mode", "string", "implicit",
         "implicit (alias drq/rad) | explicit_sg | explicit_y | svea_asym | generic"},
        {"loss.actor_mode", "string", "implicit",
         "implicit (alias drq/rad) | explicit_kl | kl_aug_target | kl_avg_target | generic"},
        {"loss.M", "int", "2", "augmented draws on s per critic update"},
        {"loss.K", "int", "2", "augmented draws on s' in the target"},
        {"loss.J", "int", "1", "augmented draws on s per actor update"},
        {"loss.eta_draws", "int", "1", "target-policy draws in the invariance term"},
        {"loss.alpha", "float", "0.1", "entropy coefficient"},
        {"loss.alpha_autotune", "bool", "false", "learn the entropy coefficient"},
        {"loss.alpha_q", "float", "1.0", "explicit critic regularization weight"},
        {"loss.alpha_pi", "float", "0.1", "policy invariance (KL) weight"},
        {"loss.alpha_tp", "float", "0.0", "tangent penalty weight (generic critic mode)"},
        {"loss.gamma", "float", "0.99", "discount"},
        {"loss.tangent_draws", "int", "1", "psi draws per item in the tangent penalty"},
        {"loss.svea_weight_simple", "float", "0.5", "weight of the plainly augmented term"},
        {"loss.svea_weight_complex", "float", "0.5", "weight of the complexly augmented term"},
        {"aug.transforms", "string", "shift",
         "comma list of critic channels: shift, overlay, randconv, rotation, blur"},
        {"aug.alpha_i", "string", "",
         "comma list of channel weights; empty = 1.0 for one channel, 0.5 each for two"},
        {"aug.target_transform", "string", "",
         "family used on s' and in the actor terms; empty = first channel (shift for svea_asym)"},
        {"aug.tangent_transform", "string", "",
         "family for the tangent penalty; empty = first shift/blur channel"},
        {"aug.max_pad", "int", "4", "shift offsets lie in [-max_pad, max_pad]^2"},
        {"aug.overlay_beta", "float", "0.5", "overlay blend weight"},
        {"aug.blur_sigma_min", "float", "0.1", "blur stddev lower bound"},
        {"aug.blur_sigma_max", "float", "2.0", "blur stddev upper bound"},
        {"net.channels", "int", "8", "encoder conv channels"},
        {"net.feat_dim", "int", "32", "encoder feature dimension"},
        {"net.hidden", "int", "64", "actor/critic hidden width"},
        {"net.twin_critics", "bool", "true", "use two critic heads with a min target"},
        {"net.shared_encoder", "bool", "true",
         "share the encoder (actor gradients stopped); false trains a separate actor encoder"},
    };
    return schema;
}

std::string config_help_text() {
    std::ostringstream os;
    os << "configuration keys (key = value per line, '#' comments):\n";
    for (const ConfigKey& k : config_schema()) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "  %-28s %-7s default=%-14s %s\n", k.key.c_str(),
                      k.type.c_str(), k.default_value.empty() ? "\"\"" : k.default_value.c_str(),
                      k.description.c_str());
        os << buf;
    }
    return os.str();
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

const ConfigKey* find_key(const std::string& key) {
    for (const ConfigKey& k : config_schema())
        if (k.key == key) return &k;
    return nullptr;
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
    }
}

double parse_float(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct KvView {
    const std::map<std::string, std::string>& kv;

    std::string str(const std::string& key) const {
        auto it = kv.find(key);
        if (it != kv.end()) return it->second;
        return find_key(key)->default_value;
    }
    long long integer(const std::string& key) const { return parse_int(key, str(key)); }
    double number(const std::string& key) const { return parse_float(key, str(key)); }
    bool boolean(const std::string& key) const { return parse_bool(key, str(key)); }
};

TransformSpec spec_for(const std::string& name, const KvView& v) {
    TransformKind kind;
    try {
        kind = transform_kind_from_string(name);
    } catch (const std::exception&) {
        throw ConfigError("invalid transform name in aug.transforms: '" + name + "'");
    }
    switch (kind) {
        case TransformKind::shift:
            return TransformSpec::shift_spec(static_cast<int>(v.integer("aug.max_pad")));
        case TransformKind::overlay:
            return TransformSpec::overlay_spec(v.number("aug.overlay_beta"));
        case TransformKind::randconv:
            return TransformSpec::randconv_spec();
        case TransformKind::rotation:
            return TransformSpec::rotation_spec();
        case TransformKind::blur:
            return TransformSpec::blur_spec(v.number("aug.blur_sigma_min"), v.number("aug.blur_sigma_max"));
    }
    throw ConfigError("invalid transform name: '" + name + "'");
}

ParamDistribution dist_for(const TransformSpec& spec) {
    if (enumerate_params(spec)) return ParamDistribution::uniform_finite(spec);
    return ParamDistribution::continuous(spec);
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::vector<std::string> unknown;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = unquote(trim(t.substr(eq + 1)));
        if (!find_key(key)) {
            unknown.push_back(key);
            continue;
        }
        kv[key] = value;
    }
    if (!unknown.empty()) {
        std::string msg = "unknown configuration key(s):";
        for (const std::string& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    return kv;
}

TrainConfig train_config_from(const std::map<std::string, std::string>& kv) {
    KvView v{kv};
    TrainConfig cfg;

    std::string env_name = v.str("env.name");
    if (env_name != "sprite_reacher")
        throw ConfigError("invalid value for env.name: '" + env_name + "'");

    cfg.total_steps = v.integer("train.total_steps");
    cfg.seed_steps = v.integer("train.seed_steps");
    cfg.batch = static_cast<int>(v.integer("train.batch"));
    cfg.updates_per_step = static_cast<int>(v.integer("train.updates_per_step"));
    cfg.actor_update_every = static_cast<int>(v.integer("train.actor_update_every"));
    cfg.target_update_every = static_cast<int>(v.integer("train.target_update_every"));
    cfg.tau = v.number("train.tau");
    cfg.eval_interval = v.integer("train.eval_interval");
    cfg.eval_episodes = static_cast<int>(v.integer("train.eval_episodes"));
    cfg.stats_interval = v.integer("train.stats_interval");
    cfg.stats_batch = static_cast<int>(v.integer("train.stats_batch"));
    cfg.stats_psi_samples = static_cast<int>(v.integer("train.stats_psi_samples"));
    cfg.buffer_capacity = v.integer("train.buffer_capacity");
    cfg.lr = v.number("train.lr");
    cfg.alpha_lr = v.number("train.alpha_lr");
    cfg.expl_noise = v.number("train.expl_noise");
    cfg.auto_update_schedule = v.boolean("train.auto_update_schedule");
    cfg.probe_fraction = v.number("train.probe_fraction");
    cfg.alpha_autotune = v.boolean("loss.alpha_autotune");

    LossConfig& loss = cfg.loss;
    loss.channels.clear();
    try {
        loss.base_algo = base_algo_from_string(v.str("loss.base_algo"));
    } catch (const std::exception&) {
        throw ConfigError("invalid value for loss.base_algo: '" + v.str("loss.base_algo") + "'");
    }
    try {
        loss.critic_mode = critic_mode_from_string(v.str("loss.critic_mode"));
    } catch (const std::exception&) {
        throw ConfigError("invalid value for loss.critic_mode: '" + v.str("loss.critic_mode") + "'");
    }
    try {
        loss.actor_mode = actor_mode_from_string(v.str("loss.actor_mode"));
    } catch (const std::exception&) {
        throw ConfigError("invalid value for loss.actor_mode: '" + v.str("loss.actor_mode") + "'");
    }
    loss.M = static_cast<int>(v.integer("loss.M"));
    loss.K = static_cast<int>(v.integer("loss.K"));
    loss.J = static_cast<int>(v.integer("loss.J"));
    loss.eta_draws = static_cast<int>(v.integer("loss.eta_draws"));
    loss.alpha = v.number("loss.alpha");
    loss.alpha_q = v.number("loss.alpha_q");
    loss.alpha_pi = v.number("loss.alpha_pi");
    loss.alpha_tp = v.number("loss.alpha_tp");
    loss.gamma = v.number("loss.gamma");
    loss.tangent_draws = static_cast<int>(v.integer("loss.tangent_draws"));
    loss.svea_weight_simple = v.number("loss.svea_weight_simple");
    loss.svea_weight_complex = v.number("loss.svea_weight_complex");

    std::vector<std::string> names = split_list(v.str("aug.transforms"));
    if (names.empty()) throw ConfigError("aug.transforms must name at least one family");
    std::vector<std::string> alpha_list = split_list(v.str("aug.alpha_i"));
    std::vector<double> alphas;
    if (alpha_list.empty()) {
        if (names.size() == 1) alphas = {1.0};
        else if (names.size() == 2) alphas = {0.5, 0.5};
        else alphas.assign(names.size(), 1.0 / static_cast<double>(names.size()));
    } else {
        if (alpha_list.size() != names.size())
            throw ConfigError("aug.alpha_i must list one weight per transform in aug.transforms");
        for (const std::string& a : alpha_list) alphas.push_back(parse_float("aug.alpha_i", a));
    }
    for (size_t i = 0; i < names.size(); ++i) {
        TransformSpec spec = spec_for(names[i], v);
        loss.channels.push_back({spec, dist_for(spec), alphas[i]});
    }

    std::string target_name = v.str("aug.target_transform");
    if (target_name.empty() && loss.critic_mode == CriticMode::svea_asym) target_name = "shift";
    if (target_name.empty()) {
        loss.target_dist = loss.channels[0].dist;
    } else {
        TransformSpec spec = spec_for(target_name, v);
        loss.target_dist = dist_for(spec);
    }

    std::string tangent_name = v.str("aug.tangent_transform");
    if (tangent_name.empty()) {
        loss.tangent_dist = loss.target_dist;
        for (const TransformChannel& ch : loss.channels)
            if (tangent_axis_count(ch.spec) > 0) {
                loss.tangent_dist = ch.dist;
                break;
            }
    } else {
        TransformSpec spec = spec_for(tangent_name, v);
        if (tangent_axis_count(spec) == 0)
            throw ConfigError("aug.tangent_transform must be a shift or blur family, got '" +
                              tangent_name + "'");
        loss.tangent_dist = dist_for(spec);
    }

    cfg.net.channels = static_cast<int>(v.integer("net.channels"));
    cfg.net.feat_dim = static_cast<int>(v.integer("net.feat_dim"));
    cfg.net.hidden = static_cast<int>(v.integer("net.hidden"));
    cfg.net.twin_critics = v.boolean("net.twin_critics");
    cfg.net.shared_encoder = v.boolean("net.shared_encoder");

    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

TrainConfig load_train_config(const std::string& text,
                              const std::map<std::string, std::string>& overrides) {
    std::map<std::string, std::string> kv = parse_config_text(text);
    for (const auto& [k, v] : overrides) {
        if (!find_key(k)) throw ConfigError("unknown configuration key(s): " + k);
        kv[k] = v;
    }
    TrainConfig cfg = train_config_from(kv);
    cfg.config_snapshot = text;
    return cfg;
}

}  // namespace augrl
