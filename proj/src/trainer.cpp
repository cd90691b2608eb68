#include "augrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace augrl {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;
}

void TrainConfig::validate() const {
    loss.validate();
    if (total_steps < 0) throw std::invalid_argument("train config: total_steps must be >= 0");
    if (batch < 1) throw std::invalid_argument("train config: batch must be >= 1");
    if (updates_per_step < 1) throw std::invalid_argument("train config: updates_per_step must be >= 1");
    if (actor_update_every < 1) throw std::invalid_argument("train config: actor_update_every must be >= 1");
    if (target_update_every < 1) throw std::invalid_argument("train config: target_update_every must be >= 1");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("train config: tau must be in (0, 1]");
    if (eval_interval < 1 || stats_interval < 1)
        throw std::invalid_argument("train config: intervals must be >= 1");
    if (buffer_capacity < 1) throw std::invalid_argument("train config: buffer_capacity must be >= 1");
    if (!(probe_fraction > 0.0 && probe_fraction < 1.0))
        throw std::invalid_argument("train config: probe_fraction must be in (0, 1)");
}

std::string build_id() {
#ifdef AUGRL_BUILD_ID
    return AUGRL_BUILD_ID;
#else
    return "unknown";
#endif
}

std::string metrics_csv_header() {
    return "step,eval_return,critic_loss,actor_loss,std_critic_loss,std_target_q,"
           "std_actor_loss,kl_aug,cos_sim_actor,cos_sim_critic\n";
}

std::string metrics_csv_row(const MetricsRow& r) {
    char buf[400];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step,
                  r.eval_return, r.critic_loss, r.actor_loss, r.stats.std_critic_loss,
                  r.stats.std_target_q, r.stats.std_actor_loss, r.stats.kl_aug,
                  r.stats.cos_sim_actor, r.stats.cos_sim_critic);
    return buf;
}

namespace {

std::vector<TransformParam> stat_psi_set(const ParamDistribution& dist, int samples,
                                         RandomStream& rng, std::vector<double>* weights) {
    if (dist.finite()) {
        *weights = dist.weights;
        return dist.support;
    }
    std::vector<TransformParam> psi = sample_params(dist, samples, rng);
    weights->assign(psi.size(), 1.0 / static_cast<double>(psi.size()));
    return psi;
}

double weighted_std(const std::vector<double>& v, const std::vector<double>& w) {
    double m = 0.0;
    for (size_t i = 0; i < v.size(); ++i) m += w[i] * v[i];
    double acc = 0.0;
    for (size_t i = 0; i < v.size(); ++i) acc += w[i] * (v[i] - m) * (v[i] - m);
    return std::sqrt(std::max(0.0, acc));
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 1.0;
}

int draw_index(const std::vector<double>& weights, RandomStream& rng) {
    double u = rng.uniform(), acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

}  // namespace

StatsRecord record_stats(const LossConfig& loss, Nets& nets, const TargetNets& targets,
                         const Batch& batch, RandomStream& rng, int psi_samples, int resamples) {
    StatsRecord rec;
    if (batch.empty()) return rec;
    std::vector<double> weights;
    std::vector<TransformParam> psi = stat_psi_set(loss.target_dist, psi_samples, rng, &weights);
    const TransformSpec& spec = loss.target_dist.spec;
    size_t S = psi.size();
    size_t B = batch.size();
    bool degenerate = S == 1;  // a point mass has no spread by definition
    int adim = static_cast<int>(batch.front()->a.size());
    bool sac = loss.base_algo == BaseAlgo::sac;

    // shared action noise per item, then one target-noise row per item
    std::vector<std::vector<double>> xi(B), ynoise(B);
    for (size_t i = 0; i < B; ++i) {
        xi[i].resize(static_cast<size_t>(adim));
        for (double& x : xi[i]) x = rng.normal();
    }
    for (size_t i = 0; i < B; ++i) {
        ynoise[i].resize(static_cast<size_t>(adim));
        for (double& x : ynoise[i]) x = rng.normal();
    }

    Tensor batch_actions({static_cast<int>(B), adim});
    for (size_t i = 0; i < B; ++i)
        for (int d = 0; d < adim; ++d)
            batch_actions[static_cast<long long>(i) * adim + d] = batch[i]->a[static_cast<size_t>(d)];

    // per-transform tables, one batched pass per transform
    std::vector<std::vector<double>> q_min(S), y_tab(S), aloss(S);
    for (size_t j = 0; j < S; ++j) {
        std::vector<FrameStack> aug, aug2;
        aug.reserve(B);
        aug2.reserve(B);
        for (size_t i = 0; i < B; ++i) {
            aug.push_back(apply_transform(spec, psi[j], batch[i]->s));
            aug2.push_back(apply_transform(spec, psi[j], batch[i]->s2));
        }
        Tensor feat = encode_batch(nets.enc, aug);
        q_min[j] = critic_min_batch(nets.q1, nets.q2, nets.cfg.twin_critics, feat, batch_actions).v;

        {  // single-draw bootstrap target per item at this transform
            Tensor tfeat = encode_batch(targets.enc, aug2);
            Tensor act({static_cast<int>(B), adim});
            std::vector<double> logps(B, 0.0);
            if (sac) {
                Tensor ofeat = encode_batch(nets.actor_encoder(), aug2);
                Tensor mean, log_std;
                actor_batch(nets.actor, ofeat, &mean, &log_std);
                for (size_t i = 0; i < B; ++i) {
                    double lp = 0.0;
                    for (int d = 0; d < adim; ++d) {
                        double ls = log_std[static_cast<long long>(i) * adim + d];
                        double u = mean[static_cast<long long>(i) * adim + d] +
                                   std::exp(ls) * ynoise[i][static_cast<size_t>(d)];
                        act[static_cast<long long>(i) * adim + d] = std::tanh(u);
                        lp += -0.5 * ynoise[i][static_cast<size_t>(d)] * ynoise[i][static_cast<size_t>(d)] - ls -
                              kHalfLog2Pi - log_one_minus_tanh_sq(u);
                    }
                    logps[i] = lp;
                }
            } else {
                Tensor mean;
                actor_batch(*targets.actor, tfeat, &mean, nullptr);
                for (long long i = 0; i < act.size(); ++i) act[i] = std::tanh(mean[i]);
            }
            Tensor qt = critic_min_batch(targets.q1, targets.q2, nets.cfg.twin_critics, tfeat, act);
            y_tab[j].resize(B);
            for (size_t i = 0; i < B; ++i) {
                if (batch[i]->done) {
                    y_tab[j][i] = batch[i]->r;
                } else {
                    double w = qt[static_cast<long long>(i)];
                    if (sac) w -= loss.alpha * logps[i];
                    y_tab[j][i] = batch[i]->r + loss.gamma * (w / 1.0);
                }
            }
        }

        {  // per-item actor loss at this transform, shared noise across transforms
            Tensor afeat = encode_batch(nets.actor_encoder(), aug);
            Tensor mean, log_std;
            actor_batch(nets.actor, afeat, &mean, &log_std);
            Tensor act({static_cast<int>(B), adim});
            std::vector<double> logps(B, 0.0);
            for (size_t i = 0; i < B; ++i) {
                double lp = 0.0;
                for (int d = 0; d < adim; ++d) {
                    long long r = static_cast<long long>(i) * adim + d;
                    double u = sac ? mean[r] + std::exp(log_std[r]) * xi[i][static_cast<size_t>(d)] : mean[r];
                    act[r] = std::tanh(u);
                    if (sac)
                        lp += -0.5 * xi[i][static_cast<size_t>(d)] * xi[i][static_cast<size_t>(d)] -
                              log_std[r] - kHalfLog2Pi - log_one_minus_tanh_sq(u);
                }
                logps[i] = lp;
            }
            Tensor feat_q = nets.cfg.shared_encoder ? feat : encode_batch(nets.enc, aug);
            Tensor qa = critic_min_batch(nets.q1, nets.q2, nets.cfg.twin_critics, feat_q, act);
            aloss[j].resize(B);
            for (size_t i = 0; i < B; ++i)
                aloss[j][i] = sac ? loss.alpha * logps[i] - qa[static_cast<long long>(i)]
                                  : -qa[static_cast<long long>(i)];
        }
    }

    double acc_std_loss = 0.0, acc_std_y = 0.0, acc_std_actor = 0.0;
    bool explicit_mode = loss.critic_mode == CriticMode::explicit_sg ||
                         loss.critic_mode == CriticMode::explicit_y;
    std::vector<double> col(S);
    for (size_t i = 0; i < B; ++i) {
        if (degenerate) break;
        for (size_t j = 0; j < S; ++j) col[j] = y_tab[j][i];
        acc_std_y += weighted_std(col, weights);
        for (size_t j = 0; j < S; ++j) col[j] = aloss[j][i];
        acc_std_actor += weighted_std(col, weights);

        // spread of the per-transition empirical critic-loss estimator under
        // the configured (M, K) transformation draws
        if (!explicit_mode && loss.M == 1 && loss.K == 1) {
            double m1 = 0.0, m2 = 0.0;
            for (size_t j = 0; j < S; ++j)
                for (size_t k = 0; k < S; ++k) {
                    double d = q_min[j][i] - y_tab[k][i];
                    double l = d * d;
                    double w = weights[j] * weights[k];
                    m1 += w * l;
                    m2 += w * l * l;
                }
            acc_std_loss += std::sqrt(std::max(0.0, m2 - m1 * m1));
        } else {
            double fixed_target = 0.0;
            if (explicit_mode) {
                size_t id_idx = 0;
                for (size_t j = 0; j < S; ++j)
                    if (is_identity(spec, psi[j])) id_idx = j;
                fixed_target = loss.critic_mode == CriticMode::explicit_y ? y_tab[id_idx][i]
                                                                          : q_min[id_idx][i];
            }
            double m = 0.0, m2 = 0.0;
            for (int r = 0; r < resamples; ++r) {
                double l = 0.0;
                if (explicit_mode) {
                    double reg = 0.0;
                    for (int mm = 0; mm < loss.M; ++mm) {
                        double d = q_min[static_cast<size_t>(draw_index(weights, rng))][i] - fixed_target;
                        reg += d * d;
                    }
                    l = loss.alpha_q * reg / loss.M;
                } else {
                    double ybar = 0.0;
                    for (int k = 0; k < loss.K; ++k)
                        ybar += y_tab[static_cast<size_t>(draw_index(weights, rng))][i];
                    ybar /= loss.K;
                    for (int mm = 0; mm < loss.M; ++mm) {
                        double d = q_min[static_cast<size_t>(draw_index(weights, rng))][i] - ybar;
                        l += d * d;
                    }
                    l /= loss.M;
                }
                m += l;
                m2 += l * l;
            }
            m /= resamples;
            m2 /= resamples;
            acc_std_loss += std::sqrt(std::max(0.0, m2 - m * m));
        }
    }

    // two fresh views per item: policy gap and encoder-feature similarity
    std::vector<FrameStack> views1, views2;
    views1.reserve(B);
    views2.reserve(B);
    for (size_t i = 0; i < B; ++i) {
        views1.push_back(apply_transform(spec, psi[static_cast<size_t>(draw_index(weights, rng))],
                                         batch[i]->s));
        views2.push_back(apply_transform(spec, psi[static_cast<size_t>(draw_index(weights, rng))],
                                         batch[i]->s));
    }
    Tensor af1 = encode_batch(nets.actor_encoder(), views1);
    Tensor af2 = encode_batch(nets.actor_encoder(), views2);
    Tensor m1t, ls1, m2t, ls2;
    actor_batch(nets.actor, af1, &m1t, &ls1);
    actor_batch(nets.actor, af2, &m2t, &ls2);
    Tensor cf1 = nets.cfg.shared_encoder ? af1 : encode_batch(nets.enc, views1);
    Tensor cf2 = nets.cfg.shared_encoder ? af2 : encode_batch(nets.enc, views2);
    double acc_kl = 0.0, acc_cos_a = 0.0, acc_cos_c = 0.0;
    int fd = cf1.dim(1);
    for (size_t i = 0; i < B; ++i) {
        if (sac) {
            PolicyDistribution d1, d2;
            d1.mean.assign(&m1t.v[i * static_cast<size_t>(adim)], &m1t.v[(i + 1) * static_cast<size_t>(adim)]);
            d1.log_std.assign(&ls1.v[i * static_cast<size_t>(adim)], &ls1.v[(i + 1) * static_cast<size_t>(adim)]);
            d2.mean.assign(&m2t.v[i * static_cast<size_t>(adim)], &m2t.v[(i + 1) * static_cast<size_t>(adim)]);
            d2.log_std.assign(&ls2.v[i * static_cast<size_t>(adim)], &ls2.v[(i + 1) * static_cast<size_t>(adim)]);
            acc_kl += kl_diag_gaussian(d1, d2);
        } else {
            double mse = 0.0;
            for (int d = 0; d < adim; ++d) {
                double gap = std::tanh(m1t[static_cast<long long>(i) * adim + d]) -
                             std::tanh(m2t[static_cast<long long>(i) * adim + d]);
                mse += gap * gap;
            }
            acc_kl += mse;
        }
        std::vector<double> a1(&af1.v[i * static_cast<size_t>(fd)], &af1.v[(i + 1) * static_cast<size_t>(fd)]);
        std::vector<double> a2(&af2.v[i * static_cast<size_t>(fd)], &af2.v[(i + 1) * static_cast<size_t>(fd)]);
        acc_cos_a += cosine(a1, a2);
        std::vector<double> c1(&cf1.v[i * static_cast<size_t>(fd)], &cf1.v[(i + 1) * static_cast<size_t>(fd)]);
        std::vector<double> c2(&cf2.v[i * static_cast<size_t>(fd)], &cf2.v[(i + 1) * static_cast<size_t>(fd)]);
        acc_cos_c += cosine(c1, c2);
    }

    double nb = static_cast<double>(B);
    rec.std_critic_loss = acc_std_loss / nb;
    rec.std_target_q = acc_std_y / nb;
    rec.std_actor_loss = acc_std_actor / nb;
    rec.kl_aug = acc_kl / nb;
    rec.cos_sim_actor = acc_cos_a / nb;
    rec.cos_sim_critic = acc_cos_c / nb;
    return rec;
}

double complexity_score(const Encoder& enc, const ParamDistribution& dist,
                        const std::vector<FrameStack>& probes, RandomStream& rng) {
    if (probes.empty()) throw std::invalid_argument("complexity_score: needs probe states");
    double acc = 0.0;
    for (const FrameStack& s : probes) {
        TransformParam p1 = sample_param(dist, rng);
        TransformParam p2 = sample_param(dist, rng);
        std::vector<double> f1 = encode(enc, apply_transform(dist.spec, p1, s));
        std::vector<double> f2 = encode(enc, apply_transform(dist.spec, p2, s));
        double dot = 0.0, n1 = 0.0, n2 = 0.0;
        for (size_t i = 0; i < f1.size(); ++i) {
            dot += f1[i] * f2[i];
            n1 += f1[i] * f1[i];
            n2 += f2[i] * f2[i];
        }
        double denom = std::sqrt(n1) * std::sqrt(n2);
        acc += denom > 0.0 ? dot / denom : 1.0;
    }
    return acc / static_cast<double>(probes.size());
}

bool classify_complex(double score, double shift_baseline) { return score < shift_baseline - 0.05; }

int schedule_updates(int updates_per_step, bool complex_in_targets) {
    return complex_in_targets ? std::max(updates_per_step, 4) : updates_per_step;
}

namespace {

struct Evaluator {
    int episodes;
    // returns (mean agent return, mean greedy-lattice-policy return)
    std::pair<double, double> run(Nets& nets, double gamma, RandomStream& eval_rng) const {
        double total = 0.0, oracle_total = 0.0;
        for (int e = 0; e < episodes; ++e) {
            SpriteReacherEnv env;
            FrameStack obs = env.reset(eval_rng);
            OracleQ oracle(env.goal()[0], env.goal()[1], gamma);
            oracle_total += oracle.rollout_return(env.agent()[0], env.agent()[1], false);
            double ep = 0.0;
            while (!env.done()) {
                PolicyDistribution pd = policy_distribution(nets, obs);
                std::vector<double> a(pd.mean.size());
                for (size_t i = 0; i < a.size(); ++i) a[i] = std::tanh(pd.mean[i]);
                StepResult sr = env.step(a);
                ep += sr.reward;
                obs = sr.obs;
            }
            total += ep;
        }
        return {total / episodes, oracle_total / episodes};
    }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string timestamp_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
    return buf;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    TrainResult result;
    result.effective_updates_per_step = cfg.updates_per_step;

    namespace fs = std::filesystem;
    std::string manifest_path;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        result.run_dir = out_dir;
        std::string snapshot = cfg.config_snapshot;
        write_file(out_dir + "/config.txt", snapshot);
        manifest_path = out_dir + "/manifest.txt";
        std::string manifest;
        manifest += "seed: " + std::to_string(cfg.seed) + "\n";
        manifest += "build: " + build_id() + "\n";
        manifest += "started: " + timestamp_now() + "\n";
        manifest += "config_snapshot: config.txt\n";
        manifest += "outputs: metrics.csv checkpoint_probe.ckpt checkpoint_final.ckpt\n";
        write_file(manifest_path, manifest);
    }

    RandomStream init_rng(cfg.seed, "init");
    RandomStream env_rng(cfg.seed, "env");
    RandomStream policy_rng(cfg.seed, "policy");
    RandomStream buffer_rng(cfg.seed, "buffer");
    RandomStream aug_rng(cfg.seed, "augmentation");
    RandomStream stats_rng(cfg.seed, "stats");
    RandomStream eval_rng(cfg.seed, "eval");

    NetConfig net_cfg = cfg.net;
    net_cfg.frames = SpriteReacherEnv::kFrames;
    net_cfg.height = SpriteReacherEnv::kSize;
    net_cfg.width = SpriteReacherEnv::kSize;
    net_cfg.action_dim = 2;
    net_cfg.deterministic_actor = cfg.loss.base_algo == BaseAlgo::ddpg;
    Nets nets = Nets::make(net_cfg, init_rng);
    TargetNets targets = TargetNets::make_from(nets);
    Adam critic_opt(cfg.lr), actor_opt(cfg.lr), alpha_opt(cfg.alpha_lr);
    LossConfig loss = cfg.loss;
    double log_alpha = std::log(std::max(loss.alpha, 1e-8));
    Tensor log_alpha_t = Tensor::scalar(log_alpha);
    ParamRefs alpha_ref{{"log_alpha", &log_alpha_t}};

    ReplayBuffer buffer(static_cast<size_t>(cfg.buffer_capacity));
    SpriteReacherEnv env;
    FrameStack obs = env.reset(env_rng);

    Evaluator evaluator{cfg.eval_episodes};
    std::ofstream metrics;
    if (!out_dir.empty()) {
        metrics.open(out_dir + "/metrics.csv", std::ios::binary);
        metrics << metrics_csv_header();
    }

    double loss_acc = 0.0, aloss_acc = 0.0;
    long long loss_n = 0, aloss_n = 0;
    StatsRecord latest_stats;
    int updates_per_step = cfg.updates_per_step;
    long long probe_step = static_cast<long long>(cfg.probe_fraction * cfg.total_steps);

    for (long long t = 0; t < cfg.total_steps; ++t) {
        std::vector<double> action(2, 0.0);
        if (t < cfg.seed_steps) {
            action[0] = policy_rng.uniform(-1.0, 1.0);
            action[1] = policy_rng.uniform(-1.0, 1.0);
        } else {
            PolicyDistribution pd = policy_distribution(nets, obs);
            if (cfg.loss.base_algo == BaseAlgo::sac) {
                SampledAction sa = sample_action(pd, policy_rng);
                action = sa.action;
            } else {
                for (size_t i = 0; i < action.size(); ++i) {
                    double a = std::tanh(pd.mean[i]) + cfg.expl_noise * policy_rng.normal();
                    action[i] = std::min(1.0, std::max(-1.0, a));
                }
            }
        }
        Transition tr;
        tr.s = obs;
        tr.a = action;
        StepResult sr = env.step(action);
        tr.r = sr.reward;
        tr.s2 = sr.obs;
        // the reacher only ends by time limit, which the pixels cannot see;
        // store those transitions as non-terminal so values stay stationary
        tr.done = false;
        buffer.push(tr);
        obs = sr.done ? env.reset(env_rng) : sr.obs;

        if (t >= cfg.seed_steps) {
            for (int u = 0; u < updates_per_step; ++u) {
                Batch batch = buffer.sample(cfg.batch, buffer_rng);
                CriticDraws draws = draw_critic(loss, cfg.batch, 2, aug_rng);
                LossResult res = critic_loss(loss, nets, targets, batch, draws);
                critic_opt.step(nets.critic_params(), res.grads);
                loss_acc += res.value;
                ++loss_n;
            }
            if (t % cfg.actor_update_every == 0) {
                Batch batch = buffer.sample(cfg.batch, buffer_rng);
                ActorDraws adraws = draw_actor(loss, cfg.batch, 2, aug_rng);
                LossResult ares = actor_loss(loss, nets, batch, adraws);
                actor_opt.step(nets.actor_params(), ares.grads);
                aloss_acc += ares.value;
                ++aloss_n;
                if (cfg.alpha_autotune && cfg.loss.base_algo == BaseAlgo::sac) {
                    double mean_log_pi = ares.terms.count("mean_log_pi") ? ares.terms.at("mean_log_pi") : 0.0;
                    double target_entropy = -2.0;
                    std::map<std::string, Tensor> agrad;
                    // d/d log_alpha of -exp(log_alpha) * (log_pi + target_H)
                    agrad["log_alpha"] =
                        Tensor::scalar(-std::exp(log_alpha_t[0]) * (mean_log_pi + target_entropy));
                    alpha_opt.step(alpha_ref, agrad);
                    loss.alpha = std::exp(log_alpha_t[0]);
                }
            }
            if (t % cfg.target_update_every == 0) ema_update(targets, nets, cfg.tau);
        }

        // update-count probe at the configured fraction of the budget
        if (cfg.auto_update_schedule && t == std::max(probe_step, cfg.seed_steps) &&
            buffer.size() > 0) {
            std::vector<FrameStack> probes;
            RandomStream prng = stats_rng.fork("probe");
            Batch pb = buffer.sample(32, prng);
            probes.reserve(pb.size());
            for (const Transition* p : pb) probes.push_back(p->s);
            TransformSpec shift = TransformSpec::shift_spec(4);
            ParamDistribution shift_dist = ParamDistribution::uniform_finite(shift);
            result.probe_shift_score = complexity_score(nets.enc, shift_dist, probes, prng);
            result.probe_score = complexity_score(nets.enc, loss.target_dist, probes, prng);
            result.classified_complex = classify_complex(result.probe_score, result.probe_shift_score);
            result.probed = true;
            updates_per_step = schedule_updates(cfg.updates_per_step, result.classified_complex);
            result.effective_updates_per_step = updates_per_step;
            if (!out_dir.empty()) save_checkpoint(out_dir + "/checkpoint_probe.ckpt", nets.params());
        }

        if ((t + 1) % cfg.stats_interval == 0 && buffer.size() > 0 && t >= cfg.seed_steps) {
            Batch batch = buffer.sample(cfg.stats_batch, stats_rng);
            latest_stats = record_stats(loss, nets, targets, batch, stats_rng, cfg.stats_psi_samples);
            latest_stats.step = t + 1;
        }

        if ((t + 1) % cfg.eval_interval == 0) {
            auto [ret, oracle_ret] = evaluator.run(nets, loss.gamma, eval_rng);
            MetricsRow row;
            row.step = t + 1;
            row.eval_return = ret;
            row.oracle_return = oracle_ret;
            row.critic_loss = loss_n ? loss_acc / loss_n : 0.0;
            row.actor_loss = aloss_n ? aloss_acc / aloss_n : 0.0;
            row.stats = latest_stats;
            result.rows.push_back(row);
            loss_acc = aloss_acc = 0.0;
            loss_n = aloss_n = 0;
            if (metrics.is_open()) metrics << metrics_csv_row(row) << std::flush;
        }
    }

    for (const MetricsRow& r : result.rows) {
        result.best_eval = std::max(result.best_eval, r.eval_return);
        result.mean_oracle_return += r.oracle_return;
    }
    if (!result.rows.empty()) {
        result.final_eval = result.rows.back().eval_return;
        result.mean_oracle_return /= static_cast<double>(result.rows.size());
    }

    if (!out_dir.empty()) {
        save_checkpoint(out_dir + "/checkpoint_final.ckpt", nets.params());
        if (!result.probed) save_checkpoint(out_dir + "/checkpoint_probe.ckpt", nets.params());
        std::ifstream in(manifest_path);
        std::string manifest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        manifest += "finished: " + timestamp_now() + "\n";
        write_file(manifest_path, manifest);
    }
    return result;
}

}  // namespace augrl
