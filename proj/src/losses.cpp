#include "augrl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace augrl {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;
}

std::string to_string(BaseAlgo a) { return a == BaseAlgo::sac ? "sac" : "ddpg"; }

std::string to_string(CriticMode m) {
    switch (m) {
        case CriticMode::implicit: return "implicit";
        case CriticMode::explicit_sg: return "explicit_sg";
        case CriticMode::explicit_y: return "explicit_y";
        case CriticMode::svea_asym: return "svea_asym";
        case CriticMode::generic: return "generic";
    }
    return "?";
}

std::string to_string(ActorMode m) {
    switch (m) {
        case ActorMode::implicit: return "implicit";
        case ActorMode::explicit_kl: return "explicit_kl";
        case ActorMode::kl_aug_target: return "kl_aug_target";
        case ActorMode::kl_avg_target: return "kl_avg_target";
        case ActorMode::generic: return "generic";
    }
    return "?";
}

BaseAlgo base_algo_from_string(const std::string& s) {
    if (s == "sac") return BaseAlgo::sac;
    if (s == "ddpg") return BaseAlgo::ddpg;
    throw std::invalid_argument("unknown base_algo: " + s);
}

CriticMode critic_mode_from_string(const std::string& s) {
    if (s == "implicit" || s == "drq" || s == "rad") return CriticMode::implicit;
    if (s == "explicit_sg") return CriticMode::explicit_sg;
    if (s == "explicit_y") return CriticMode::explicit_y;
    if (s == "svea_asym" || s == "svea") return CriticMode::svea_asym;
    if (s == "generic") return CriticMode::generic;
    throw std::invalid_argument("unknown critic_mode: " + s);
}

ActorMode actor_mode_from_string(const std::string& s) {
    if (s == "implicit" || s == "drq" || s == "rad") return ActorMode::implicit;
    if (s == "explicit_kl") return ActorMode::explicit_kl;
    if (s == "kl_aug_target") return ActorMode::kl_aug_target;
    if (s == "kl_avg_target") return ActorMode::kl_avg_target;
    if (s == "generic") return ActorMode::generic;
    throw std::invalid_argument("unknown actor_mode: " + s);
}

void LossConfig::validate() const {
    if (M < 1 || K < 1 || J < 1 || eta_draws < 1)
        throw std::invalid_argument("loss config: sample counts must be >= 1");
    if (alpha < 0 || alpha_q < 0 || alpha_pi < 0 || alpha_tp < 0)
        throw std::invalid_argument("loss config: coefficients must be >= 0");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("loss config: gamma must lie in (0, 1)");
    if (channels.empty()) throw std::invalid_argument("loss config: needs at least one transform channel");
    if (critic_mode == CriticMode::svea_asym && channels.size() < 2)
        throw std::invalid_argument("loss config: svea_asym needs a simple and a complex channel");
    if (critic_mode == CriticMode::generic && alpha_tp > 0 &&
        tangent_axis_count(tangent_dist.spec) == 0)
        throw std::invalid_argument("loss config: tangent penalty needs a shift or blur family");
}

LossConfig LossConfig::defaults() {
    LossConfig cfg;
    TransformSpec shift = TransformSpec::shift_spec(4);
    ParamDistribution d = ParamDistribution::uniform_finite(shift);
    cfg.channels.push_back({shift, d, 1.0});
    cfg.target_dist = d;
    cfg.tangent_dist = d;
    return cfg;
}

CriticDraws draw_critic(const LossConfig& cfg, int batch, int adim, RandomStream& rng) {
    CriticDraws d;
    d.nu.resize(cfg.channels.size());
    for (size_t c = 0; c < cfg.channels.size(); ++c)
        d.nu[c] = sample_params(cfg.channels[c].dist, batch * cfg.M, rng);
    d.mu = sample_params(cfg.target_dist, batch * cfg.K, rng);
    d.target_noise.resize(static_cast<size_t>(batch) * cfg.K);
    for (auto& row : d.target_noise) {
        row.resize(static_cast<size_t>(adim));
        for (double& x : row) x = rng.normal();
    }
    if (cfg.critic_mode == CriticMode::generic && cfg.alpha_tp > 0)
        d.tangent = sample_params(cfg.tangent_dist, batch * cfg.tangent_draws, rng);
    return d;
}

ActorDraws draw_actor(const LossConfig& cfg, int batch, int adim, RandomStream& rng) {
    ActorDraws d;
    d.mu = sample_params(cfg.target_dist, batch * cfg.J, rng);
    d.eta = sample_params(cfg.target_dist, batch * cfg.eta_draws, rng);
    d.action_noise.resize(static_cast<size_t>(batch) * cfg.J);
    for (auto& row : d.action_noise) {
        row.resize(static_cast<size_t>(adim));
        for (double& x : row) x = rng.normal();
    }
    d.base_noise.resize(static_cast<size_t>(batch));
    for (auto& row : d.base_noise) {
        row.resize(static_cast<size_t>(adim));
        for (double& x : row) x = rng.normal();
    }
    return d;
}

namespace {

// frozen batched evaluations (scratch tape, values only)

Tensor enc_values(const Encoder& e, const std::vector<FrameStack>& xs) { return encode_batch(e, xs); }

void actor_values(const ActorNet& a, const Tensor& feat, Tensor* mean, Tensor* log_std) {
    actor_batch(a, feat, mean, log_std);
}

Tensor critic_min_values(const CriticHead& q1, const CriticHead& q2, bool twin, const Tensor& feat,
                         const Tensor& act) {
    return critic_min_batch(q1, q2, twin, feat, act);
}

std::vector<FrameStack> transform_each(const TransformSpec& spec,
                                       const std::vector<TransformParam>& params,
                                       const Batch& batch, bool next_state, int per_item) {
    std::vector<FrameStack> out;
    out.reserve(params.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const FrameStack& base = next_state ? batch[i]->s2 : batch[i]->s;
        for (int j = 0; j < per_item; ++j)
            out.push_back(apply_transform(spec, params[i * static_cast<size_t>(per_item) + j], base));
    }
    return out;
}

Tensor stacks_tensor(const std::vector<FrameStack>& xs) {
    std::vector<const FrameStack*> ptrs;
    ptrs.reserve(xs.size());
    for (const FrameStack& x : xs) ptrs.push_back(&x);
    return frames_to_tensor(ptrs);
}

Tensor actions_tensor(const Batch& batch, int per_item) {
    int adim = static_cast<int>(batch.front()->a.size());
    Tensor t({static_cast<int>(batch.size()) * per_item, adim});
    long long r = 0;
    for (const Transition* tr : batch)
        for (int j = 0; j < per_item; ++j) {
            for (int k = 0; k < adim; ++k) t[r * adim + k] = tr->a[static_cast<size_t>(k)];
            ++r;
        }
    return t;
}

Tensor repeat_scalar_rows(const std::vector<double>& rows, int per_item) {
    Tensor t({static_cast<int>(rows.size()) * per_item, 1});
    long long r = 0;
    for (double v : rows)
        for (int j = 0; j < per_item; ++j) t[r++] = v;
    return t;
}

// shared core of the per-k target values
std::vector<double> target_w_values(const Transition& tr, const TargetNets& targets,
                                    const Nets& nets, const LossConfig& cfg,
                                    const std::vector<TransformParam>& mu_params,
                                    const std::vector<std::vector<double>>& noise) {
    const TransformSpec& spec = cfg.target_dist.spec;
    std::vector<FrameStack> aug;
    aug.reserve(mu_params.size());
    for (const TransformParam& p : mu_params) aug.push_back(apply_transform(spec, p, tr.s2));
    Tensor tfeat = enc_values(targets.enc, aug);
    int K = static_cast<int>(mu_params.size());
    int adim = static_cast<int>(tr.a.size());
    Tensor act({K, adim});
    std::vector<double> logps(static_cast<size_t>(K), 0.0);
    if (cfg.base_algo == BaseAlgo::sac) {
        Tensor ofeat = enc_values(nets.actor_encoder(), aug);
        Tensor mean, log_std;
        actor_values(nets.actor, ofeat, &mean, &log_std);
        for (int k = 0; k < K; ++k) {
            double lp = 0.0;
            for (int j = 0; j < adim; ++j) {
                double ls = log_std[static_cast<size_t>(k) * adim + j];
                double xi = noise.at(static_cast<size_t>(k))[static_cast<size_t>(j)];
                double u = mean[static_cast<size_t>(k) * adim + j] + std::exp(ls) * xi;
                act[static_cast<size_t>(k) * adim + j] = std::tanh(u);
                lp += -0.5 * xi * xi - ls - kHalfLog2Pi - log_one_minus_tanh_sq(u);
            }
            logps[static_cast<size_t>(k)] = lp;
        }
    } else {
        if (!targets.actor) throw std::logic_error("target_y: deterministic variant needs a target actor");
        Tensor mean;
        actor_values(*targets.actor, tfeat, &mean, nullptr);
        for (long long i = 0; i < act.size(); ++i) act[i] = std::tanh(mean[i]);
    }
    Tensor qmin = critic_min_values(targets.q1, targets.q2, nets.cfg.twin_critics, tfeat, act);
    std::vector<double> w(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        w[static_cast<size_t>(k)] = qmin[k];
        if (cfg.base_algo == BaseAlgo::sac) w[static_cast<size_t>(k)] -= cfg.alpha * logps[static_cast<size_t>(k)];
    }
    return w;
}

// all-items target computation; row arithmetic matches target_y exactly
std::vector<double> batched_targets(const LossConfig& cfg, const TargetNets& targets, Nets& nets,
                                    const Batch& batch, const std::vector<TransformParam>& mu,
                                    const std::vector<std::vector<double>>& noise, int K) {
    const TransformSpec& spec = cfg.target_dist.spec;
    size_t B = batch.size();
    std::vector<FrameStack> aug;
    aug.reserve(B * static_cast<size_t>(K));
    for (size_t i = 0; i < B; ++i)
        for (int k = 0; k < K; ++k)
            aug.push_back(apply_transform(spec, mu[i * static_cast<size_t>(K) + k], batch[i]->s2));
    Tensor tfeat = enc_values(targets.enc, aug);
    int adim = static_cast<int>(batch.front()->a.size());
    long long rows = static_cast<long long>(B) * K;
    Tensor act({static_cast<int>(rows), adim});
    std::vector<double> logps(static_cast<size_t>(rows), 0.0);
    if (cfg.base_algo == BaseAlgo::sac) {
        Tensor ofeat = enc_values(nets.actor_encoder(), aug);
        Tensor mean, log_std;
        actor_values(nets.actor, ofeat, &mean, &log_std);
        for (long long r = 0; r < rows; ++r) {
            double lp = 0.0;
            for (int j = 0; j < adim; ++j) {
                double ls = log_std[r * adim + j];
                double xi = noise[static_cast<size_t>(r)][static_cast<size_t>(j)];
                double u = mean[r * adim + j] + std::exp(ls) * xi;
                act[r * adim + j] = std::tanh(u);
                lp += -0.5 * xi * xi - ls - kHalfLog2Pi - log_one_minus_tanh_sq(u);
            }
            logps[static_cast<size_t>(r)] = lp;
        }
    } else {
        if (!targets.actor) throw std::logic_error("target_y: deterministic variant needs a target actor");
        Tensor mean;
        actor_values(*targets.actor, tfeat, &mean, nullptr);
        for (long long i = 0; i < act.size(); ++i) act[i] = std::tanh(mean[i]);
    }
    Tensor qmin = critic_min_values(targets.q1, targets.q2, nets.cfg.twin_critics, tfeat, act);
    std::vector<double> y(B);
    for (size_t i = 0; i < B; ++i) {
        if (batch[i]->done) {
            y[i] = batch[i]->r;
            continue;
        }
        double acc = 0.0;
        for (int k = 0; k < K; ++k) {
            long long r = static_cast<long long>(i) * K + k;
            double w = qmin[r];
            if (cfg.base_algo == BaseAlgo::sac) w -= cfg.alpha * logps[static_cast<size_t>(r)];
            acc += w;
        }
        y[i] = batch[i]->r + cfg.gamma * (acc / static_cast<double>(K));
    }
    return y;
}

}  // namespace

std::vector<double> target_y_per_draw(const Transition& tr, const TargetNets& targets,
                                      const Nets& nets, const LossConfig& cfg,
                                      const std::vector<TransformParam>& mu_params,
                                      const std::vector<std::vector<double>>& noise) {
    if (mu_params.empty()) throw std::invalid_argument("target_y: needs at least one draw");
    if (tr.done) return std::vector<double>(mu_params.size(), tr.r);
    std::vector<double> w = target_w_values(tr, targets, nets, cfg, mu_params, noise);
    for (double& v : w) v = tr.r + cfg.gamma * v;
    return w;
}

double target_y(const Transition& tr, const TargetNets& targets, const Nets& nets,
                const LossConfig& cfg, const std::vector<TransformParam>& mu_params,
                const std::vector<std::vector<double>>& noise) {
    if (mu_params.empty()) throw std::invalid_argument("target_y: needs at least one draw");
    if (tr.done) return tr.r;
    std::vector<double> w = target_w_values(tr, targets, nets, cfg, mu_params, noise);
    double acc = 0.0;
    for (double v : w) acc += v;
    return tr.r + cfg.gamma * (acc / static_cast<double>(w.size()));
}

namespace {

struct CriticCtx {
    Tape tape;
    Lift L;
    const LossConfig& cfg;
    Nets& nets;
    const Batch& batch;
    CriticCtx(const LossConfig& c, Nets& n, const Batch& b) : L(tape, true), cfg(c), nets(n), batch(b) {}

    // sum over heads of the mean over rows of (Q(states) - target)^2
    Var mse_against(const std::vector<FrameStack>& states, const Tensor& target_rows,
                    int per_item, Var* split_head_targets = nullptr) {
        Var x = tape.constant(stacks_tensor(states));
        EncoderTrace enc = encoder_forward(tape, nets.enc, L, x);
        Var fa = tape.concat_cols(enc.feat, tape.constant(actions_tensor(batch, per_item)));
        Var q1 = critic_forward(tape, nets.q1, L, fa).q;
        Var tgt = split_head_targets ? split_head_targets[0] : tape.constant(target_rows);
        Var loss = tape.mean_all(tape.square(tape.sub(q1, tgt)));
        if (nets.cfg.twin_critics) {
            Var q2 = critic_forward(tape, nets.q2, L, fa).q;
            Var tgt2 = split_head_targets ? split_head_targets[1] : tape.constant(target_rows);
            loss = tape.add(loss, tape.mean_all(tape.square(tape.sub(q2, tgt2))));
        }
        return loss;
    }

    // per-head Q values on raw states, plus the sum-of-heads mse against a target
    struct RawEval {
        Var q1, q2;
        Var loss;
    };
    RawEval raw_mse(const Tensor& target_rows) {
        std::vector<FrameStack> raw;
        raw.reserve(batch.size());
        for (const Transition* tr : batch) raw.push_back(tr->s);
        Var x = tape.constant(stacks_tensor(raw));
        EncoderTrace enc = encoder_forward(tape, nets.enc, L, x);
        Var fa = tape.concat_cols(enc.feat, tape.constant(actions_tensor(batch, 1)));
        RawEval ev;
        ev.q1 = critic_forward(tape, nets.q1, L, fa).q;
        Var tgt = tape.constant(target_rows);
        ev.loss = tape.mean_all(tape.square(tape.sub(ev.q1, tgt)));
        if (nets.cfg.twin_critics) {
            ev.q2 = critic_forward(tape, nets.q2, L, fa).q;
            ev.loss = tape.add(ev.loss, tape.mean_all(tape.square(tape.sub(ev.q2, tgt))));
        }
        return ev;
    }

    Var tangent_penalty(const std::vector<TransformParam>& psi, int per_item) {
        const TransformSpec& spec = cfg.tangent_dist.spec;
        int axes = tangent_axis_count(spec);
        std::vector<FrameStack> states;
        std::vector<std::vector<FrameStack>> tangents(static_cast<size_t>(axes));
        states.reserve(psi.size());
        for (size_t i = 0; i < batch.size(); ++i)
            for (int p = 0; p < per_item; ++p) {
                const TransformParam& par = psi[i * static_cast<size_t>(per_item) + p];
                states.push_back(apply_transform(spec, par, batch[i]->s));
                std::vector<TangentAxis> tv = tangent_vectors(spec, par, batch[i]->s);
                for (int ax = 0; ax < axes; ++ax)
                    tangents[static_cast<size_t>(ax)].push_back(std::move(tv[static_cast<size_t>(ax)].vec));
            }
        Var x = tape.constant(stacks_tensor(states));
        EncoderTrace enc = encoder_forward(tape, nets.enc, L, x);
        Tensor act = actions_tensor(batch, per_item);
        Var fa = tape.concat_cols(enc.feat, tape.constant(act));
        CriticTrace t1 = critic_forward(tape, nets.q1, L, fa);
        CriticTrace t2 = nets.cfg.twin_critics ? critic_forward(tape, nets.q2, L, fa) : CriticTrace{};
        // per-row mask selecting the smaller head
        int rows = static_cast<int>(states.size());
        Tensor mask({rows, 1});
        if (nets.cfg.twin_critics) {
            const Tensor& v1 = tape.val(t1.q);
            const Tensor& v2 = tape.val(t2.q);
            for (int r = 0; r < rows; ++r) mask[r] = v1[r] <= v2[r] ? 1.0 : 0.0;
        }
        Var penalty;
        int adim = static_cast<int>(batch.front()->a.size());
        Tensor zero_at({rows, adim});
        for (int ax = 0; ax < axes; ++ax) {
            Var tx = tape.constant(stacks_tensor(tangents[static_cast<size_t>(ax)]));
            Var tfeat = encoder_tangent(tape, nets.enc, L, enc, tx);
            Var tfa = tape.concat_cols(tfeat, tape.constant(zero_at));
            Var tq = critic_tangent(tape, nets.q1, L, t1, tfa);
            if (nets.cfg.twin_critics) {
                Var tq2 = critic_tangent(tape, nets.q2, L, t2, tfa);
                Var m = tape.constant(mask);
                Var minv = tape.constant(Tensor::full({rows, 1}, 1.0));
                tq = tape.add(tape.mul(m, tq), tape.mul(tape.sub(minv, m), tq2));
            }
            Var sq = tape.square(tq);
            penalty = penalty.valid() ? tape.add(penalty, sq) : sq;
        }
        return tape.mean_all(penalty);
    }
};

std::map<std::string, Tensor> collect_grads(Tape& tape, Lift& L, const ParamRefs& refs) {
    std::map<std::string, Tensor> out;
    for (const ParamRef& r : refs) out.emplace(r.name, L.grad_of(*r.t));
    return out;
}

}  // namespace

CriticSg critic_sg(const LossConfig& cfg, Nets& nets, const TargetNets& targets,
                   const Batch& batch, const CriticDraws& draws) {
    size_t B = batch.size();
    bool averaged_target =
        cfg.critic_mode == CriticMode::implicit || cfg.critic_mode == CriticMode::svea_asym ||
        cfg.critic_mode == CriticMode::generic;
    CriticSg sg;
    if (averaged_target) {
        sg.ybar = batched_targets(cfg, targets, nets, batch, draws.mu, draws.target_noise, cfg.K);
    } else {  // raw s', single sample per item
        std::vector<TransformParam> mu(B, identity_param(cfg.target_dist.spec));
        std::vector<std::vector<double>> noise(B);
        for (size_t i = 0; i < B; ++i) noise[i] = draws.target_noise[i * static_cast<size_t>(cfg.K)];
        sg.ybar = batched_targets(cfg, targets, nets, batch, mu, noise, 1);
    }
    if (cfg.critic_mode == CriticMode::explicit_sg) {
        std::vector<FrameStack> raw;
        raw.reserve(B);
        for (const Transition* tr : batch) raw.push_back(tr->s);
        Tensor feat = enc_values(nets.enc, raw);
        Tensor act = actions_tensor(batch, 1);
        Tape t;
        Lift L(t, false);
        Var fa = t.concat_cols(t.constant(feat), t.constant(act));
        sg.q1_base = t.val(critic_forward(t, nets.q1, L, fa).q).v;
        if (nets.cfg.twin_critics) sg.q2_base = t.val(critic_forward(t, nets.q2, L, fa).q).v;
    }
    return sg;
}

LossResult critic_loss(const LossConfig& cfg, Nets& nets, const TargetNets& targets,
                       const Batch& batch, const CriticDraws& draws, const CriticSg* sg_in) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("critic_loss: empty batch");
    size_t B = batch.size();
    if (draws.nu.size() != cfg.channels.size())
        throw std::invalid_argument("critic_loss: channel/draw count mismatch");
    for (const auto& ch : draws.nu)
        if (ch.size() != B * static_cast<size_t>(cfg.M))
            throw std::invalid_argument("critic_loss: nu draw count mismatch");
    if (draws.mu.size() != B * static_cast<size_t>(cfg.K))
        throw std::invalid_argument("critic_loss: mu draw count mismatch");

    CriticSg sg_local;
    if (!sg_in) {
        sg_local = critic_sg(cfg, nets, targets, batch, draws);
        sg_in = &sg_local;
    }
    const std::vector<double>& ybar = sg_in->ybar;
    if (ybar.size() != B) throw std::invalid_argument("critic_loss: sg target count mismatch");

    CriticCtx ctx(cfg, nets, batch);
    Var total;
    std::map<std::string, double> terms;

    auto aug_states = [&](size_t channel) {
        return transform_each(cfg.channels[channel].spec, draws.nu[channel], batch, false, cfg.M);
    };

    switch (cfg.critic_mode) {
        case CriticMode::implicit: {
            total = ctx.mse_against(aug_states(0), repeat_scalar_rows(ybar, cfg.M), cfg.M);
            terms["critic_mse"] = ctx.tape.val(total).item();
            break;
        }
        case CriticMode::explicit_sg: {
            CriticCtx::RawEval base = ctx.raw_mse(repeat_scalar_rows(ybar, 1));
            Var sg_targets[2] = {
                ctx.tape.constant(repeat_scalar_rows(sg_in->q1_base, cfg.M)),
                nets.cfg.twin_critics
                    ? ctx.tape.constant(repeat_scalar_rows(sg_in->q2_base, cfg.M))
                    : Var{}};
            Var reg = ctx.mse_against(aug_states(0), Tensor{}, cfg.M, sg_targets);
            terms["critic_base"] = ctx.tape.val(base.loss).item();
            terms["critic_reg"] = ctx.tape.val(reg).item();
            total = ctx.tape.add(base.loss, ctx.tape.scale(reg, cfg.alpha_q));
            break;
        }
        case CriticMode::explicit_y: {
            CriticCtx::RawEval base = ctx.raw_mse(repeat_scalar_rows(ybar, 1));
            Var reg = ctx.mse_against(aug_states(0), repeat_scalar_rows(ybar, cfg.M), cfg.M);
            terms["critic_base"] = ctx.tape.val(base.loss).item();
            terms["critic_reg"] = ctx.tape.val(reg).item();
            total = ctx.tape.add(base.loss, ctx.tape.scale(reg, cfg.alpha_q));
            break;
        }
        case CriticMode::svea_asym: {
            Var simple = ctx.mse_against(aug_states(0), repeat_scalar_rows(ybar, cfg.M), cfg.M);
            Var complex_ = ctx.mse_against(aug_states(1), repeat_scalar_rows(ybar, cfg.M), cfg.M);
            terms["critic_simple"] = ctx.tape.val(simple).item();
            terms["critic_complex"] = ctx.tape.val(complex_).item();
            total = ctx.tape.add(ctx.tape.scale(simple, cfg.svea_weight_simple),
                                 ctx.tape.scale(complex_, cfg.svea_weight_complex));
            break;
        }
        case CriticMode::generic: {
            for (size_t c = 0; c < cfg.channels.size(); ++c) {
                Var term = ctx.mse_against(aug_states(c), repeat_scalar_rows(ybar, cfg.M), cfg.M);
                terms["critic_mse_" + to_string(cfg.channels[c].spec.kind)] =
                    ctx.tape.val(term).item();
                Var weighted = ctx.tape.scale(term, cfg.channels[c].alpha_i);
                total = total.valid() ? ctx.tape.add(total, weighted) : weighted;
            }
            if (cfg.alpha_tp > 0) {
                if (draws.tangent.size() != B * static_cast<size_t>(cfg.tangent_draws))
                    throw std::invalid_argument("critic_loss: tangent draw count mismatch");
                Var tp = ctx.tangent_penalty(draws.tangent, cfg.tangent_draws);
                terms["tangent_penalty"] = ctx.tape.val(tp).item();
                total = ctx.tape.add(total, ctx.tape.scale(tp, cfg.alpha_tp));
            }
            break;
        }
    }

    ctx.tape.backward(total);
    LossResult res;
    res.value = ctx.tape.val(total).item();
    res.terms = std::move(terms);
    res.grads = collect_grads(ctx.tape, ctx.L, nets.critic_params());
    return res;
}

namespace {

struct PolicyRows {
    Var mean;     // [rows, adim]
    Var log_std;  // invalid for deterministic actors
    Var feat_q;   // critic-encoder features of the same states (frozen)
};

// actor-side forward of a list of states: policy heads through the trainable
// lift, critic-encoder features through the frozen one
PolicyRows policy_rows(Tape& tape, Lift& Ltrain, Lift& Lfrozen, Nets& nets,
                       const std::vector<FrameStack>& states) {
    Var x = tape.constant(stacks_tensor(states));
    PolicyRows out;
    if (nets.cfg.shared_encoder) {
        EncoderTrace enc = encoder_forward(tape, nets.enc, Lfrozen, x);  // grads stop here
        PolicyVars pv = actor_forward(tape, nets.actor, Ltrain, enc.feat);
        out.mean = pv.mean;
        out.log_std = pv.log_std;
        out.feat_q = enc.feat;
    } else {
        EncoderTrace aenc = encoder_forward(tape, nets.actor_encoder_mut(), Ltrain, x);
        PolicyVars pv = actor_forward(tape, nets.actor, Ltrain, aenc.feat);
        out.mean = pv.mean;
        out.log_std = pv.log_std;
        out.feat_q = encoder_forward(tape, nets.enc, Lfrozen, x).feat;
    }
    return out;
}

// detached policy parameters of a list of states
void policy_values(Nets& nets, const std::vector<FrameStack>& states, Tensor* mean,
                   Tensor* log_std) {
    Tensor feat = enc_values(nets.actor_encoder(), states);
    actor_values(nets.actor, feat, mean, log_std);
}

struct SacTerm {
    Var loss;      // mean over rows of alpha*logpi - minQ
    Var log_pi;    // [rows,1]
};

SacTerm sac_actor_term(Tape& tape, Lift& Lfrozen, Nets& nets, const LossConfig& cfg,
                       const PolicyRows& rows, const std::vector<std::vector<double>>& noise) {
    int n = tape.val(rows.mean).dim(0);
    int adim = tape.val(rows.mean).dim(1);
    Tensor xi({n, adim});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < adim; ++j)
            xi[static_cast<size_t>(i) * adim + j] = noise[static_cast<size_t>(i)][static_cast<size_t>(j)];
    Var xiv = tape.constant(xi);
    Var sigma = tape.exp_(rows.log_std);
    Var u = tape.add(rows.mean, tape.mul(sigma, xiv));
    Var a = tape.tanh_(u);
    // log pi = sum_j [-xi^2/2 - log sigma - log sqrt(2 pi)] - sum_j log(1 - tanh(u)^2)
    Var gauss = tape.add_scalar(tape.neg(tape.add(tape.scale(tape.square(xiv), 0.5), rows.log_std)),
                                -kHalfLog2Pi);
    // log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u))
    Var corr = tape.scale(
        tape.add_scalar(tape.neg(tape.add(u, tape.softplus(tape.scale(u, -2.0)))), std::log(2.0)),
        2.0);
    Var log_pi = tape.row_sum(tape.sub(gauss, corr));
    Var fa = tape.concat_cols(rows.feat_q, a);
    Var q1 = critic_forward(tape, nets.q1, Lfrozen, fa).q;
    Var qmin = nets.cfg.twin_critics ? tape.min2(q1, critic_forward(tape, nets.q2, Lfrozen, fa).q) : q1;
    SacTerm t;
    t.log_pi = log_pi;
    t.loss = tape.mean_all(tape.sub(tape.scale(log_pi, cfg.alpha), qmin));
    return t;
}

Var ddpg_actor_term(Tape& tape, Lift& Lfrozen, Nets& nets, const PolicyRows& rows) {
    Var a = tape.tanh_(rows.mean);
    Var fa = tape.concat_cols(rows.feat_q, a);
    Var q1 = critic_forward(tape, nets.q1, Lfrozen, fa).q;
    Var qmin = nets.cfg.twin_critics ? tape.min2(q1, critic_forward(tape, nets.q2, Lfrozen, fa).q) : q1;
    return tape.mean_all(tape.neg(qmin));
}

// mean over rows of KL(N(p_mean, p_std) || N(q_mean, q_std)), p detached
Var kl_rows(Tape& tape, const Tensor& p_mean, const Tensor& p_log_std, Var q_mean, Var q_log_std) {
    Var pm = tape.constant(p_mean);
    Var pls = tape.constant(p_log_std);
    Var var_q = tape.exp_(tape.scale(q_log_std, 2.0));
    Var var_p = tape.exp_(tape.scale(pls, 2.0));
    Var diff2 = tape.square(tape.sub(pm, q_mean));
    Var ratio = tape.div(tape.add(var_p, diff2), tape.scale(var_q, 2.0));
    Var terms = tape.add_scalar(tape.add(tape.sub(q_log_std, pls), ratio), -0.5);
    return tape.mean_all(tape.row_sum(terms));
}

Var mse_rows(Tape& tape, const Tensor& p_actions, Var q_mean) {
    Var a_q = tape.tanh_(q_mean);
    return tape.mean_all(tape.row_sum(tape.square(tape.sub(tape.constant(p_actions), a_q))));
}

}  // namespace

ActorSg actor_sg(const LossConfig& cfg, Nets& nets, const Batch& batch, const ActorDraws& draws) {
    ActorSg sg;
    if (cfg.actor_mode == ActorMode::implicit || cfg.alpha_pi <= 0) return sg;
    size_t B = batch.size();
    const TransformSpec& spec = cfg.target_dist.spec;
    int E = cfg.eta_draws;

    if (cfg.actor_mode == ActorMode::explicit_kl) {
        std::vector<FrameStack> raw_states;
        raw_states.reserve(B);
        for (const Transition* tr : batch) raw_states.push_back(tr->s);
        Tensor p_mean, p_ls;
        policy_values(nets, raw_states, &p_mean, &p_ls);
        int adim = p_mean.dim(1);
        sg.mean = Tensor({static_cast<int>(B) * cfg.J, adim});
        sg.log_std = Tensor({static_cast<int>(B) * cfg.J, adim});
        for (size_t i = 0; i < B; ++i)
            for (int j = 0; j < cfg.J; ++j)
                for (int d = 0; d < adim; ++d) {
                    sg.mean[(static_cast<long long>(i) * cfg.J + j) * adim + d] =
                        p_mean[static_cast<long long>(i) * adim + d];
                    sg.log_std[(static_cast<long long>(i) * cfg.J + j) * adim + d] =
                        p_ls[static_cast<long long>(i) * adim + d];
                }
    } else if (cfg.actor_mode == ActorMode::kl_aug_target || cfg.actor_mode == ActorMode::generic) {
        std::vector<FrameStack> eta_states = transform_each(spec, draws.eta, batch, false, E);
        Tensor e_mean, e_ls;
        policy_values(nets, eta_states, &e_mean, &e_ls);
        int adim = e_mean.dim(1);
        // one row per (i, j, e)
        sg.mean = Tensor({static_cast<int>(B) * cfg.J * E, adim});
        sg.log_std = Tensor({static_cast<int>(B) * cfg.J * E, adim});
        long long r = 0;
        for (size_t i = 0; i < B; ++i)
            for (int j = 0; j < cfg.J; ++j)
                for (int e = 0; e < E; ++e) {
                    for (int d = 0; d < adim; ++d) {
                        sg.mean[r * adim + d] = e_mean[(static_cast<long long>(i) * E + e) * adim + d];
                        sg.log_std[r * adim + d] = e_ls[(static_cast<long long>(i) * E + e) * adim + d];
                    }
                    ++r;
                }
    } else {  // kl_avg_target: averaged Gaussian over the eta draws, per (i, j)
        std::vector<FrameStack> eta_states = transform_each(spec, draws.eta, batch, false, E);
        Tensor e_mean, e_ls;
        policy_values(nets, eta_states, &e_mean, &e_ls);
        int adim = e_mean.dim(1);
        sg.mean = Tensor({static_cast<int>(B) * cfg.J, adim});
        sg.log_std = Tensor({static_cast<int>(B) * cfg.J, adim});
        for (size_t i = 0; i < B; ++i)
            for (int d = 0; d < adim; ++d) {
                double m = 0.0, v = 0.0;
                double w = 1.0 / static_cast<double>(E);
                for (int e = 0; e < E; ++e) {
                    double lam = e_mean[(static_cast<long long>(i) * E + e) * adim + d];
                    double sd = std::exp(e_ls[(static_cast<long long>(i) * E + e) * adim + d]);
                    m += w * lam;
                    v += w * w * sd * sd;
                }
                for (int j = 0; j < cfg.J; ++j) {
                    sg.mean[(static_cast<long long>(i) * cfg.J + j) * adim + d] = m;
                    sg.log_std[(static_cast<long long>(i) * cfg.J + j) * adim + d] = 0.5 * std::log(v);
                }
            }
    }
    sg.present = true;
    return sg;
}

LossResult actor_loss(const LossConfig& cfg, Nets& nets, const Batch& batch,
                      const ActorDraws& draws, const ActorSg* sg_in) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("actor_loss: empty batch");
    size_t B = batch.size();
    if (draws.mu.size() != B * static_cast<size_t>(cfg.J))
        throw std::invalid_argument("actor_loss: mu draw count mismatch");
    bool needs_eta = cfg.actor_mode == ActorMode::kl_aug_target ||
                     cfg.actor_mode == ActorMode::kl_avg_target ||
                     cfg.actor_mode == ActorMode::generic;
    if (needs_eta && draws.eta.size() != B * static_cast<size_t>(cfg.eta_draws))
        throw std::invalid_argument("actor_loss: eta draws missing for a KL mode");

    ActorSg sg_local;
    if (!sg_in) {
        sg_local = actor_sg(cfg, nets, batch, draws);
        sg_in = &sg_local;
    }

    const TransformSpec& spec = cfg.target_dist.spec;
    bool sac = cfg.base_algo == BaseAlgo::sac;

    Tape tape;
    Lift Ltrain(tape, true);
    Lift Lfrozen(tape, false);

    std::vector<FrameStack> mu_states = transform_each(spec, draws.mu, batch, false, cfg.J);
    std::vector<FrameStack> raw_states;
    raw_states.reserve(B);
    for (const Transition* tr : batch) raw_states.push_back(tr->s);

    bool base_on_aug = cfg.actor_mode == ActorMode::implicit || cfg.actor_mode == ActorMode::generic;
    PolicyRows mu_rows = policy_rows(tape, Ltrain, Lfrozen, nets, mu_states);
    PolicyRows base_rows =
        base_on_aug ? mu_rows : policy_rows(tape, Ltrain, Lfrozen, nets, raw_states);

    std::map<std::string, double> terms;
    Var base_term;
    Var log_pi;
    if (sac) {
        SacTerm t = sac_actor_term(tape, Lfrozen, nets, cfg, base_rows,
                                   base_on_aug ? draws.action_noise : draws.base_noise);
        base_term = t.loss;
        log_pi = t.log_pi;
    } else {
        base_term = ddpg_actor_term(tape, Lfrozen, nets, base_rows);
    }
    terms["actor_base"] = tape.val(base_term).item();

    Var reg;
    if (cfg.actor_mode != ActorMode::implicit && cfg.alpha_pi > 0) {
        if (!sg_in->present) throw std::invalid_argument("actor_loss: missing sg values for a KL mode");
        int E = cfg.eta_draws;
        bool pairs_rows = cfg.actor_mode == ActorMode::kl_aug_target ||
                          cfg.actor_mode == ActorMode::generic;
        Var qm = mu_rows.mean;
        Var qls = mu_rows.log_std;
        if (pairs_rows) {
            std::vector<int> gidx;
            gidx.reserve(B * static_cast<size_t>(cfg.J) * E);
            for (size_t i = 0; i < B; ++i)
                for (int j = 0; j < cfg.J; ++j)
                    for (int e = 0; e < E; ++e) gidx.push_back(static_cast<int>(i) * cfg.J + j);
            qm = tape.gather_rows(mu_rows.mean, gidx);
            if (sac) qls = tape.gather_rows(mu_rows.log_std, gidx);
        }
        if (sac) {
            reg = kl_rows(tape, sg_in->mean, sg_in->log_std, qm, qls);
        } else {
            Tensor pa = sg_in->mean;
            for (long long i = 0; i < pa.size(); ++i) pa[i] = std::tanh(pa[i]);
            reg = mse_rows(tape, pa, qm);
        }
    }

    Var total = base_term;
    if (reg.valid()) {
        terms["actor_invariance"] = tape.val(reg).item();
        total = tape.add(total, tape.scale(reg, cfg.alpha_pi));
    }
    if (log_pi.valid()) terms["mean_log_pi"] = tape.val(tape.mean_all(log_pi)).item();

    tape.backward(total);
    LossResult res;
    res.value = tape.val(total).item();
    res.terms = std::move(terms);
    res.grads = collect_grads(tape, Ltrain, nets.actor_params());
    return res;
}

double tangent_prop_penalty(const Nets& nets, const FrameStack& s, const std::vector<double>& a,
                            const TransformSpec& spec, const std::vector<TransformParam>& psi) {
    if (psi.empty()) throw std::invalid_argument("tangent_prop_penalty: needs psi draws");
    int axes = tangent_axis_count(spec);
    if (axes == 0) throw std::invalid_argument("tangent_prop_penalty: family has no tangent axes");
    double acc = 0.0;
    for (const TransformParam& p : psi) {
        FrameStack xt = apply_transform(spec, p, s);
        FrameStack grad = input_gradient(nets, xt, a);
        std::vector<TangentAxis> tv = tangent_vectors(spec, p, s);
        for (const TangentAxis& ax : tv) {
            double dot = 0.0;
            for (long long i = 0; i < grad.size(); ++i)
                dot += grad.pix[static_cast<size_t>(i)] * ax.vec.pix[static_cast<size_t>(i)];
            acc += dot * dot;
        }
    }
    return acc / static_cast<double>(psi.size());
}

double kl_diag_gaussian(const PolicyDistribution& p, const PolicyDistribution& q) {
    if (p.dims() != q.dims()) throw std::invalid_argument("kl: dimension mismatch");
    double kl = 0.0;
    for (int i = 0; i < p.dims(); ++i) {
        double sp = p.sigma(i), sq = q.sigma(i);
        double d = p.mean[static_cast<size_t>(i)] - q.mean[static_cast<size_t>(i)];
        kl += q.log_std[static_cast<size_t>(i)] - p.log_std[static_cast<size_t>(i)] +
              (sp * sp + d * d) / (2.0 * sq * sq) - 0.5;
    }
    return kl;
}

PolicyDistribution averaged_policy(
    const std::vector<std::pair<PolicyDistribution, double>>& members) {
    if (members.empty()) throw std::invalid_argument("averaged_policy: empty member list");
    double total = 0.0;
    for (const auto& [d, p] : members) total += p;
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("averaged_policy: probabilities must sum to 1");
    int dims = members.front().first.dims();
    PolicyDistribution out;
    out.squash = members.front().first.squash;
    out.mean.assign(static_cast<size_t>(dims), 0.0);
    out.log_std.assign(static_cast<size_t>(dims), 0.0);
    for (int i = 0; i < dims; ++i) {
        double m = 0.0, v = 0.0;
        for (const auto& [d, p] : members) {
            if (d.dims() != dims) throw std::invalid_argument("averaged_policy: dimension mismatch");
            double s = d.sigma(i);
            m += p * d.mean[static_cast<size_t>(i)];
            v += p * p * s * s;
        }
        out.mean[static_cast<size_t>(i)] = m;
        out.log_std[static_cast<size_t>(i)] = 0.5 * std::log(v);
    }
    return out;
}

double vanilla_critic_loss_value(const LossConfig& cfg, Nets& nets, const TargetNets& targets,
                                 const Batch& batch, const CriticDraws& draws) {
    size_t B = batch.size();
    std::vector<double> y(B);
    for (size_t i = 0; i < B; ++i)
        y[i] = target_y(*batch[i], targets, nets, cfg, {identity_param(cfg.target_dist.spec)},
                        {draws.target_noise[i * static_cast<size_t>(cfg.K)]});
    Tape tape;
    Lift L(tape, false);
    std::vector<FrameStack> raw;
    raw.reserve(B);
    for (const Transition* tr : batch) raw.push_back(tr->s);
    Var x = tape.constant(stacks_tensor(raw));
    EncoderTrace enc = encoder_forward(tape, nets.enc, L, x);
    Var fa = tape.concat_cols(enc.feat, tape.constant(actions_tensor(batch, 1)));
    Var q1 = critic_forward(tape, nets.q1, L, fa).q;
    Var tgt = tape.constant(repeat_scalar_rows(y, 1));
    Var loss = tape.mean_all(tape.square(tape.sub(q1, tgt)));
    if (nets.cfg.twin_critics) {
        Var q2 = critic_forward(tape, nets.q2, L, fa).q;
        loss = tape.add(loss, tape.mean_all(tape.square(tape.sub(q2, tgt))));
    }
    return tape.val(loss).item();
}

double vanilla_actor_loss_value(const LossConfig& cfg, Nets& nets, const Batch& batch,
                                const ActorDraws& draws) {
    size_t B = batch.size();
    Tape tape;
    Lift L(tape, false);
    std::vector<FrameStack> raw;
    raw.reserve(B);
    for (const Transition* tr : batch) raw.push_back(tr->s);
    Var x = tape.constant(stacks_tensor(raw));
    EncoderTrace enc = encoder_forward(tape, nets.enc, L, x);
    PolicyVars pv = actor_forward(tape, nets.actor, L, enc.feat);
    if (cfg.base_algo == BaseAlgo::ddpg) {
        Var a = tape.tanh_(pv.mean);
        Var fa = tape.concat_cols(enc.feat, a);
        Var q1 = critic_forward(tape, nets.q1, L, fa).q;
        Var qmin = nets.cfg.twin_critics ? tape.min2(q1, critic_forward(tape, nets.q2, L, fa).q) : q1;
        return tape.val(tape.mean_all(tape.neg(qmin))).item();
    }
    int adim = static_cast<int>(batch.front()->a.size());
    Tensor xi({static_cast<int>(B), adim});
    const auto& noise = cfg.actor_mode == ActorMode::implicit || cfg.actor_mode == ActorMode::generic
                            ? draws.action_noise
                            : draws.base_noise;
    for (size_t i = 0; i < B; ++i)
        for (int j = 0; j < adim; ++j) xi[static_cast<long long>(i) * adim + j] = noise[i][static_cast<size_t>(j)];
    Var xiv = tape.constant(xi);
    Var sigma = tape.exp_(pv.log_std);
    Var u = tape.add(pv.mean, tape.mul(sigma, xiv));
    Var a = tape.tanh_(u);
    Var gauss = tape.add_scalar(tape.neg(tape.add(tape.scale(tape.square(xiv), 0.5), pv.log_std)),
                                -kHalfLog2Pi);
    Var corr = tape.scale(
        tape.add_scalar(tape.neg(tape.add(u, tape.softplus(tape.scale(u, -2.0)))), std::log(2.0)),
        2.0);
    Var log_pi = tape.row_sum(tape.sub(gauss, corr));
    Var fa = tape.concat_cols(enc.feat, a);
    Var q1 = critic_forward(tape, nets.q1, L, fa).q;
    Var qmin = nets.cfg.twin_critics ? tape.min2(q1, critic_forward(tape, nets.q2, L, fa).q) : q1;
    return tape.val(tape.mean_all(tape.sub(tape.scale(log_pi, cfg.alpha), qmin))).item();
}

}  // namespace augrl
