#include "augrl/nets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace augrl {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

int conv_out(int n) { return (n + 2 - 3) / 2 + 1; }  // stride 2, pad 1, k 3

void init_uniform(Tensor& t, double bound, RandomStream& rng) {
    for (long long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}
}  // namespace

void Affine::init(int in, int out, RandomStream& rng) {
    w = Tensor({in, out});
    b = Tensor({out});
    init_uniform(w, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

void Conv::init(int in_ch, int out_ch, RandomStream& rng) {
    w = Tensor({out_ch, in_ch, 3, 3});
    b = Tensor({out_ch});
    init_uniform(w, 1.0 / std::sqrt(static_cast<double>(in_ch) * 9.0), rng);
}

Var Lift::operator()(const Tensor& t) {
    auto it = vars_.find(&t);
    if (it != vars_.end()) return it->second;
    Var v = trainable_ ? tape_->input(t) : tape_->constant(t);
    vars_.emplace(&t, v);
    return v;
}

Tensor Lift::grad_of(const Tensor& t) const {
    auto it = vars_.find(&t);
    if (it == vars_.end()) return Tensor::zeros(t.shape);
    return tape_->grad(it->second);
}

void Encoder::init(int frames, int h, int w, int ch, int d, RandomStream& rng) {
    in_frames = frames;
    in_h = h;
    in_w = w;
    channels = ch;
    feat_dim = d;
    c1.init(frames, ch, rng);
    c2.init(ch, ch, rng);
    int flat = ch * conv_out(conv_out(h)) * conv_out(conv_out(w));
    head.init(flat, d, rng);
}

ParamRefs Encoder::params(const std::string& prefix) {
    return {{prefix + ".c1.w", &c1.w}, {prefix + ".c1.b", &c1.b},
            {prefix + ".c2.w", &c2.w}, {prefix + ".c2.b", &c2.b},
            {prefix + ".head.w", &head.w}, {prefix + ".head.b", &head.b}};
}

void ActorNet::init(int d, int h, int adim, bool det, RandomStream& rng) {
    feat_dim = d;
    hidden = h;
    action_dim = adim;
    deterministic = det;
    l1.init(d, h, rng);
    l2.init(h, h, rng);
    out.init(h, det ? adim : 2 * adim, rng);
}

ParamRefs ActorNet::params(const std::string& prefix) {
    return {{prefix + ".l1.w", &l1.w}, {prefix + ".l1.b", &l1.b},
            {prefix + ".l2.w", &l2.w}, {prefix + ".l2.b", &l2.b},
            {prefix + ".out.w", &out.w}, {prefix + ".out.b", &out.b}};
}

void CriticHead::init(int in, int h, RandomStream& rng) {
    in_dim = in;
    hidden = h;
    l1.init(in, h, rng);
    l2.init(h, h, rng);
    out.init(h, 1, rng);
}

ParamRefs CriticHead::params(const std::string& prefix) {
    return {{prefix + ".l1.w", &l1.w}, {prefix + ".l1.b", &l1.b},
            {prefix + ".l2.w", &l2.w}, {prefix + ".l2.b", &l2.b},
            {prefix + ".out.w", &out.w}, {prefix + ".out.b", &out.b}};
}

double PolicyDistribution::sigma(int i) const { return std::exp(log_std[static_cast<size_t>(i)]); }

double PolicyDistribution::log_density_presquash(const std::vector<double>& u) const {
    double lp = 0.0;
    for (int i = 0; i < dims(); ++i) {
        double s = sigma(i);
        double z = (u[static_cast<size_t>(i)] - mean[static_cast<size_t>(i)]) / s;
        lp += -0.5 * z * z - log_std[static_cast<size_t>(i)] - kHalfLog2Pi;
    }
    return lp;
}

double log_one_minus_tanh_sq(double x) {
    // log(1 - tanh(x)^2) = 2 * (log 2 - x - softplus(-2x))
    double sp = -2.0 * x > 30.0 ? -2.0 * x : std::log1p(std::exp(-2.0 * x));
    return 2.0 * (std::log(2.0) - x - sp);
}

SampledAction action_from_noise(const PolicyDistribution& dist, const std::vector<double>& xi) {
    SampledAction out;
    int n = dist.dims();
    out.presquash.resize(static_cast<size_t>(n));
    out.action.resize(static_cast<size_t>(n));
    double lp = 0.0;
    for (int i = 0; i < n; ++i) {
        double s = dist.sigma(i);
        double u = dist.mean[static_cast<size_t>(i)] + s * xi[static_cast<size_t>(i)];
        out.presquash[static_cast<size_t>(i)] = u;
        lp += -0.5 * xi[static_cast<size_t>(i)] * xi[static_cast<size_t>(i)] -
              dist.log_std[static_cast<size_t>(i)] - kHalfLog2Pi;
        if (dist.squash) {
            out.action[static_cast<size_t>(i)] = std::tanh(u);
            lp -= log_one_minus_tanh_sq(u);
        } else {
            out.action[static_cast<size_t>(i)] = u;
        }
    }
    out.log_prob = lp;
    return out;
}

SampledAction sample_action(const PolicyDistribution& dist, RandomStream& rng) {
    std::vector<double> xi(static_cast<size_t>(dist.dims()));
    for (double& x : xi) x = rng.normal();
    return action_from_noise(dist, xi);
}

Nets Nets::make(const NetConfig& cfg, RandomStream& rng) {
    Nets n;
    n.cfg = cfg;
    n.enc.init(cfg.frames, cfg.height, cfg.width, cfg.channels, cfg.feat_dim, rng);
    if (!cfg.shared_encoder) {
        n.actor_enc.emplace();
        n.actor_enc->init(cfg.frames, cfg.height, cfg.width, cfg.channels, cfg.feat_dim, rng);
    }
    n.actor.init(cfg.feat_dim, cfg.hidden, cfg.action_dim, cfg.deterministic_actor, rng);
    n.q1.init(cfg.feat_dim + cfg.action_dim, cfg.hidden, rng);
    n.q2.init(cfg.feat_dim + cfg.action_dim, cfg.hidden, rng);
    return n;
}

ParamRefs Nets::params() {
    ParamRefs all = enc.params("enc");
    if (actor_enc) {
        ParamRefs ae = actor_enc->params("actor_enc");
        all.insert(all.end(), ae.begin(), ae.end());
    }
    ParamRefs a = actor.params("actor");
    all.insert(all.end(), a.begin(), a.end());
    ParamRefs c1 = q1.params("q1"), c2 = q2.params("q2");
    all.insert(all.end(), c1.begin(), c1.end());
    if (cfg.twin_critics) all.insert(all.end(), c2.begin(), c2.end());
    return all;
}

ParamRefs Nets::critic_params() {
    ParamRefs all = enc.params("enc");
    ParamRefs c1 = q1.params("q1"), c2 = q2.params("q2");
    all.insert(all.end(), c1.begin(), c1.end());
    if (cfg.twin_critics) all.insert(all.end(), c2.begin(), c2.end());
    return all;
}

ParamRefs Nets::actor_params() {
    ParamRefs all;
    if (actor_enc) all = actor_enc->params("actor_enc");
    ParamRefs a = actor.params("actor");
    all.insert(all.end(), a.begin(), a.end());
    return all;
}

TargetNets TargetNets::make_from(const Nets& nets) {
    TargetNets t;
    t.enc = nets.enc;
    t.q1 = nets.q1;
    t.q2 = nets.q2;
    if (nets.cfg.deterministic_actor) t.actor = nets.actor;
    return t;
}

ParamRefs TargetNets::params() {
    ParamRefs all = enc.params("enc");
    ParamRefs c1 = q1.params("q1"), c2 = q2.params("q2");
    all.insert(all.end(), c1.begin(), c1.end());
    all.insert(all.end(), c2.begin(), c2.end());
    if (actor) {
        ParamRefs a = actor->params("actor");
        all.insert(all.end(), a.begin(), a.end());
    }
    return all;
}

void ema_update(TargetNets& targets, Nets& online, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("ema_update: tau must be in (0, 1]");
    auto blend = [tau](Tensor& tgt, const Tensor& src) {
        for (long long i = 0; i < tgt.size(); ++i) tgt[i] = (1.0 - tau) * tgt[i] + tau * src[i];
    };
    ParamRefs te = targets.enc.params("enc"), oe = online.enc.params("enc");
    for (size_t i = 0; i < te.size(); ++i) blend(*te[i].t, *oe[i].t);
    ParamRefs tq1 = targets.q1.params("q1"), oq1 = online.q1.params("q1");
    for (size_t i = 0; i < tq1.size(); ++i) blend(*tq1[i].t, *oq1[i].t);
    ParamRefs tq2 = targets.q2.params("q2"), oq2 = online.q2.params("q2");
    for (size_t i = 0; i < tq2.size(); ++i) blend(*tq2[i].t, *oq2[i].t);
    if (targets.actor) {
        ParamRefs ta = targets.actor->params("actor"), oa = online.actor.params("actor");
        for (size_t i = 0; i < ta.size(); ++i) blend(*ta[i].t, *oa[i].t);
    }
}

EncoderTrace encoder_forward(Tape& t, const Encoder& e, Lift& L, Var x) {
    // non-saturating conv trunk; bounded feature head
    EncoderTrace tr;
    tr.x = x;
    tr.z1 = t.conv2d(x, L(e.c1.w), L(e.c1.b), 2, 1);
    tr.a1 = t.silu(tr.z1);
    tr.z2 = t.conv2d(tr.a1, L(e.c2.w), L(e.c2.b), 2, 1);
    tr.a2 = t.silu(tr.z2);
    int n = t.val(tr.a2).dim(0);
    int flat = static_cast<int>(t.val(tr.a2).size() / n);
    Var flatv = t.reshape(tr.a2, {n, flat});
    tr.zh = t.affine(flatv, L(e.head.w), L(e.head.b));
    tr.feat = t.tanh_(tr.zh);
    return tr;
}

Var encoder_tangent(Tape& t, const Encoder& e, Lift& L, const EncoderTrace& tr, Var tx) {
    // tangents skip bias terms; activation derivatives built from tape ops
    // keep the whole pass differentiable w.r.t. the weights
    Var tz1 = t.conv2d(tx, L(e.c1.w), Var{}, 2, 1);
    Var ta1 = t.mul(t.silu_deriv(tr.z1), tz1);
    Var tz2 = t.conv2d(ta1, L(e.c2.w), Var{}, 2, 1);
    Var ta2 = t.mul(t.silu_deriv(tr.z2), tz2);
    int n = t.val(ta2).dim(0);
    int flat = static_cast<int>(t.val(ta2).size() / n);
    Var tflat = t.reshape(ta2, {n, flat});
    Var tzh = t.affine(tflat, L(e.head.w), Var{});
    Var dtanh = t.add_scalar(t.neg(t.square(tr.feat)), 1.0);
    return t.mul(dtanh, tzh);
}

CriticTrace critic_forward(Tape& t, const CriticHead& c, Lift& L, Var feat_action) {
    CriticTrace tr;
    tr.z1 = t.affine(feat_action, L(c.l1.w), L(c.l1.b));
    tr.a1 = t.silu(tr.z1);
    tr.z2 = t.affine(tr.a1, L(c.l2.w), L(c.l2.b));
    tr.a2 = t.silu(tr.z2);
    tr.q = t.affine(tr.a2, L(c.out.w), L(c.out.b));
    return tr;
}

Var critic_tangent(Tape& t, const CriticHead& c, Lift& L, const CriticTrace& tr,
                   Var t_feat_action) {
    Var tz1 = t.affine(t_feat_action, L(c.l1.w), Var{});
    Var ta1 = t.mul(t.silu_deriv(tr.z1), tz1);
    Var tz2 = t.affine(ta1, L(c.l2.w), Var{});
    Var ta2 = t.mul(t.silu_deriv(tr.z2), tz2);
    return t.affine(ta2, L(c.out.w), Var{});
}

PolicyVars actor_forward(Tape& t, const ActorNet& a, Lift& L, Var feat) {
    Var h1 = t.silu(t.affine(feat, L(a.l1.w), L(a.l1.b)));
    Var h2 = t.silu(t.affine(h1, L(a.l2.w), L(a.l2.b)));
    Var o = t.affine(h2, L(a.out.w), L(a.out.b));
    PolicyVars pv;
    if (a.deterministic) {
        pv.mean = o;
        return pv;
    }
    pv.mean = t.slice_cols(o, 0, a.action_dim);
    pv.log_std = t.clamp(t.slice_cols(o, a.action_dim, 2 * a.action_dim), a.log_std_min,
                         a.log_std_max);
    return pv;
}

Tensor frames_to_tensor(const std::vector<const FrameStack*>& batch) {
    if (batch.empty()) throw std::invalid_argument("frames_to_tensor: empty batch");
    const FrameStack& f0 = *batch.front();
    Tensor t({static_cast<int>(batch.size()), f0.frames, f0.height, f0.width});
    size_t stride = f0.pix.size();
    for (size_t i = 0; i < batch.size(); ++i) {
        if (!batch[i]->same_shape(f0)) throw std::invalid_argument("frames_to_tensor: ragged batch");
        std::copy(batch[i]->pix.begin(), batch[i]->pix.end(), t.v.begin() + static_cast<long long>(i * stride));
    }
    return t;
}

Tensor frames_to_tensor(const FrameStack& one) { return frames_to_tensor({&one}); }

Tensor encode_batch(const Encoder& enc, const std::vector<FrameStack>& xs) {
    Tape t;
    Lift L(t, false);
    std::vector<const FrameStack*> ptrs;
    ptrs.reserve(xs.size());
    for (const FrameStack& x : xs) ptrs.push_back(&x);
    Var x = t.constant(frames_to_tensor(ptrs));
    return t.val(encoder_forward(t, enc, L, x).feat);
}

void actor_batch(const ActorNet& actor, const Tensor& feat, Tensor* mean, Tensor* log_std) {
    Tape t;
    Lift L(t, false);
    PolicyVars pv = actor_forward(t, actor, L, t.constant(feat));
    *mean = t.val(pv.mean);
    if (log_std) {
        if (actor.deterministic)
            *log_std = Tensor::full(mean->shape, 0.0);
        else
            *log_std = t.val(pv.log_std);
    }
}

Tensor critic_min_batch(const CriticHead& q1, const CriticHead& q2, bool twin, const Tensor& feat,
                        const Tensor& actions) {
    Tape t;
    Lift L(t, false);
    Var fa = t.concat_cols(t.constant(feat), t.constant(actions));
    Var v1 = critic_forward(t, q1, L, fa).q;
    if (!twin) return t.val(v1);
    Var v2 = critic_forward(t, q2, L, fa).q;
    return t.val(t.min2(v1, v2));
}

PolicyDistribution policy_distribution(const Nets& nets, const FrameStack& s) {
    Tape t;
    Lift L(t, false);
    Var x = t.constant(frames_to_tensor(s));
    EncoderTrace tr = encoder_forward(t, nets.actor_encoder(), L, x);
    PolicyVars pv = actor_forward(t, nets.actor, L, tr.feat);
    PolicyDistribution d;
    d.squash = true;
    d.mean = t.val(pv.mean).v;
    if (nets.actor.deterministic) {
        d.log_std.assign(d.mean.size(), -1e9);  // degenerate; callers use the mean
    } else {
        d.log_std = t.val(pv.log_std).v;
    }
    return d;
}

std::pair<double, double> q_values(const Nets& nets, const FrameStack& s,
                                   const std::vector<double>& action) {
    Tape t;
    Lift L(t, false);
    Var x = t.constant(frames_to_tensor(s));
    EncoderTrace tr = encoder_forward(t, nets.enc, L, x);
    Tensor a({1, static_cast<int>(action.size())}, std::vector<double>(action));
    Var fa = t.concat_cols(tr.feat, t.constant(a));
    double v1 = t.val(critic_forward(t, nets.q1, L, fa).q)[0];
    double v2 = nets.cfg.twin_critics ? t.val(critic_forward(t, nets.q2, L, fa).q)[0] : v1;
    return {v1, v2};
}

FrameStack input_gradient(const Nets& nets, const FrameStack& s,
                          const std::vector<double>& action) {
    Tape t;
    Lift L(t, false);
    Var x = t.input(frames_to_tensor(s));
    EncoderTrace tr = encoder_forward(t, nets.enc, L, x);
    Tensor a({1, static_cast<int>(action.size())}, std::vector<double>(action));
    Var fa = t.concat_cols(tr.feat, t.constant(a));
    Var q1 = critic_forward(t, nets.q1, L, fa).q;
    Var q = nets.cfg.twin_critics ? t.min2(q1, critic_forward(t, nets.q2, L, fa).q) : q1;
    t.backward(t.sum_all(q));
    FrameStack g(s.frames, s.height, s.width);
    g.pix = t.grad(x).v;
    return g;
}

std::vector<double> encode(const Encoder& enc, const FrameStack& s) {
    Tape t;
    Lift L(t, false);
    Var x = t.constant(frames_to_tensor(s));
    return t.val(encoder_forward(t, enc, L, x).feat).v;
}

void Adam::step(const ParamRefs& params, const std::map<std::string, Tensor>& grads) {
    for (const ParamRef& p : params) {
        auto git = grads.find(p.name);
        if (git == grads.end()) continue;
        const Tensor& g = git->second;
        State& st = state_[p.name];
        if (st.t == 0) {
            st.m = Tensor::zeros(p.t->shape);
            st.v = Tensor::zeros(p.t->shape);
        }
        ++st.t;
        double c1 = 1.0 - std::pow(b1_, static_cast<double>(st.t));
        double c2 = 1.0 - std::pow(b2_, static_cast<double>(st.t));
        for (long long i = 0; i < g.size(); ++i) {
            st.m[i] = b1_ * st.m[i] + (1.0 - b1_) * g[i];
            st.v[i] = b2_ * st.v[i] + (1.0 - b2_) * g[i] * g[i];
            (*p.t)[i] -= lr_ * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + eps_);
        }
    }
}

void save_checkpoint(const std::string& path, const ParamRefs& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << "AUGRLCKPT1\n";
    for (const ParamRef& p : params) {
        out << p.name << " f64 " << p.t->ndim();
        for (int d : p.t->shape) out << " " << d;
        out << "\n";
    }
    out << "END\n";
    for (const ParamRef& p : params)
        out.write(reinterpret_cast<const char*>(p.t->v.data()),
                  static_cast<std::streamsize>(p.t->v.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "AUGRLCKPT1")
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::vector<std::pair<std::string, Tensor>> entries;
    while (std::getline(in, line)) {
        if (line == "END") break;
        std::istringstream ls(line);
        std::string name, dtype;
        int ndim = 0;
        if (!(ls >> name >> dtype >> ndim) || dtype != "f64")
            throw std::runtime_error("checkpoint: bad header line: " + line);
        std::vector<int> shape(static_cast<size_t>(ndim));
        for (int& d : shape)
            if (!(ls >> d)) throw std::runtime_error("checkpoint: bad shape in: " + line);
        entries.emplace_back(name, Tensor(shape));
    }
    for (auto& [name, t] : entries) {
        in.read(reinterpret_cast<char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(double)));
        if (in.gcount() != static_cast<std::streamsize>(t.v.size() * sizeof(double)))
            throw std::runtime_error("checkpoint: truncated payload for " + name);
    }
    return entries;
}

void load_checkpoint(const std::string& path, const ParamRefs& params) {
    auto entries = read_checkpoint(path);
    std::map<std::string, Tensor*> want;
    for (const ParamRef& p : params) want[p.name] = p.t;
    for (auto& [name, t] : entries) {
        auto it = want.find(name);
        if (it == want.end()) continue;
        if (!it->second->same_shape(t))
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        *it->second = std::move(t);
        want.erase(it);
    }
    if (!want.empty())
        throw std::runtime_error("checkpoint: missing tensor " + want.begin()->first + " in " + path);
}

}  // namespace augrl
