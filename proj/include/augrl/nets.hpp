#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "augrl/image.hpp"
#include "augrl/rng.hpp"
#include "augrl/tensor.hpp"

namespace augrl {

struct Affine {
    Tensor w, b;
    void init(int in, int out, RandomStream& rng);
};

struct Conv {
    Tensor w, b;  // w [O,C,3,3]
    void init(int in_ch, int out_ch, RandomStream& rng);
};

// Named views of every parameter tensor in a module tree; the unit the
// optimizer, EMA updates, and checkpoints operate on.
struct ParamRef {
    std::string name;
    Tensor* t;
};
using ParamRefs = std::vector<ParamRef>;

// Maps parameter tensors onto tape variables for one loss evaluation.
// Trainable lifts create differentiable leaves; frozen lifts create
// constants, so nothing can flow gradients into target networks.
class Lift {
public:
    Lift(Tape& tape, bool trainable) : tape_(&tape), trainable_(trainable) {}
    Var operator()(const Tensor& t);
    Tensor grad_of(const Tensor& t) const;  // zeros if never lifted

private:
    Tape* tape_;
    bool trainable_;
    std::unordered_map<const Tensor*, Var> vars_;
};

// conv(stride 2) -> tanh -> conv(stride 2) -> tanh -> linear -> tanh
struct Encoder {
    int in_frames = 3, in_h = 24, in_w = 24;
    int channels = 8, feat_dim = 32;
    Conv c1, c2;
    Affine head;

    void init(int frames, int h, int w, int ch, int d, RandomStream& rng);
    ParamRefs params(const std::string& prefix);
};

struct EncoderTrace {
    Var x;            // input as lifted on the tape
    Var z1, a1, z2, a2, zh;
    Var feat;         // [N, feat_dim]
};

// feature -> 2x64 tanh MLP -> (mean, log_std) heads; log_std hard-clamped to
// [log_std_min, log_std_max]. In deterministic mode the output is just the
// action mean (tanh-squashed downstream).
struct ActorNet {
    int feat_dim = 32, hidden = 64, action_dim = 2;
    bool deterministic = false;  // no log-std head
    double log_std_min = -10.0, log_std_max = 2.0;
    Affine l1, l2, out;

    void init(int d, int h, int adim, bool det, RandomStream& rng);
    ParamRefs params(const std::string& prefix);
};

struct CriticHead {
    int in_dim = 34, hidden = 64;
    Affine l1, l2, out;

    void init(int in, int h, RandomStream& rng);
    ParamRefs params(const std::string& prefix);
};

struct CriticTrace {
    Var z1, a1, z2, a2;
    Var q;  // [N, 1]
};

// Diagonal Gaussian over pre-squash actions, optionally tanh-squashed.
struct PolicyDistribution {
    std::vector<double> mean;     // lambda
    std::vector<double> log_std;
    bool squash = true;

    int dims() const { return static_cast<int>(mean.size()); }
    double sigma(int i) const;
    // density of the pre-squash Gaussian at u (per-dim product)
    double log_density_presquash(const std::vector<double>& u) const;
};

struct SampledAction {
    std::vector<double> action;    // tanh-squashed when squash is set
    std::vector<double> presquash;
    double log_prob = 0.0;
};

// log(1 - tanh(x)^2) without catastrophic cancellation
double log_one_minus_tanh_sq(double x);

SampledAction sample_action(const PolicyDistribution& dist, RandomStream& rng);
SampledAction action_from_noise(const PolicyDistribution& dist, const std::vector<double>& xi);

struct NetConfig {
    int frames = 3, height = 24, width = 24;
    int channels = 8, feat_dim = 32, hidden = 64;
    int action_dim = 2;
    bool twin_critics = true;
    bool shared_encoder = true;
    bool deterministic_actor = false;  // ddpg-style
};

struct Nets {
    NetConfig cfg;
    Encoder enc;
    std::optional<Encoder> actor_enc;  // separate actor encoder when not shared
    ActorNet actor;
    CriticHead q1, q2;

    static Nets make(const NetConfig& cfg, RandomStream& rng);
    ParamRefs params();          // everything
    ParamRefs critic_params();   // encoder + critic heads
    ParamRefs actor_params();    // actor trunk (+ actor encoder when separate)
    const Encoder& actor_encoder() const { return actor_enc ? *actor_enc : enc; }
    Encoder& actor_encoder_mut() { return actor_enc ? *actor_enc : enc; }
};

struct TargetNets {
    Encoder enc;
    CriticHead q1, q2;
    std::optional<ActorNet> actor;  // target actor for the deterministic variant

    static TargetNets make_from(const Nets& nets);
    ParamRefs params();
};

// target <- (1 - tau) * target + tau * online, pairwise over named tensors
void ema_update(TargetNets& targets, Nets& online, double tau);

// --- forward passes -------------------------------------------------------

EncoderTrace encoder_forward(Tape& t, const Encoder& e, Lift& L, Var x);
// directional derivative of the features along input tangent tx, built from
// tape primitives so it stays differentiable w.r.t. the parameters
Var encoder_tangent(Tape& t, const Encoder& e, Lift& L, const EncoderTrace& tr, Var tx);

CriticTrace critic_forward(Tape& t, const CriticHead& c, Lift& L, Var feat_action);
Var critic_tangent(Tape& t, const CriticHead& c, Lift& L, const CriticTrace& tr, Var t_feat_action);

struct PolicyVars {
    Var mean, log_std;  // [N, adim] each; log_std invalid for deterministic actors
};
PolicyVars actor_forward(Tape& t, const ActorNet& a, Lift& L, Var feat);

Tensor frames_to_tensor(const std::vector<const FrameStack*>& batch);
Tensor frames_to_tensor(const FrameStack& one);

// --- convenience evaluations (no gradients) -------------------------------

// batched frozen passes
Tensor encode_batch(const Encoder& enc, const std::vector<FrameStack>& xs);  // [N, d]
void actor_batch(const ActorNet& actor, const Tensor& feat, Tensor* mean, Tensor* log_std);
Tensor critic_min_batch(const CriticHead& q1, const CriticHead& q2, bool twin, const Tensor& feat,
                        const Tensor& actions);  // [N, 1]

PolicyDistribution policy_distribution(const Nets& nets, const FrameStack& s);
std::pair<double, double> q_values(const Nets& nets, const FrameStack& s,
                                   const std::vector<double>& action);
// gradient of min(q1, q2) with respect to every input pixel
FrameStack input_gradient(const Nets& nets, const FrameStack& s, const std::vector<double>& action);
// encoder features of a single stack
std::vector<double> encode(const Encoder& enc, const FrameStack& s);

// --- optimizer -------------------------------------------------------------

class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
    void step(const ParamRefs& params, const std::map<std::string, Tensor>& grads);
    void set_lr(double lr) { lr_ = lr; }

private:
    struct State {
        Tensor m, v;
        long long t = 0;
    };
    double lr_, b1_, b2_, eps_;
    std::map<std::string, State> state_;
};

// --- checkpoints ------------------------------------------------------------

// Binary container: text header listing name/dtype/shape per tensor, then the
// raw little-endian float64 payloads in header order.
void save_checkpoint(const std::string& path, const ParamRefs& params);
void load_checkpoint(const std::string& path, const ParamRefs& params);
std::vector<std::pair<std::string, Tensor>> read_checkpoint(const std::string& path);

}  // namespace augrl
