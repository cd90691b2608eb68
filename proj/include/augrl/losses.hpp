#pragma once

#include <map>
#include <string>
#include <vector>

#include "augrl/augment.hpp"
#include "augrl/nets.hpp"

namespace augrl {

enum class BaseAlgo { sac, ddpg };
enum class CriticMode { implicit, explicit_sg, explicit_y, svea_asym, generic };
enum class ActorMode { implicit, explicit_kl, kl_aug_target, kl_avg_target, generic };

std::string to_string(BaseAlgo a);
std::string to_string(CriticMode m);
std::string to_string(ActorMode m);
BaseAlgo base_algo_from_string(const std::string& s);
CriticMode critic_mode_from_string(const std::string& s);  // accepts drq/rad aliases
ActorMode actor_mode_from_string(const std::string& s);

// One transformation family entering the critic loss, with its weight.
struct TransformChannel {
    TransformSpec spec;
    ParamDistribution dist;
    double alpha_i = 1.0;
};

struct LossConfig {
    BaseAlgo base_algo = BaseAlgo::sac;
    CriticMode critic_mode = CriticMode::implicit;
    ActorMode actor_mode = ActorMode::implicit;
    int M = 2;  // draws per channel on s in the critic loss
    int K = 2;  // draws on s' in the target
    int J = 1;  // draws on s in the actor loss
    int eta_draws = 1;
    double alpha = 0.1;     // entropy coefficient
    double alpha_q = 1.0;   // explicit critic regularization weight
    double alpha_pi = 0.1;  // policy invariance (KL) weight
    double alpha_tp = 0.0;  // tangent penalty weight
    double gamma = 0.99;
    double svea_weight_simple = 0.5;
    double svea_weight_complex = 0.5;
    std::vector<TransformChannel> channels;  // at least one
    ParamDistribution target_dist;  // mu (targets) and eta (actor KL) share this
    ParamDistribution tangent_dist; // psi draws for the tangent penalty
    int tangent_draws = 1;

    void validate() const;
    static LossConfig defaults();  // shift-augmented SAC
};

struct Transition {
    FrameStack s;
    std::vector<double> a;
    double r = 0.0;
    FrameStack s2;
    bool done = false;
};

using Batch = std::vector<const Transition*>;

// Explicit randomness for one critic-loss evaluation; losses are pure
// functions of (networks, batch, draws).
struct CriticDraws {
    std::vector<std::vector<TransformParam>> nu;       // [channel][B*M]
    std::vector<TransformParam> mu;                    // [B*K]
    std::vector<std::vector<double>> target_noise;     // [B*K][adim]
    std::vector<TransformParam> tangent;               // [B*tangent_draws]
};
struct ActorDraws {
    std::vector<TransformParam> mu;                 // [B*J]
    std::vector<TransformParam> eta;                // [B*eta_draws]
    std::vector<std::vector<double>> action_noise;  // [B*J][adim]
    std::vector<std::vector<double>> base_noise;    // [B][adim]
};

CriticDraws draw_critic(const LossConfig& cfg, int batch, int adim, RandomStream& rng);
ActorDraws draw_actor(const LossConfig& cfg, int batch, int adim, RandomStream& rng);

struct LossResult {
    double value = 0.0;
    std::map<std::string, double> terms;
    std::map<std::string, Tensor> grads;
};

// Bootstrap target for one transition, averaged over the mu draws:
//   y = r + gamma * (1/K) * sum_k [minQ(T_k(s'), a'_k) - alpha * log pi(a'_k | T_k(s'))]
// (deterministic-actor variant drops the entropy term and uses the target
// actor). Terminal transitions return r. No gradient flows out.
double target_y(const Transition& tr, const TargetNets& targets, const Nets& nets,
                const LossConfig& cfg, const std::vector<TransformParam>& mu_params,
                const std::vector<std::vector<double>>& noise);
// per-draw targets (K values y_k = r + gamma * w_k), used by the statistics
std::vector<double> target_y_per_draw(const Transition& tr, const TargetNets& targets,
                                      const Nets& nets, const LossConfig& cfg,
                                      const std::vector<TransformParam>& mu_params,
                                      const std::vector<std::vector<double>>& noise);

// Stop-gradient values entering a critic-loss evaluation: the bootstrap
// targets and, for the detached-regularizer mode, the base Q values. Passing
// them explicitly keeps the loss a pure function whose gradient can be
// finite-difference checked while the sg branches stay frozen.
struct CriticSg {
    std::vector<double> ybar;                // [B]
    std::vector<double> q1_base, q2_base;    // explicit_sg regularization targets
};
CriticSg critic_sg(const LossConfig& cfg, Nets& nets, const TargetNets& targets,
                   const Batch& batch, const CriticDraws& draws);

// Detached side of the actor invariance term (Gaussian parameters of the
// target policies), laid out row-per-KL-pair according to the mode.
struct ActorSg {
    Tensor mean, log_std;
    bool present = false;
};
ActorSg actor_sg(const LossConfig& cfg, Nets& nets, const Batch& batch, const ActorDraws& draws);

LossResult critic_loss(const LossConfig& cfg, Nets& nets, const TargetNets& targets,
                       const Batch& batch, const CriticDraws& draws,
                       const CriticSg* sg = nullptr);
LossResult actor_loss(const LossConfig& cfg, Nets& nets, const Batch& batch,
                      const ActorDraws& draws, const ActorSg* sg = nullptr);

// Mean over the psi draws of sum_axes (d minQ(T_psi(s), a) / d input . tangent_axis)^2,
// evaluated with explicit finite-difference tangents.
double tangent_prop_penalty(const Nets& nets, const FrameStack& s, const std::vector<double>& a,
                            const TransformSpec& spec, const std::vector<TransformParam>& psi);

// Closed-form KL between diagonal Gaussians on the pre-squash space.
double kl_diag_gaussian(const PolicyDistribution& p, const PolicyDistribution& q);

// Average of a weighted family of Gaussian policies: mean sum_i P_i*lambda_i
// and variance sum_i P_i^2*sigma_i^2 per dimension.
PolicyDistribution averaged_policy(const std::vector<std::pair<PolicyDistribution, double>>& members);

// Plain single-algorithm losses on the raw batch (no transformations); the
// degeneracy reference every augmented mode must collapse onto.
double vanilla_critic_loss_value(const LossConfig& cfg, Nets& nets, const TargetNets& targets,
                                 const Batch& batch, const CriticDraws& draws);
double vanilla_actor_loss_value(const LossConfig& cfg, Nets& nets, const Batch& batch,
                                const ActorDraws& draws);

}  // namespace augrl
