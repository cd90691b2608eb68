#pragma once

#include <optional>
#include <string>
#include <vector>

#include "augrl/envs.hpp"
#include "augrl/losses.hpp"
#include "augrl/nets.hpp"

namespace augrl {

struct TrainConfig {
    LossConfig loss;
    long long total_steps = 30000;
    long long seed_steps = 1000;
    int batch = 256;
    int updates_per_step = 1;    // critic updates per environment step
    int actor_update_every = 2;  // kappa
    int target_update_every = 2;
    double tau = 0.01;
    long long eval_interval = 2000;
    int eval_episodes = 10;
    long long stats_interval = 2000;
    int stats_batch = 16;
    int stats_psi_samples = 16;  // psi draws when the family is not finite
    long long buffer_capacity = 100000;
    double lr = 1e-3;
    double alpha_lr = 1e-3;
    bool alpha_autotune = false;
    double expl_noise = 0.2;  // deterministic-actor exploration stddev
    bool auto_update_schedule = false;
    double probe_fraction = 0.2;
    uint64_t seed = 1;
    NetConfig net;
    std::string config_snapshot;  // verbatim config text for the run manifest

    void validate() const;
};

struct StatsRecord {
    long long step = 0;
    double std_critic_loss = 0.0;
    double std_target_q = 0.0;
    double std_actor_loss = 0.0;
    double kl_aug = 0.0;
    double cos_sim_actor = 1.0;
    double cos_sim_critic = 1.0;
};

struct MetricsRow {
    long long step = 0;
    double eval_return = 0.0;
    double oracle_return = 0.0;  // greedy lattice policy on the same eval episodes
    double critic_loss = 0.0;    // mean since the previous row
    double actor_loss = 0.0;
    StatsRecord stats;
};

struct TrainResult {
    std::vector<MetricsRow> rows;
    double best_eval = 0.0;
    double final_eval = 0.0;
    double mean_oracle_return = 0.0;
    std::string run_dir;
    // update-schedule probe (when enabled)
    bool probed = false;
    double probe_score = 0.0;
    double probe_shift_score = 0.0;
    bool classified_complex = false;
    int effective_updates_per_step = 1;
};

// Mean statistics of a mini-batch under the transformation family: the
// spread of the per-transition critic-loss estimator and of the targets
// across the enumerated (or sampled) parameters, the KL between policies of
// two fresh augmented views, and encoder-feature cosine similarities.
StatsRecord record_stats(const LossConfig& loss, Nets& nets, const TargetNets& targets,
                         const Batch& batch, RandomStream& rng, int psi_samples,
                         int resamples = 512);

// Mean cosine similarity between encoder features of two augmented views
// over the probe states.
double complexity_score(const Encoder& enc, const ParamDistribution& dist,
                        const std::vector<FrameStack>& probes, RandomStream& rng);
bool classify_complex(double score, double shift_baseline);  // score < baseline - 0.05
int schedule_updates(int updates_per_step, bool complex_in_targets);

TrainResult train(const TrainConfig& cfg, const std::string& out_dir);  // "" -> no files

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
std::string build_id();  // from the build system, "unknown" otherwise

}  // namespace augrl
