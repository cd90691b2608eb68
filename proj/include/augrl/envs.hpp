#pragma once

#include <string>
#include <vector>

#include "augrl/image.hpp"
#include "augrl/losses.hpp"
#include "augrl/rng.hpp"

namespace augrl {

struct StepResult {
    FrameStack obs;
    double reward = 0.0;
    bool done = false;
};

// 2-D reacher rendered as 24x24 grayscale, 3 stacked frames. The 3x3 agent
// sprite (intensity 1.0) and 3x3 goal sprite (0.5) stay inside a 2-pixel
// blank margin, so shifts up to 2 pixels move the sprites without clipping.
// Start and goal positions are drawn on the 41x41 lattice the value-iteration
// oracle uses; the 0.1-sized action atoms map lattice points to lattice
// points exactly.
class SpriteReacherEnv {
public:
    static constexpr int kSize = 24;
    static constexpr int kFrames = 3;
    static constexpr int kMargin = 2;
    static constexpr int kHorizon = 50;
    static constexpr int kGrid = 41;  // positions per axis
    static constexpr double kStep = 0.1;

    FrameStack reset(RandomStream& rng);
    FrameStack reset_at(double px, double py, double gx, double gy);
    StepResult step(const std::vector<double>& action);  // action in [-1,1]^2, clamped

    const std::vector<double>& agent() const { return p_; }
    const std::vector<double>& goal() const { return g_; }
    int steps_taken() const { return t_; }
    bool done() const { return t_ >= kHorizon; }
    long long clamp_warnings() const { return clamp_warnings_; }

    static double reward_for(const std::vector<double>& p, const std::vector<double>& g);
    static int sprite_center(double coord);  // position in [0,1] -> pixel center

private:
    std::vector<double> p_{0.5, 0.5}, g_{0.5, 0.5};
    int t_ = 0;
    long long clamp_warnings_ = 0;
    std::vector<FrameStack> ring_;  // last kFrames single-frame renderings

    FrameStack render_frame() const;
    FrameStack stack() const;
};

// appends (t, px, py, ax, ay, r) rows; header written when the file is new
void append_episode_csv(const std::string& path, int t, const std::vector<double>& p,
                        const std::vector<double>& a, double r, bool write_header);

// Finite-horizon action values of the reacher for one fixed goal, computed by
// dynamic programming over the 41x41 position lattice and the 9 action atoms
// {-1,0,1}^2. q(h, iy, ix, atom) is the optimal value with h steps remaining.
class OracleQ {
public:
    static constexpr int kAtoms = 9;

    OracleQ(double goal_x, double goal_y, double gamma, int horizon = SpriteReacherEnv::kHorizon);

    double q(int h, int iy, int ix, int atom) const;
    double v(int h, int iy, int ix) const;
    int greedy_atom(int h, int iy, int ix) const;
    static std::vector<double> atom_action(int atom);
    static int snap_index(double coord);  // nearest lattice index

    // deterministic greedy rollout from a lattice start; discounted matches
    // the table, undiscounted matches the evaluation protocol
    double rollout_return(double px, double py, bool discounted) const;

    double gamma() const { return gamma_; }
    int horizon() const { return horizon_; }

private:
    double gx_, gy_, gamma_;
    int horizon_;
    std::vector<double> q_;  // [horizon+1][41][41][9]
    size_t idx(int h, int iy, int ix, int atom) const;
};

// Two-region diagnostic environment: the left (payload) half drives reward
// and dynamics, the right (nuisance) half is refreshed with random pixels
// every step. Any critic that reads only the payload region is exactly
// invariant under nuisance-only transformations.
class NuisanceChannelEnv {
public:
    static constexpr int kH = 8;
    static constexpr int kW = 16;
    static constexpr int kPayloadCols = 8;
    static constexpr int kHorizon = 20;

    explicit NuisanceChannelEnv(RandomStream rng) : rng_(rng) {}

    FrameStack reset();
    StepResult step(const std::vector<double>& action);  // 1-D action

    double pos() const { return x_; }

private:
    RandomStream rng_;
    double x_ = 0.5;
    int t_ = 0;

    FrameStack render();
};

// rolls the nuisance columns of a payload/nuisance frame by j; identity at 0
FrameStack nuisance_roll(const FrameStack& s, int j, int payload_cols = NuisanceChannelEnv::kPayloadCols);

// FIFO ring of transitions with uniform sampling (with replacement).
// Observations are stored as 8-bit pixels and dequantized on sampling, so a
// full pixel buffer stays within a couple hundred megabytes.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}

    void push(const Transition& t);
    // returned pointers stay valid until the next sample() or push()
    Batch sample(int n, RandomStream& rng);
    size_t size() const { return store_.size(); }
    size_t capacity() const { return capacity_; }
    Transition at(size_t i) const;

private:
    struct Stored {
        std::vector<uint8_t> s, s2;
        std::vector<double> a;
        double r = 0.0;
        bool done = false;
    };

    static std::vector<uint8_t> quantize(const FrameStack& f);
    FrameStack dequantize(const std::vector<uint8_t>& bytes) const;

    size_t capacity_;
    size_t next_ = 0;
    int frames_ = 0, height_ = 0, width_ = 0;
    std::vector<Stored> store_;
    std::vector<Transition> scratch_;
};

}  // namespace augrl
