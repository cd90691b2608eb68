#include "augrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace augrl {

int SpriteReacherEnv::sprite_center(double coord) {
    // sprite centers live in [margin+1, size-margin-2] so the 3x3 sprite
    // never enters the blank margin
    int lo = kMargin + 1;
    int hi = kSize - kMargin - 2;
    int c = lo + static_cast<int>(std::lround(coord * (hi - lo)));
    return std::min(hi, std::max(lo, c));
}

double SpriteReacherEnv::reward_for(const std::vector<double>& p, const std::vector<double>& g) {
    double dx = p[0] - g[0], dy = p[1] - g[1];
    return 1.0 - std::sqrt(dx * dx + dy * dy) / std::sqrt(2.0);
}

FrameStack SpriteReacherEnv::render_frame() const {
    FrameStack f(1, kSize, kSize);
    auto draw = [&f](int cy, int cx, double value) {
        for (int y = cy - 1; y <= cy + 1; ++y)
            for (int x = cx - 1; x <= cx + 1; ++x) f.at(0, y, x) = value;
    };
    draw(sprite_center(g_[1]), sprite_center(g_[0]), 0.5);
    draw(sprite_center(p_[1]), sprite_center(p_[0]), 1.0);
    return f;
}

FrameStack SpriteReacherEnv::stack() const {
    FrameStack s(kFrames, kSize, kSize);
    for (int f = 0; f < kFrames; ++f)
        for (int y = 0; y < kSize; ++y)
            for (int x = 0; x < kSize; ++x) s.at(f, y, x) = ring_[static_cast<size_t>(f)].at(0, y, x);
    return s;
}

FrameStack SpriteReacherEnv::reset(RandomStream& rng) {
    double px = rng.uniform_int(kGrid) / static_cast<double>(kGrid - 1);
    double py = rng.uniform_int(kGrid) / static_cast<double>(kGrid - 1);
    double gx = rng.uniform_int(kGrid) / static_cast<double>(kGrid - 1);
    double gy = rng.uniform_int(kGrid) / static_cast<double>(kGrid - 1);
    return reset_at(px, py, gx, gy);
}

FrameStack SpriteReacherEnv::reset_at(double px, double py, double gx, double gy) {
    p_ = {px, py};
    g_ = {gx, gy};
    t_ = 0;
    ring_.assign(kFrames, render_frame());
    return stack();
}

StepResult SpriteReacherEnv::step(const std::vector<double>& action) {
    if (done()) throw std::logic_error("sprite reacher: step after episode end");
    if (action.size() != 2) throw std::invalid_argument("sprite reacher: action must be 2-D");
    std::vector<double> a = action;
    for (double& v : a) {
        if (v < -1.0 || v > 1.0) {
            v = std::min(1.0, std::max(-1.0, v));
            ++clamp_warnings_;
        }
    }
    for (int i = 0; i < 2; ++i) p_[static_cast<size_t>(i)] = std::min(1.0, std::max(0.0, p_[static_cast<size_t>(i)] + kStep * a[static_cast<size_t>(i)]));
    ++t_;
    ring_.erase(ring_.begin());
    ring_.push_back(render_frame());
    StepResult r;
    r.obs = stack();
    r.reward = reward_for(p_, g_);
    r.done = done();
    return r;
}

void append_episode_csv(const std::string& path, int t, const std::vector<double>& p,
                        const std::vector<double>& a, double r, bool write_header) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("episode csv: cannot open " + path);
    if (write_header) out << "t,px,py,ax,ay,r\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", t, p[0], p[1], a[0], a[1], r);
    out << buf;
}

OracleQ::OracleQ(double goal_x, double goal_y, double gamma, int horizon)
    : gx_(goal_x), gy_(goal_y), gamma_(gamma), horizon_(horizon) {
    int G = SpriteReacherEnv::kGrid;
    q_.assign(static_cast<size_t>(horizon_ + 1) * G * G * kAtoms, 0.0);
    std::vector<double> v_prev(static_cast<size_t>(G) * G, 0.0), v_cur(v_prev);
    for (int h = 1; h <= horizon_; ++h) {
        for (int iy = 0; iy < G; ++iy)
            for (int ix = 0; ix < G; ++ix) {
                double best = -1e300;
                for (int atom = 0; atom < kAtoms; ++atom) {
                    int ax = atom % 3 - 1, ay = atom / 3 - 1;
                    int nx = std::min(G - 1, std::max(0, ix + 4 * ax));
                    int ny = std::min(G - 1, std::max(0, iy + 4 * ay));
                    std::vector<double> p{nx / static_cast<double>(G - 1), ny / static_cast<double>(G - 1)};
                    double r = SpriteReacherEnv::reward_for(p, {gx_, gy_});
                    double val = r + gamma_ * v_prev[static_cast<size_t>(ny) * G + nx];
                    q_[idx(h, iy, ix, atom)] = val;
                    best = std::max(best, val);
                }
                v_cur[static_cast<size_t>(iy) * G + ix] = best;
            }
        std::swap(v_prev, v_cur);
    }
}

size_t OracleQ::idx(int h, int iy, int ix, int atom) const {
    int G = SpriteReacherEnv::kGrid;
    return ((static_cast<size_t>(h) * G + iy) * G + ix) * kAtoms + static_cast<size_t>(atom);
}

double OracleQ::q(int h, int iy, int ix, int atom) const { return q_[idx(h, iy, ix, atom)]; }

double OracleQ::v(int h, int iy, int ix) const {
    double best = -1e300;
    for (int a = 0; a < kAtoms; ++a) best = std::max(best, q(h, iy, ix, a));
    return best;
}

int OracleQ::greedy_atom(int h, int iy, int ix) const {
    int best = 0;
    double bv = -1e300;
    for (int a = 0; a < kAtoms; ++a) {
        double v = q(h, iy, ix, a);
        if (v > bv) {
            bv = v;
            best = a;
        }
    }
    return best;
}

std::vector<double> OracleQ::atom_action(int atom) {
    return {static_cast<double>(atom % 3 - 1), static_cast<double>(atom / 3 - 1)};
}

int OracleQ::snap_index(double coord) {
    int G = SpriteReacherEnv::kGrid;
    return std::min(G - 1, std::max(0, static_cast<int>(std::lround(coord * (G - 1)))));
}

double OracleQ::rollout_return(double px, double py, bool discounted) const {
    int G = SpriteReacherEnv::kGrid;
    int ix = snap_index(px), iy = snap_index(py);
    double total = 0.0, disc = 1.0;
    for (int h = horizon_; h >= 1; --h) {
        int atom = greedy_atom(h, iy, ix);
        int ax = atom % 3 - 1, ay = atom / 3 - 1;
        ix = std::min(G - 1, std::max(0, ix + 4 * ax));
        iy = std::min(G - 1, std::max(0, iy + 4 * ay));
        std::vector<double> p{ix / static_cast<double>(G - 1), iy / static_cast<double>(G - 1)};
        double r = SpriteReacherEnv::reward_for(p, {gx_, gy_});
        total += discounted ? disc * r : r;
        disc *= gamma_;
    }
    return total;
}

FrameStack NuisanceChannelEnv::render() {
    FrameStack f(1, kH, kW);
    // payload: a 2x2 bright block whose column encodes the position
    int cx = 1 + static_cast<int>(std::lround(x_ * (kPayloadCols - 3)));
    for (int y = 3; y <= 4; ++y)
        for (int x = cx; x <= cx + 1; ++x) f.at(0, y, x) = 1.0;
    for (int y = 0; y < kH; ++y)
        for (int x = kPayloadCols; x < kW; ++x) f.at(0, y, x) = rng_.uniform();
    return f;
}

FrameStack NuisanceChannelEnv::reset() {
    x_ = rng_.uniform();
    t_ = 0;
    return render();
}

StepResult NuisanceChannelEnv::step(const std::vector<double>& action) {
    if (action.empty()) throw std::invalid_argument("nuisance env: needs a 1-D action");
    double a = std::min(1.0, std::max(-1.0, action[0]));
    x_ = std::min(1.0, std::max(0.0, x_ + 0.2 * a));
    ++t_;
    StepResult r;
    r.obs = render();
    r.reward = 1.0 - std::abs(x_ - 0.5) * 2.0;
    r.done = t_ >= kHorizon;
    return r;
}

FrameStack nuisance_roll(const FrameStack& s, int j, int payload_cols) {
    int n = s.width - payload_cols;
    int shift = ((j % n) + n) % n;
    FrameStack out = s;
    for (int f = 0; f < s.frames; ++f)
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < n; ++x)
                out.at(f, y, payload_cols + (x + shift) % n) = s.at(f, y, payload_cols + x);
    return out;
}

std::vector<uint8_t> ReplayBuffer::quantize(const FrameStack& f) {
    std::vector<uint8_t> out(f.pix.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<uint8_t>(std::lround(std::min(1.0, std::max(0.0, f.pix[i])) * 255.0));
    return out;
}

FrameStack ReplayBuffer::dequantize(const std::vector<uint8_t>& bytes) const {
    FrameStack f(frames_, height_, width_);
    for (size_t i = 0; i < bytes.size(); ++i) f.pix[i] = bytes[i] / 255.0;
    return f;
}

void ReplayBuffer::push(const Transition& t) {
    if (capacity_ == 0) throw std::logic_error("replay buffer: zero capacity");
    if (store_.empty()) {
        frames_ = t.s.frames;
        height_ = t.s.height;
        width_ = t.s.width;
    }
    Stored st;
    st.s = quantize(t.s);
    st.s2 = quantize(t.s2);
    st.a = t.a;
    st.r = t.r;
    st.done = t.done;
    if (store_.size() < capacity_) {
        store_.push_back(std::move(st));
    } else {
        store_[next_] = std::move(st);
    }
    next_ = (next_ + 1) % capacity_;
}

Transition ReplayBuffer::at(size_t i) const {
    const Stored& st = store_.at(i);
    Transition t;
    t.s = dequantize(st.s);
    t.s2 = dequantize(st.s2);
    t.a = st.a;
    t.r = st.r;
    t.done = st.done;
    return t;
}

Batch ReplayBuffer::sample(int n, RandomStream& rng) {
    if (store_.empty()) throw std::logic_error("replay buffer: sample from empty buffer");
    scratch_.clear();
    scratch_.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        scratch_.push_back(at(static_cast<size_t>(rng.uniform_int(static_cast<int>(store_.size())))));
    Batch b;
    b.reserve(scratch_.size());
    for (const Transition& t : scratch_) b.push_back(&t);
    return b;
}

}  // namespace augrl
