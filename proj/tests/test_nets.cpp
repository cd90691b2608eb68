#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "augrl/nets.hpp"
#include "augrl/verify.hpp"

using namespace augrl;

namespace {

NetConfig tiny_cfg() {
    NetConfig c;
    c.frames = 2;
    c.height = 8;
    c.width = 8;
    c.channels = 4;
    c.feat_dim = 8;
    c.hidden = 16;
    c.action_dim = 2;
    return c;
}

FrameStack random_frames(RandomStream& rng, const NetConfig& c) {
    FrameStack s(c.frames, c.height, c.width);
    for (double& p : s.pix) p = rng.uniform();
    return s;
}

}  // namespace

TEST_CASE("parameter and input gradients of min-Q match finite differences") {
    RandomStream rng(101, "gradnet");
    Nets nets = Nets::make(tiny_cfg(), rng);
    FrameStack s = random_frames(rng, nets.cfg);
    std::vector<double> a{0.3, -0.4};

    auto scalar = [&]() {
        auto [q1, q2] = q_values(nets, s, a);
        return std::min(q1, q2);
    };
    double worst = 0.0;
    for (const ParamRef& ref : nets.critic_params()) {
        Tape t;
        Lift L(t, true);
        Var x = t.constant(frames_to_tensor(s));
        EncoderTrace tr = encoder_forward(t, nets.enc, L, x);
        Tensor at({1, 2}, std::vector<double>(a));
        Var fa = t.concat_cols(tr.feat, t.constant(at));
        Var q = t.min2(critic_forward(t, nets.q1, L, fa).q, critic_forward(t, nets.q2, L, fa).q);
        t.backward(t.sum_all(q));
        auto f = [&](const Tensor& v) {
            Tensor saved = *ref.t;
            *ref.t = v;
            double out = scalar();
            *ref.t = saved;
            return out;
        };
        worst = std::max(worst, max_relative_error(L.grad_of(*ref.t), finite_difference(f, *ref.t)));
    }
    CHECK(worst < 1e-5);

    FrameStack g = input_gradient(nets, s, a);
    Tensor flat({nets.cfg.frames, nets.cfg.height, nets.cfg.width}, std::vector<double>(s.pix));
    auto fx = [&](const Tensor& v) {
        FrameStack sv = s;
        sv.pix = v.v;
        auto [q1, q2] = q_values(nets, sv, a);
        return std::min(q1, q2);
    };
    Tensor gfd = finite_difference(fx, flat);
    Tensor gt(flat.shape, std::vector<double>(g.pix));
    CHECK(max_relative_error(gt, gfd) < 1e-5);
}

TEST_CASE("input gradient of a constant critic is zero") {
    RandomStream rng(102, "const");
    Nets nets = Nets::make(tiny_cfg(), rng);
    for (const ParamRef& ref : nets.q1.params("q1"))
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
    for (const ParamRef& ref : nets.q2.params("q2"))
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
    FrameStack s = random_frames(rng, nets.cfg);
    FrameStack g = input_gradient(nets, s, {0.1, 0.2});
    for (double v : g.pix) CHECK(v == 0.0);
}

TEST_CASE("zero-weight actor gives a standard normal head") {
    RandomStream rng(103, "zeroactor");
    Nets nets = Nets::make(tiny_cfg(), rng);
    for (const ParamRef& ref : nets.actor.params("actor"))
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
    FrameStack s = random_frames(rng, nets.cfg);
    PolicyDistribution d = policy_distribution(nets, s);
    for (double m : d.mean) CHECK(m == 0.0);
    for (double ls : d.log_std) CHECK(ls == 0.0);
}

TEST_CASE("log-std head saturating low clamps to the lower bound") {
    RandomStream rng(104, "clamp");
    Nets nets = Nets::make(tiny_cfg(), rng);
    for (const ParamRef& ref : nets.actor.params("actor"))
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
    // bias the log-std outputs to -20
    for (int i = nets.cfg.action_dim; i < 2 * nets.cfg.action_dim; ++i)
        nets.actor.out.b[i] = -20.0;
    FrameStack s = random_frames(rng, nets.cfg);
    PolicyDistribution d = policy_distribution(nets, s);
    for (double ls : d.log_std) CHECK(ls == -10.0);
}

TEST_CASE("states differing only in an ignored frame give identical policies") {
    RandomStream rng(105, "ignore");
    Nets nets = Nets::make(tiny_cfg(), rng);
    // zero every first-conv weight that reads frame 0
    Conv& c1 = nets.enc.c1;
    for (int o = 0; o < c1.w.dim(0); ++o)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
                c1.w[((static_cast<long long>(o) * c1.w.dim(1) + 0) * 3 + ky) * 3 + kx] = 0.0;
    FrameStack s1 = random_frames(rng, nets.cfg);
    FrameStack s2 = s1;
    for (int y = 0; y < s2.height; ++y)
        for (int x = 0; x < s2.width; ++x) s2.at(0, y, x) = rng.uniform();
    PolicyDistribution d1 = policy_distribution(nets, s1);
    PolicyDistribution d2 = policy_distribution(nets, s2);
    CHECK(d1.mean == d2.mean);
    CHECK(d1.log_std == d2.log_std);
}

TEST_CASE("sampled actions: degenerate limit, moments, log-density") {
    PolicyDistribution d;
    d.squash = true;
    d.mean = {0.7, -1.2};
    d.log_std = {-40.0, -40.0};
    RandomStream rng(106, "sample");
    SampledAction sa = sample_action(d, rng);
    CHECK(sa.action[0] == doctest::Approx(std::tanh(0.7)).epsilon(1e-14));
    CHECK(sa.action[1] == doctest::Approx(std::tanh(-1.2)).epsilon(1e-14));

    PolicyDistribution n01;
    n01.squash = true;
    n01.mean = {0.0};
    n01.log_std = {0.0};
    double mean = 0.0;
    const int n = 100000;
    RandomStream rng2(107, "mc");
    for (int i = 0; i < n; ++i) mean += sample_action(n01, rng2).presquash[0];
    mean /= n;
    CHECK(std::abs(mean) < 0.02);

    // log_prob equals the diagonal-Gaussian log-density minus the squash correction
    PolicyDistribution d2;
    d2.squash = true;
    d2.mean = {0.3, -0.5};
    d2.log_std = {-0.4, 0.2};
    RandomStream rng3(108, "logp");
    for (int i = 0; i < 50; ++i) {
        SampledAction s = sample_action(d2, rng3);
        double expected = d2.log_density_presquash(s.presquash);
        for (int j = 0; j < 2; ++j) {
            double th = std::tanh(s.presquash[static_cast<size_t>(j)]);
            expected -= std::log(1.0 - th * th);
        }
        CHECK(s.log_prob == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("squashed density integrates to one on a 1-D grid") {
    PolicyDistribution d;
    d.squash = true;
    d.mean = {0.4};
    d.log_std = {-0.3};
    // integrate over the pre-squash variable: p(a) da = N(u) du
    double integral = simpson(
        [&](double u) {
            std::vector<double> xi{(u - d.mean[0]) / d.sigma(0)};
            SampledAction s = action_from_noise(d, xi);
            double th = std::tanh(u);
            // density of the squashed action times |da/du|
            return std::exp(s.log_prob) * (1.0 - th * th);
        },
        d.mean[0] - 9.0 * d.sigma(0), d.mean[0] + 9.0 * d.sigma(0), 8193);
    CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("q heads: zeroed critics, composed hand computation, min property") {
    RandomStream rng(109, "qhands");
    NetConfig cfg = tiny_cfg();
    Nets nets = Nets::make(cfg, rng);
    FrameStack s = random_frames(rng, cfg);

    {
        Nets zeroed = nets;
        for (const ParamRef& ref : zeroed.q1.params("q1"))
            for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
        for (const ParamRef& ref : zeroed.q2.params("q2"))
            for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
        auto [q1, q2] = q_values(zeroed, s, {0.5, 0.5});
        CHECK(q1 == 0.0);
        CHECK(q2 == 0.0);
    }
    {
        // independent reimplementation of the trunk arithmetic
        std::vector<double> feat = encode(nets.enc, s);
        std::vector<double> in = feat;
        in.push_back(0.25);
        in.push_back(-0.75);
        auto layer = [](const std::vector<double>& x, const Affine& l, bool activate) {
            std::vector<double> out(static_cast<size_t>(l.w.dim(1)), 0.0);
            for (int j = 0; j < l.w.dim(1); ++j) {
                double acc = l.b[j];
                for (int i = 0; i < l.w.dim(0); ++i)
                    acc += x[static_cast<size_t>(i)] * l.w[static_cast<long long>(i) * l.w.dim(1) + j];
                out[static_cast<size_t>(j)] = activate ? acc / (1.0 + std::exp(-acc)) : acc;
            }
            return out;
        };
        std::vector<double> expect =
            layer(layer(layer(in, nets.q1.l1, true), nets.q1.l2, true), nets.q1.out, false);
        auto [q1, q2] = q_values(nets, s, {0.25, -0.75});
        CHECK(q1 == doctest::Approx(expect[0]).epsilon(1e-12));
        CHECK(std::min(q1, q2) <= q1);
        CHECK(std::min(q1, q2) <= q2);
    }
}

TEST_CASE("target updates blend weights and converge geometrically") {
    RandomStream rng(110, "ema");
    Nets nets = Nets::make(tiny_cfg(), rng);
    TargetNets tgt = TargetNets::make_from(nets);

    SUBCASE("tau = 1 copies the online nets") {
        RandomStream prng(1, "p");
        for (const ParamRef& ref : nets.critic_params())
            for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] += 0.3 * prng.normal();
        ema_update(tgt, nets, 1.0);
        ParamRefs a = tgt.enc.params("enc"), b = nets.enc.params("enc");
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].t->v == b[i].t->v);
    }
    SUBCASE("single weight moves to (1 - tau) * old + tau * online") {
        tgt.q1.out.b[0] = 1.0;
        nets.q1.out.b[0] = 2.0;
        ema_update(tgt, nets, 0.01);
        CHECK(tgt.q1.out.b[0] == doctest::Approx(1.01).epsilon(1e-15));
    }
    SUBCASE("gap shrinks by (1 - tau) per update with a frozen online net") {
        double tau = 0.05;
        tgt.enc.head.w[0] = nets.enc.head.w[0] + 0.5;
        double prev = 0.5;
        for (int i = 0; i < 10; ++i) {
            ema_update(tgt, nets, tau);
            double gap = std::abs(tgt.enc.head.w[0] - nets.enc.head.w[0]);
            CHECK(gap == doctest::Approx(prev * (1.0 - tau)).epsilon(1e-12));
            prev = gap;
        }
    }
    SUBCASE("tau outside (0, 1] is rejected") {
        CHECK_THROWS_AS(ema_update(tgt, nets, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(ema_update(tgt, nets, 1.5), std::invalid_argument);
    }
}

TEST_CASE("checkpoints round-trip exactly and validate their contents") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "augrl_ckpt_test";
    fs::create_directories(dir);
    std::string path = (dir / "model.ckpt").string();

    RandomStream rng(111, "ckpt");
    Nets nets = Nets::make(tiny_cfg(), rng);
    std::vector<Tensor> orig;
    for (const ParamRef& ref : nets.params()) orig.push_back(*ref.t);
    save_checkpoint(path, nets.params());
    for (const ParamRef& ref : nets.params())
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = -7.0;
    load_checkpoint(path, nets.params());
    size_t k = 0;
    for (const ParamRef& ref : nets.params()) CHECK(ref.t->v == orig[k++].v);

    ParamRefs extra = nets.params();
    Tensor bogus({3});
    extra.push_back({"not_in_file", &bogus});
    CHECK_THROWS_AS(load_checkpoint(path, extra), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string(), nets.params()),
                    std::runtime_error);
}
