#include <doctest.h>

#include <cmath>

#include "augrl/losses.hpp"
#include "augrl/verify.hpp"

using namespace augrl;

namespace {

struct Fixture {
    NetConfig nc;
    Nets nets;
    TargetNets targets;
    LossConfig cfg;
    std::vector<Transition> transitions;
    Batch batch;

    explicit Fixture(uint64_t seed, bool ddpg = false, int batch_size = 3) : nc(), nets(make(seed, ddpg)), targets(TargetNets::make_from(nets)) {
        RandomStream prng(seed, "targets");
        for (const ParamRef& ref : targets.params())
            for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] += 0.05 * prng.normal();
        cfg = LossConfig::defaults();
        cfg.base_algo = ddpg ? BaseAlgo::ddpg : BaseAlgo::sac;
        TransformSpec shift = TransformSpec::shift_spec(2);
        cfg.channels.clear();
        cfg.channels.push_back({shift, ParamDistribution::uniform_finite(shift), 1.0});
        cfg.target_dist = cfg.channels[0].dist;
        cfg.tangent_dist = cfg.channels[0].dist;
        RandomStream erng(seed, "transitions");
        transitions.resize(static_cast<size_t>(batch_size));
        for (Transition& tr : transitions) {
            tr.s = FrameStack(2, 8, 8);
            tr.s2 = FrameStack(2, 8, 8);
            for (double& p : tr.s.pix) p = erng.uniform();
            for (double& p : tr.s2.pix) p = erng.uniform();
            tr.a = {erng.uniform(-1.0, 1.0), erng.uniform(-1.0, 1.0)};
            tr.r = erng.uniform();
            tr.done = false;
        }
        for (Transition& tr : transitions) batch.push_back(&tr);
    }

    static Nets make(uint64_t seed, bool ddpg) {
        NetConfig c;
        c.frames = 2;
        c.height = 8;
        c.width = 8;
        c.channels = 4;
        c.feat_dim = 8;
        c.hidden = 16;
        c.action_dim = 2;
        c.deterministic_actor = ddpg;
        RandomStream rng(seed, "nets");
        return Nets::make(c, rng);
    }

    void point_mass_identity() {
        ParamDistribution pm = ParamDistribution::point_mass(
            cfg.channels[0].spec, identity_param(cfg.channels[0].spec));
        cfg.channels[0].dist = pm;
        cfg.target_dist = pm;
        cfg.tangent_dist = pm;
    }
};

}  // namespace

TEST_CASE("bootstrap target follows r + gamma * (minQ - alpha * log pi)") {
    Fixture fx(201);
    // constant critic heads with value 2 and a standard-normal actor
    for (TargetNets* t = &fx.targets; t; t = nullptr) {
        for (const ParamRef& ref : t->q1.params("q1"))
            for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
        for (const ParamRef& ref : t->q2.params("q2"))
            for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
        t->q1.out.b[0] = 2.0;
        t->q2.out.b[0] = 2.0;
    }
    for (const ParamRef& ref : fx.nets.actor.params("actor"))
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
    fx.cfg.alpha = 0.1;
    fx.cfg.gamma = 0.99;
    Transition tr = fx.transitions[0];
    tr.r = 1.0;

    std::vector<std::vector<double>> noise{{0.3, -0.8}};
    // zero-weight actor => pre-squash N(0, I); the log-density is analytic
    double logp = 0.0;
    for (double xi : noise[0])
        logp += -0.5 * xi * xi - 0.9189385332046727 - log_one_minus_tanh_sq(xi);
    double y = target_y(tr, fx.targets, fx.nets, fx.cfg, {identity_param(fx.cfg.target_dist.spec)},
                        noise);
    CHECK(y == doctest::Approx(1.0 + 0.99 * (2.0 - 0.1 * logp)).epsilon(1e-12));
    // the worked example: log pi = -1 gives 1 + 0.99 * (2 + 0.1)
    CHECK(1.0 + 0.99 * (2.0 - 0.1 * (-1.0)) == doctest::Approx(3.079).epsilon(1e-12));
}

TEST_CASE("terminal transitions zero the bootstrap term") {
    Fixture fx(202);
    Transition tr = fx.transitions[0];
    tr.done = true;
    tr.r = 0.37;
    std::vector<std::vector<double>> noise{{0.0, 0.0}};
    CHECK(target_y(tr, fx.targets, fx.nets, fx.cfg, {identity_param(fx.cfg.target_dist.spec)},
                   noise) == 0.37);
}

TEST_CASE("averaging identical target terms equals a single draw") {
    // deterministic variant: the target action has no sampling noise at all
    Fixture fx(203, true);
    TransformParam id = identity_param(fx.cfg.target_dist.spec);
    std::vector<std::vector<double>> noise2{{0.4, 0.6}, {-1.2, 0.1}};
    double y2 = target_y(fx.transitions[0], fx.targets, fx.nets, fx.cfg, {id, id}, noise2);
    double y1 = target_y(fx.transitions[0], fx.targets, fx.nets, fx.cfg, {id},
                         {{noise2[0]}});
    CHECK(y2 == doctest::Approx(y1).epsilon(1e-15));

    // stochastic variant collapses as the policy spread vanishes (alpha = 0)
    Fixture sx(204);
    sx.cfg.alpha = 0.0;
    for (const ParamRef& ref : sx.nets.actor.params("actor"))
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
    for (int i = 2; i < 4; ++i) sx.nets.actor.out.b[i] = -40.0;  // log-std -> lower clamp
    double s2 = target_y(sx.transitions[0], sx.targets, sx.nets, sx.cfg, {id, id}, noise2);
    double s1 = target_y(sx.transitions[0], sx.targets, sx.nets, sx.cfg, {id}, {{noise2[0]}});
    CHECK(s2 == doctest::Approx(s1).epsilon(1e-3));
}

TEST_CASE("identity transforms with single draws reproduce the plain losses bit-for-bit") {
    for (bool ddpg : {false, true}) {
        Fixture fx(205 + (ddpg ? 1 : 0), ddpg);
        fx.point_mass_identity();
        fx.cfg.M = fx.cfg.K = fx.cfg.J = 1;
        RandomStream drng(7, "draws");
        CriticDraws cd = draw_critic(fx.cfg, 3, 2, drng);
        ActorDraws ad = draw_actor(fx.cfg, 3, 2, drng);

        for (CriticMode cm : {CriticMode::implicit, CriticMode::explicit_sg, CriticMode::explicit_y,
                              CriticMode::generic}) {
            fx.cfg.critic_mode = cm;
            fx.cfg.alpha_q = 0.0;  // degenerate coefficients
            fx.cfg.alpha_tp = 0.0;
            LossResult res = critic_loss(fx.cfg, fx.nets, fx.targets, fx.batch, cd);
            double plain = vanilla_critic_loss_value(fx.cfg, fx.nets, fx.targets, fx.batch, cd);
            CHECK(res.value == plain);
        }
        for (ActorMode am : {ActorMode::implicit, ActorMode::explicit_kl, ActorMode::kl_aug_target,
                             ActorMode::kl_avg_target, ActorMode::generic}) {
            fx.cfg.actor_mode = am;
            fx.cfg.alpha_pi = 0.0;
            LossResult res = actor_loss(fx.cfg, fx.nets, fx.batch, ad);
            double plain = vanilla_actor_loss_value(fx.cfg, fx.nets, fx.batch, ad);
            CHECK(res.value == plain);
        }
    }
}

TEST_CASE("drq and rad spellings select the averaged-target loss") {
    CHECK(critic_mode_from_string("drq") == CriticMode::implicit);
    CHECK(critic_mode_from_string("rad") == CriticMode::implicit);
    CHECK(actor_mode_from_string("drq") == ActorMode::implicit);
    CHECK_THROWS_AS(critic_mode_from_string("drqq"), std::invalid_argument);
}

TEST_CASE("averaged-target critic loss matches a by-hand evaluation of the same draws") {
    Fixture fx(207);
    fx.cfg.critic_mode = CriticMode::implicit;
    fx.cfg.M = 2;
    fx.cfg.K = 2;
    RandomStream drng(11, "draws");
    CriticDraws cd = draw_critic(fx.cfg, 3, 2, drng);
    LossResult res = critic_loss(fx.cfg, fx.nets, fx.targets, fx.batch, cd);

    double expected = 0.0;
    for (size_t i = 0; i < fx.batch.size(); ++i) {
        std::vector<TransformParam> mu(cd.mu.begin() + static_cast<long long>(i) * 2,
                                       cd.mu.begin() + static_cast<long long>(i + 1) * 2);
        std::vector<std::vector<double>> noise(
            cd.target_noise.begin() + static_cast<long long>(i) * 2,
            cd.target_noise.begin() + static_cast<long long>(i + 1) * 2);
        double y = target_y(*fx.batch[i], fx.targets, fx.nets, fx.cfg, mu, noise);
        for (int m = 0; m < 2; ++m) {
            FrameStack sm = apply_transform(fx.cfg.channels[0].spec, cd.nu[0][i * 2 + static_cast<size_t>(m)],
                                            fx.batch[i]->s);
            auto [q1, q2] = q_values(fx.nets, sm, fx.batch[i]->a);
            expected += ((q1 - y) * (q1 - y) + (q2 - y) * (q2 - y)) / 2.0;
        }
    }
    expected /= static_cast<double>(fx.batch.size());
    CHECK(res.value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("reweighted single-draw loss scales onto the explicit one at the loss API") {
    Fixture fx(208);
    fx.nets.cfg.twin_critics = false;
    fx.targets = TargetNets::make_from(fx.nets);
    double alpha_q = 1.5;
    TransformSpec spec = TransformSpec::shift_spec(1);
    std::vector<TransformParam> support = *enumerate_params(spec);
    std::vector<double> w(support.size(), 1.0 / static_cast<double>(support.size()));
    ParamDistribution nu = ParamDistribution::table(spec, support, w);
    ParamDistribution nu_hat = lemma1_reweighted(nu, alpha_q);

    const Transition& tr = *fx.batch[0];
    std::vector<std::vector<double>> noise{{0.2, -0.5}};
    double y = target_y(tr, fx.targets, fx.nets, fx.cfg, {identity_param(spec)}, noise);

    double implicit_exact = 0.0, explicit_reg = 0.0, base = 0.0;
    for (size_t j = 0; j < support.size(); ++j) {
        auto [q1, q2] = q_values(fx.nets, apply_transform(spec, support[j], tr.s), tr.a);
        (void)q2;
        implicit_exact += nu_hat.weights[j] * (q1 - y) * (q1 - y);
        explicit_reg += nu.weights[j] * (q1 - y) * (q1 - y);
        if (is_identity(spec, support[j])) base = (q1 - y) * (q1 - y);
    }
    double explicit_total = base + alpha_q * explicit_reg;
    CHECK((alpha_q + 1.0) * implicit_exact == doctest::Approx(explicit_total).epsilon(1e-12));
}

TEST_CASE("tangent penalty: constant critics, constant frames, route agreement") {
    Fixture fx(209);
    TransformSpec spec = TransformSpec::shift_spec(2);
    RandomStream prng(31, "psi");
    std::vector<TransformParam> psi =
        sample_params(ParamDistribution::uniform_finite(spec), 3, prng);

    SUBCASE("constant critic gives zero") {
        for (const ParamRef& ref : fx.nets.critic_params())
            for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] = 0.0;
        CHECK(tangent_prop_penalty(fx.nets, fx.transitions[0].s, fx.transitions[0].a, spec, psi) ==
              0.0);
    }
    SUBCASE("constant frames give zero for any critic") {
        FrameStack flat(2, 8, 8);
        for (double& p : flat.pix) p = 0.4;
        CHECK(tangent_prop_penalty(fx.nets, flat, fx.transitions[0].a, spec, psi) == 0.0);
    }
    SUBCASE("directional-derivative route equals the input-gradient route") {
        // independent evaluation with explicit loops
        double expected = 0.0;
        for (const TransformParam& p : psi) {
            FrameStack xt = apply_transform(spec, p, fx.transitions[0].s);
            FrameStack grad = input_gradient(fx.nets, xt, fx.transitions[0].a);
            for (const TangentAxis& ax : tangent_vectors(spec, p, fx.transitions[0].s)) {
                double dot = 0.0;
                for (long long i = 0; i < grad.size(); ++i)
                    dot += grad.pix[static_cast<size_t>(i)] * ax.vec.pix[static_cast<size_t>(i)];
                expected += dot * dot;
            }
        }
        expected /= static_cast<double>(psi.size());
        double got =
            tangent_prop_penalty(fx.nets, fx.transitions[0].s, fx.transitions[0].a, spec, psi);
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));

        // and the on-tape term inside the generic loss agrees with both
        fx.cfg.critic_mode = CriticMode::generic;
        fx.cfg.alpha_tp = 1.0;
        fx.cfg.tangent_draws = static_cast<int>(psi.size());
        Batch one{fx.batch[0]};
        CriticDraws cd;
        cd.nu.assign(1, sample_params(fx.cfg.channels[0].dist, fx.cfg.M, prng));
        cd.mu = sample_params(fx.cfg.target_dist, fx.cfg.K, prng);
        cd.target_noise.assign(static_cast<size_t>(fx.cfg.K), {0.1, 0.2});
        cd.tangent = psi;
        LossResult res = critic_loss(fx.cfg, fx.nets, fx.targets, one, cd);
        CHECK(res.terms.at("tangent_penalty") == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("closed-form KL between diagonal Gaussians") {
    PolicyDistribution p, q;
    p.squash = q.squash = false;
    p.mean = {0.0};
    p.log_std = {0.0};
    q.mean = {0.0};
    q.log_std = {0.0};
    CHECK(kl_diag_gaussian(p, q) == 0.0);

    p.mean = {1.0};
    CHECK(kl_diag_gaussian(p, q) == doctest::Approx(0.5).epsilon(1e-14));

    p.mean = {0.0};
    p.log_std = {std::log(2.0)};
    double expected = -std::log(2.0) + 2.0 - 0.5;
    CHECK(kl_diag_gaussian(p, q) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.80685).epsilon(1e-4));
    // numerical cross-check of the same value
    Gauss1 gp{0.0, 2.0}, gq{0.0, 1.0};
    double quad = simpson([&](double x) { return gp.pdf(x) * (gp.log_pdf(x) - gq.log_pdf(x)); },
                          -24.0, 24.0, 8193);
    CHECK(quad == doctest::Approx(expected).epsilon(1e-6));

    PolicyDistribution r;
    r.squash = false;
    r.mean = {0.0, 0.0};
    r.log_std = {0.0, 0.0};
    CHECK_THROWS_AS(kl_diag_gaussian(p, r), std::invalid_argument);
}

TEST_CASE("averaged policy follows the weighted mean and squared-weight variance") {
    PolicyDistribution a, b;
    a.squash = b.squash = false;
    a.mean = {0.0};
    a.log_std = {0.0};
    b.mean = {2.0};
    b.log_std = {0.0};

    PolicyDistribution single = averaged_policy({{a, 1.0}});
    CHECK(single.mean[0] == 0.0);
    CHECK(single.log_std[0] == 0.0);

    PolicyDistribution same = averaged_policy({{a, 0.5}, {a, 0.5}});
    CHECK(same.mean[0] == 0.0);
    CHECK(std::exp(2.0 * same.log_std[0]) == doctest::Approx(0.5).epsilon(1e-14));

    PolicyDistribution mix = averaged_policy({{a, 0.5}, {b, 0.5}});
    CHECK(mix.mean[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::exp(2.0 * mix.log_std[0]) == doctest::Approx(0.5).epsilon(1e-14));

    CHECK_THROWS_AS(averaged_policy({}), std::invalid_argument);
    CHECK_THROWS_AS(averaged_policy({{a, 0.6}, {b, 0.6}}), std::invalid_argument);
}

TEST_CASE("matching eta and mu draws zero the invariance term") {
    Fixture fx(210);
    fx.point_mass_identity();
    fx.cfg.actor_mode = ActorMode::generic;
    fx.cfg.alpha_pi = 0.7;
    RandomStream drng(13, "draws");
    ActorDraws ad = draw_actor(fx.cfg, 3, 2, drng);
    LossResult with_kl = actor_loss(fx.cfg, fx.nets, fx.batch, ad);
    CHECK(with_kl.terms.at("actor_invariance") == doctest::Approx(0.0).epsilon(1e-15));
    fx.cfg.actor_mode = ActorMode::implicit;
    LossResult plain = actor_loss(fx.cfg, fx.nets, fx.batch, ad);
    CHECK(with_kl.value == doctest::Approx(plain.value).epsilon(1e-14));
}

TEST_CASE("per-transform-state targets upper-bound the averaged-policy target") {
    RandomStream rng(214, "bound");
    for (int rep = 0; rep < 50; ++rep) {
        int m = 2 + rng.uniform_int(3);
        std::vector<std::pair<PolicyDistribution, double>> members;
        double total = 0.0;
        std::vector<double> probs;
        for (int i = 0; i < m; ++i) {
            PolicyDistribution d;
            d.squash = false;
            d.mean = {rng.normal()};
            d.log_std = {rng.uniform(-0.8, 0.8)};
            double p = 0.1 + rng.uniform();
            members.emplace_back(d, p);
            probs.push_back(p);
            total += p;
        }
        for (size_t i = 0; i < members.size(); ++i) members[i].second /= total;
        PolicyDistribution mu;
        mu.squash = false;
        mu.mean = {rng.normal()};
        mu.log_std = {rng.uniform(-0.8, 0.8)};
        double expectation = 0.0;
        for (const auto& [d, p] : members) expectation += p * kl_diag_gaussian(d, mu);
        double averaged = kl_diag_gaussian(averaged_policy(members), mu);
        // the gap beyond the parameter-independent log-sigma constant is a sum
        // of two nonnegative terms
        double const_gap = 0.0, p2s2 = 0.0;
        for (size_t i = 0; i < members.size(); ++i) {
            const_gap -= probs[i] / total * members[i].first.log_std[0];
            double s = members[i].first.sigma(0);
            p2s2 += members[i].second * members[i].second * s * s;
        }
        const_gap += 0.5 * std::log(p2s2);
        CHECK(expectation - averaged - const_gap >= -1e-12);
    }
}

TEST_CASE("stop-gradient values pin the loss against target and detached-branch changes") {
    Fixture fx(211);
    fx.cfg.critic_mode = CriticMode::explicit_sg;
    RandomStream drng(17, "draws");
    CriticDraws cd = draw_critic(fx.cfg, 3, 2, drng);
    CriticSg sg = critic_sg(fx.cfg, fx.nets, fx.targets, fx.batch, cd);
    LossResult before = critic_loss(fx.cfg, fx.nets, fx.targets, fx.batch, cd, &sg);
    // perturbing target weights must not touch anything once sg is fixed
    for (const ParamRef& ref : fx.targets.params())
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] += 1.0;
    LossResult after = critic_loss(fx.cfg, fx.nets, fx.targets, fx.batch, cd, &sg);
    CHECK(before.value == after.value);
    for (const auto& [name, g] : before.grads) CHECK(g.v == after.grads.at(name).v);

    // the actor loss never reads target networks at all
    fx.cfg.actor_mode = ActorMode::kl_aug_target;
    ActorDraws ad = draw_actor(fx.cfg, 3, 2, drng);
    LossResult a1 = actor_loss(fx.cfg, fx.nets, fx.batch, ad);
    for (const ParamRef& ref : fx.targets.params())
        for (long long i = 0; i < ref.t->size(); ++i) (*ref.t)[i] -= 2.0;
    LossResult a2 = actor_loss(fx.cfg, fx.nets, fx.batch, ad);
    CHECK(a1.value == a2.value);
    for (const auto& [name, g] : a1.grads) CHECK(g.v == a2.grads.at(name).v);
}

TEST_CASE("loss calls validate their draw shapes") {
    Fixture fx(212);
    RandomStream drng(19, "draws");
    CriticDraws cd = draw_critic(fx.cfg, 3, 2, drng);
    cd.mu.pop_back();
    CHECK_THROWS_AS(critic_loss(fx.cfg, fx.nets, fx.targets, fx.batch, cd), std::invalid_argument);

    fx.cfg.actor_mode = ActorMode::kl_aug_target;
    ActorDraws ad = draw_actor(fx.cfg, 3, 2, drng);
    ad.eta.clear();
    CHECK_THROWS_AS(actor_loss(fx.cfg, fx.nets, fx.batch, ad), std::invalid_argument);
}
