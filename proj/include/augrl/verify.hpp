#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "augrl/augment.hpp"
#include "augrl/losses.hpp"

namespace augrl {

struct CheckResult {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double tol = 0.0;
    bool pass = false;
    long long samples = 0;
    std::string note;
};

struct VerificationReport {
    std::string suite;
    std::vector<CheckResult> checks;

    bool pass() const;
    std::string text() const;
    std::string csv(bool header) const;  // suite,check,lhs,rhs,tol,pass
    CheckResult& add(const std::string& name, double lhs, double rhs, double tol, bool ok);
    // convenience: pass iff |lhs - rhs| < tol
    CheckResult& add_residual(const std::string& name, double lhs, double rhs, double tol);
    // pass iff lhs <= rhs + slack
    CheckResult& add_bound(const std::string& name, double lhs, double rhs, double slack);
};

// composite Simpson rule, n odd
double simpson(const std::function<double(double)>& f, double lo, double hi, int n = 4097);

// 1-D Gaussian helpers used across the suites
struct Gauss1 {
    double mean = 0.0;
    double sigma = 1.0;
    double log_pdf(double x) const;
    double pdf(double x) const;
    double entropy() const;
};
double kl_gauss(const Gauss1& p, const Gauss1& q);

// Synthetic state with a payload region driving a small critic and a
// nuisance region only the policy sees; the finite transformation family
// permutes nuisance pixels, so the critic is exactly invariant.
struct InvariantFixture {
    FrameStack base;
    int payload_cols = 6;
    std::vector<FrameStack> states;  // one per transform, index 0 = identity
    std::vector<double> weights;
    ActorNet policy;   // flattened full state -> 1-D Gaussian action
    CriticHead critic;  // payload pixels + action -> scalar
    double alpha = 1.0;

    Gauss1 policy_at(int idx) const;
    std::vector<double> q_grid(int idx, const std::vector<double>& actions) const;
    double q(int idx, double a) const;
    double max_critic_gap() const;  // sup over transforms/actions of |Q(T s, a) - Q(s, a)|
};
InvariantFixture make_invariant_fixture(RandomStream& rng, int n_transforms);

// Appendix-style reweighting that turns the explicit critic loss into the
// implicit one: boosts the identity's probability by (P0*aq + 1)/(aq + 1)
// and scales the rest by aq/(aq + 1).
ParamDistribution lemma1_reweighted(const ParamDistribution& nu, double alpha_q);

// --- verification suites ----------------------------------------------------

VerificationReport check_lemma1(uint64_t seed, int fixtures = 50);
VerificationReport check_drq_equivalence(uint64_t seed, int fixtures = 20);
VerificationReport check_prop1(uint64_t seed, int fixtures = 20);
VerificationReport check_prop2(uint64_t seed, int fixtures = 100, int mc_samples = 2000);
VerificationReport check_prop3(uint64_t seed, int fixtures = 100, int mc_samples = 2000);
VerificationReport check_avg_policy(uint64_t seed, int families = 100);
VerificationReport check_kl_direction(uint64_t seed, int pairs = 60);
VerificationReport check_linear_model(uint64_t seed, int fixtures = 50);
VerificationReport check_bias_ordering(uint64_t seed, int trials = 100);
VerificationReport check_pinsker(uint64_t seed, int pairs = 1000);
VerificationReport check_gradcheck(uint64_t seed, int fixtures = 10);

const std::vector<std::string>& verify_suite_names();
VerificationReport run_suite(const std::string& name, uint64_t seed);  // throws on unknown name
std::vector<VerificationReport> run_all_suites(uint64_t seed, int threads);

}  // namespace augrl
