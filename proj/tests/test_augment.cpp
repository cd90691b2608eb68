#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "augrl/augment.hpp"
#include "augrl/image.hpp"

using namespace augrl;

namespace {

FrameStack random_stack(RandomStream& rng, int c = 3, int h = 8, int w = 8) {
    FrameStack s(c, h, w);
    for (double& p : s.pix) p = rng.uniform();
    return s;
}

std::vector<TransformSpec> all_specs() {
    return {TransformSpec::shift_spec(2), TransformSpec::overlay_spec(0.5),
            TransformSpec::randconv_spec(), TransformSpec::rotation_spec(),
            TransformSpec::blur_spec()};
}

}  // namespace

TEST_CASE("identity parameter is an exact identity for every family") {
    RandomStream rng(11, "identity");
    for (const TransformSpec& spec : all_specs()) {
        for (int rep = 0; rep < 5; ++rep) {
            FrameStack x = random_stack(rng);
            FrameStack y = apply_transform(spec, identity_param(spec), x);
            REQUIRE(y.pix == x.pix);
        }
    }
}

TEST_CASE("shift moves content by +dx columns with replicate padding") {
    FrameStack x(1, 6, 6);
    x.at(0, 3, 3) = 1.0;
    TransformParam p = identity_param(TransformSpec::shift_spec(4));
    p.dx = 2;
    FrameStack y = apply_transform(TransformSpec::shift_spec(4), p, x);
    CHECK(y.at(0, 3, 5) == 1.0);
    CHECK(y.at(0, 3, 3) == 0.0);
    // brute-force index oracle over every pixel
    auto clampi = [](int i, int n) { return std::min(n - 1, std::max(0, i)); };
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c)
            CHECK(y.at(0, r, c) == x.at(0, clampi(r - p.dy, 6), clampi(c - p.dx, 6)));
}

TEST_CASE("half turn reverses both axes") {
    FrameStack x(1, 2, 2);
    x.at(0, 0, 0) = 0.1;
    x.at(0, 0, 1) = 0.2;
    x.at(0, 1, 0) = 0.3;
    x.at(0, 1, 1) = 0.4;
    TransformParam p = identity_param(TransformSpec::rotation_spec());
    p.angle = 180;
    FrameStack y = apply_transform(TransformSpec::rotation_spec(), p, x);
    CHECK(y.at(0, 0, 0) == 0.4);
    CHECK(y.at(0, 0, 1) == 0.3);
    CHECK(y.at(0, 1, 0) == 0.2);
    CHECK(y.at(0, 1, 1) == 0.1);
}

TEST_CASE("quarter turns compose to the identity after four applications") {
    RandomStream rng(3, "rot");
    FrameStack x = random_stack(rng, 2, 6, 6);
    TransformSpec spec = TransformSpec::rotation_spec();
    TransformParam p = identity_param(spec);
    p.angle = 90;
    FrameStack y = x;
    for (int i = 0; i < 4; ++i) y = apply_transform(spec, p, y);
    CHECK(y.pix == x.pix);
}

TEST_CASE("out-of-bounds parameters are rejected") {
    TransformSpec spec = TransformSpec::shift_spec(2);
    TransformParam p = identity_param(spec);
    p.dx = 3;
    FrameStack x(1, 4, 4);
    CHECK_THROWS_AS(apply_transform(spec, p, x), std::invalid_argument);
    TransformParam rot = identity_param(TransformSpec::rotation_spec());
    rot.angle = 45;
    CHECK_THROWS_AS(apply_transform(TransformSpec::rotation_spec(), rot, x), std::invalid_argument);
}

TEST_CASE("sampling: law of large numbers, point mass, determinism") {
    TransformSpec spec = TransformSpec::shift_spec(1);
    TransformParam psi1 = identity_param(spec);
    psi1.dx = 1;
    ParamDistribution d =
        ParamDistribution::table(spec, {identity_param(spec), psi1}, {0.5, 0.5});
    RandomStream rng(5, "lln");
    int n = 100000, id_count = 0;
    for (const TransformParam& p : sample_params(d, n, rng))
        if (is_identity(spec, p)) ++id_count;
    double freq = static_cast<double>(id_count) / n;
    CHECK(std::abs(freq - 0.5) < 0.01);

    ParamDistribution pm = ParamDistribution::point_mass(spec, identity_param(spec));
    RandomStream rng2(5, "pm");
    for (const TransformParam& p : sample_params(pm, 3, rng2)) CHECK(is_identity(spec, p));

    RandomStream a(9, "det"), b(9, "det");
    ParamDistribution cont = ParamDistribution::continuous(TransformSpec::blur_spec());
    std::vector<TransformParam> s1 = sample_params(cont, 50, a);
    std::vector<TransformParam> s2 = sample_params(cont, 50, b);
    for (size_t i = 0; i < s1.size(); ++i) CHECK(s1[i].sigma == s2[i].sigma);
}

TEST_CASE("enumeration counts") {
    auto shift = enumerate_params(TransformSpec::shift_spec(4));
    REQUIRE(shift.has_value());
    CHECK(shift->size() == 81);
    auto rot = enumerate_params(TransformSpec::rotation_spec());
    REQUIRE(rot.has_value());
    CHECK(rot->size() == 4);
    CHECK(!enumerate_params(TransformSpec::blur_spec()).has_value());
    CHECK(!enumerate_params(TransformSpec::overlay_spec()).has_value());
    CHECK(!enumerate_params(TransformSpec::randconv_spec()).has_value());
}

TEST_CASE("tangent vectors: constant frame, impulse, boundary fallback") {
    TransformSpec spec = TransformSpec::shift_spec(4);
    FrameStack flat(1, 6, 6);
    for (double& p : flat.pix) p = 0.7;
    FrameStack t = tangent_vector(spec, identity_param(spec), 0, 1.0, flat);
    for (double v : t.pix) CHECK(v == 0.0);

    FrameStack impulse(1, 6, 6);
    impulse.at(0, 3, 3) = 1.0;
    FrameStack tx = tangent_vector(spec, identity_param(spec), 0, 1.0, impulse);
    CHECK(tx.at(0, 3, 3) == -1.0);
    CHECK(tx.at(0, 3, 4) == 1.0);
    double total = 0.0;
    for (double v : tx.pix) total += std::abs(v);
    CHECK(total == 2.0);

    // at the +max_pad boundary the difference flips backward
    TransformParam edge = identity_param(spec);
    edge.dx = 4;
    FrameStack tb = tangent_vector(spec, edge, 0, 1.0, impulse);
    FrameStack hi = apply_transform(spec, edge, impulse);
    TransformParam lower = edge;
    lower.dx = 3;
    FrameStack lo = apply_transform(spec, lower, impulse);
    for (long long i = 0; i < tb.size(); ++i)
        CHECK(tb.pix[static_cast<size_t>(i)] ==
              doctest::Approx((hi.pix[static_cast<size_t>(i)] - lo.pix[static_cast<size_t>(i)]) / 1.0));
}

TEST_CASE("blur tangent matches the analytic kernel difference on an impulse") {
    TransformSpec spec = TransformSpec::blur_spec();
    TransformParam p = identity_param(spec);
    p.sigma = 0.8;
    double delta = 0.05;
    FrameStack impulse(1, 11, 11);
    impulse.at(0, 5, 5) = 1.0;
    FrameStack t = tangent_vector(spec, p, 0, delta, impulse);
    std::vector<double> k0 = gaussian_kernel(0.8, 5);
    std::vector<double> k1 = gaussian_kernel(0.8 + delta, 5);
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            double expected =
                (k1[static_cast<size_t>((dy + 2) * 5 + dx + 2)] - k0[static_cast<size_t>((dy + 2) * 5 + dx + 2)]) / delta;
            CHECK(t.at(0, 5 + dy, 5 + dx) == doctest::Approx(expected).epsilon(1e-6));
        }
}

TEST_CASE("interior shift composition adds offsets") {
    RandomStream rng(17, "compose");
    TransformSpec spec = TransformSpec::shift_spec(4);
    FrameStack x(1, 12, 12);
    // content away from the border by at least |d1| + |d2|
    for (int r = 4; r < 8; ++r)
        for (int c = 4; c < 8; ++c) x.at(0, r, c) = rng.uniform();
    for (int rep = 0; rep < 20; ++rep) {
        TransformParam p1 = identity_param(spec), p2 = identity_param(spec), sum = identity_param(spec);
        p1.dx = rng.uniform_int(3) - 1;
        p1.dy = rng.uniform_int(3) - 1;
        p2.dx = rng.uniform_int(3) - 1;
        p2.dy = rng.uniform_int(3) - 1;
        sum.dx = p1.dx + p2.dx;
        sum.dy = p1.dy + p2.dy;
        FrameStack seq = apply_transform(spec, p2, apply_transform(spec, p1, x));
        FrameStack direct = apply_transform(spec, sum, x);
        CHECK(seq.pix == direct.pix);
    }
}

TEST_CASE("outputs stay in [0,1] and applications are deterministic") {
    RandomStream rng(23, "range");
    for (const TransformSpec& spec : all_specs()) {
        ParamDistribution dist = enumerate_params(spec)
                                     ? ParamDistribution::uniform_finite(spec)
                                     : ParamDistribution::continuous(spec);
        for (int rep = 0; rep < 10; ++rep) {
            FrameStack x = random_stack(rng);
            TransformParam p = sample_param(dist, rng);
            FrameStack y1 = apply_transform(spec, p, x);
            FrameStack y2 = apply_transform(spec, p, x);
            CHECK(y1.pix == y2.pix);
            for (double v : y1.pix) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }
}

TEST_CASE("parameter text form round-trips") {
    RandomStream rng(29, "text");
    for (const TransformSpec& spec : all_specs()) {
        ParamDistribution dist = enumerate_params(spec)
                                     ? ParamDistribution::uniform_finite(spec)
                                     : ParamDistribution::continuous(spec);
        for (int rep = 0; rep < 10; ++rep) {
            TransformParam p = sample_param(dist, rng);
            TransformParam q = TransformParam::from_text(p.to_text());
            CHECK(q.to_text() == p.to_text());
            FrameStack x = random_stack(rng, 1, 6, 6);
            CHECK(apply_transform(spec, p, x).pix == apply_transform(spec, q, x).pix);
        }
    }
    CHECK(TransformParam::from_text("shift:dx=2,dy=-1").dx == 2);
    CHECK_THROWS_AS(TransformParam::from_text("shift"), std::invalid_argument);
    CHECK_THROWS_AS(TransformParam::from_text("warp:x=1"), std::invalid_argument);
    CHECK_THROWS_AS(TransformParam::from_text("shift:dx=two"), std::invalid_argument);
}

TEST_CASE("textures are deterministic in their seed") {
    FrameStack a = make_texture(42, 2, 16, 16);
    FrameStack b = make_texture(42, 2, 16, 16);
    FrameStack c = make_texture(43, 2, 16, 16);
    CHECK(a.pix == b.pix);
    CHECK(a.pix != c.pix);
    for (double v : a.pix) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("pgm round trip is byte-exact") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "augrl_pgm_test";
    fs::create_directories(dir);
    RandomStream rng(31, "pgm");
    FrameStack x = random_stack(rng, 1, 9, 7);
    std::string p1 = (dir / "a.pgm").string(), p2 = (dir / "b.pgm").string();
    write_pgm(p1, x);
    FrameStack y = read_pgm(p1);
    write_pgm(p2, y);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    std::ofstream bad((dir / "bad.pgm").string(), std::ios::binary);
    bad << "P6\n4 4\n255\n";
    bad.close();
    CHECK_THROWS_AS(read_pgm((dir / "bad.pgm").string()), std::runtime_error);
    CHECK_THROWS_AS(read_pgm((dir / "missing.pgm").string()), std::runtime_error);
}
