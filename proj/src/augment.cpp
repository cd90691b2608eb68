#include "augrl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace augrl {

std::string to_string(TransformKind k) {
    switch (k) {
        case TransformKind::shift: return "shift";
        case TransformKind::overlay: return "overlay";
        case TransformKind::randconv: return "randconv";
        case TransformKind::rotation: return "rotation";
        case TransformKind::blur: return "blur";
    }
    return "?";
}

TransformKind transform_kind_from_string(const std::string& s) {
    if (s == "shift") return TransformKind::shift;
    if (s == "overlay") return TransformKind::overlay;
    if (s == "randconv") return TransformKind::randconv;
    if (s == "rotation") return TransformKind::rotation;
    if (s == "blur") return TransformKind::blur;
    throw std::invalid_argument("unknown transform kind: " + s);
}

TransformSpec TransformSpec::shift_spec(int max_pad) {
    TransformSpec s;
    s.kind = TransformKind::shift;
    s.max_pad = max_pad;
    return s;
}
TransformSpec TransformSpec::overlay_spec(double beta) {
    TransformSpec s;
    s.kind = TransformKind::overlay;
    s.overlay_beta = beta;
    return s;
}
TransformSpec TransformSpec::randconv_spec() {
    TransformSpec s;
    s.kind = TransformKind::randconv;
    return s;
}
TransformSpec TransformSpec::rotation_spec() {
    TransformSpec s;
    s.kind = TransformKind::rotation;
    return s;
}
TransformSpec TransformSpec::blur_spec(double sigma_min, double sigma_max) {
    TransformSpec s;
    s.kind = TransformKind::blur;
    s.blur_sigma_min = sigma_min;
    s.blur_sigma_max = sigma_max;
    return s;
}

namespace {
std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

std::string TransformParam::to_text() const {
    std::ostringstream os;
    switch (kind) {
        case TransformKind::shift:
            os << "shift:dx=" << dx << ",dy=" << dy;
            break;
        case TransformKind::overlay:
            os << "overlay:seed=" << texture_seed << ",beta=" << fmt_double(beta);
            break;
        case TransformKind::randconv: {
            os << "randconv:";
            for (int i = 0; i < 9; ++i) os << (i ? "," : "") << "w" << i << "=" << fmt_double(kernel[static_cast<size_t>(i)]);
            break;
        }
        case TransformKind::rotation:
            os << "rotation:angle=" << angle;
            break;
        case TransformKind::blur:
            os << "blur:sigma=" << fmt_double(sigma);
            break;
    }
    return os.str();
}

TransformParam TransformParam::from_text(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("param: missing kind prefix in '" + text + "'");
    TransformParam p;
    p.kind = transform_kind_from_string(text.substr(0, colon));
    std::string rest = text.substr(colon + 1);
    std::istringstream fields(rest);
    std::string field;
    while (std::getline(fields, field, ',')) {
        auto eq = field.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("param: bad field '" + field + "'");
        std::string key = field.substr(0, eq);
        std::string value = field.substr(eq + 1);
        try {
            if (key == "dx") p.dx = std::stoi(value);
            else if (key == "dy") p.dy = std::stoi(value);
            else if (key == "seed") p.texture_seed = std::stoull(value);
            else if (key == "beta") p.beta = std::stod(value);
            else if (key == "angle") p.angle = std::stoi(value);
            else if (key == "sigma") p.sigma = std::stod(value);
            else if (key.size() == 2 && key[0] == 'w' && key[1] >= '0' && key[1] <= '8')
                p.kernel[static_cast<size_t>(key[1] - '0')] = std::stod(value);
            else
                throw std::invalid_argument("param: unknown field '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("param: bad value in field '" + field + "'");
        }
    }
    return p;
}

TransformParam identity_param(const TransformSpec& spec) {
    TransformParam p;
    p.kind = spec.kind;
    switch (spec.kind) {
        case TransformKind::shift: p.dx = p.dy = 0; break;
        case TransformKind::overlay: p.beta = 0.0; p.texture_seed = 0; break;
        case TransformKind::randconv:
            p.kernel.fill(0.0);
            p.kernel[4] = 1.0;
            break;
        case TransformKind::rotation: p.angle = 0; break;
        case TransformKind::blur: p.sigma = 0.0; break;
    }
    return p;
}

bool is_identity(const TransformSpec& spec, const TransformParam& p) {
    switch (spec.kind) {
        case TransformKind::shift: return p.dx == 0 && p.dy == 0;
        case TransformKind::overlay: return p.beta == 0.0;
        case TransformKind::randconv: {
            TransformParam id = identity_param(spec);
            return p.kernel == id.kernel;
        }
        case TransformKind::rotation: return p.angle % 360 == 0;
        case TransformKind::blur: return p.sigma == 0.0;
    }
    return false;
}

bool param_in_bounds(const TransformSpec& spec, const TransformParam& p) {
    if (p.kind != spec.kind) return false;
    switch (spec.kind) {
        case TransformKind::shift:
            return std::abs(p.dx) <= spec.max_pad && std::abs(p.dy) <= spec.max_pad;
        case TransformKind::overlay:
            return p.beta >= 0.0 && p.beta <= 1.0;
        case TransformKind::randconv:
            return true;
        case TransformKind::rotation:
            return p.angle == 0 || p.angle == 90 || p.angle == 180 || p.angle == 270;
        case TransformKind::blur:
            return p.sigma == 0.0 || (p.sigma > 0.0 && p.sigma <= spec.blur_sigma_max);
    }
    return false;
}

ParamDistribution ParamDistribution::uniform_finite(const TransformSpec& spec) {
    auto all = enumerate_params(spec);
    if (!all) throw std::invalid_argument("uniform_finite: family is not finite");
    ParamDistribution d;
    d.spec = spec;
    d.support = std::move(*all);
    d.weights.assign(d.support.size(), 1.0 / static_cast<double>(d.support.size()));
    return d;
}

ParamDistribution ParamDistribution::continuous(const TransformSpec& spec) {
    ParamDistribution d;
    d.spec = spec;
    return d;
}

ParamDistribution ParamDistribution::point_mass(const TransformSpec& spec, const TransformParam& p) {
    ParamDistribution d;
    d.spec = spec;
    d.support = {p};
    d.weights = {1.0};
    return d;
}

ParamDistribution ParamDistribution::table(const TransformSpec& spec,
                                           std::vector<TransformParam> support,
                                           std::vector<double> weights) {
    if (support.empty() || support.size() != weights.size())
        throw std::invalid_argument("param table: support/weights mismatch");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("param table: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("param table: weights must sum to 1");
    ParamDistribution d;
    d.spec = spec;
    d.support = std::move(support);
    d.weights = std::move(weights);
    return d;
}

namespace {

inline int clamp_idx(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

FrameStack apply_shift(const TransformParam& p, const FrameStack& x) {
    FrameStack out(x.frames, x.height, x.width);
    for (int f = 0; f < x.frames; ++f)
        for (int y = 0; y < x.height; ++y) {
            int sy = clamp_idx(y - p.dy, x.height);
            for (int c = 0; c < x.width; ++c)
                out.at(f, y, c) = x.at(f, sy, clamp_idx(c - p.dx, x.width));
        }
    return out;
}

FrameStack apply_rotation(const TransformParam& p, const FrameStack& x) {
    int a = ((p.angle % 360) + 360) % 360;
    if (a == 0) return x;
    if ((a == 90 || a == 270) && x.height != x.width)
        throw std::invalid_argument("rotation: quarter turns need square frames");
    FrameStack out(x.frames, x.height, x.width);
    int h = x.height, w = x.width;
    for (int f = 0; f < x.frames; ++f)
        for (int y = 0; y < h; ++y)
            for (int c = 0; c < w; ++c) {
                double v = 0.0;
                if (a == 90) v = x.at(f, c, h - 1 - y);         // counterclockwise
                else if (a == 180) v = x.at(f, h - 1 - y, w - 1 - c);
                else v = x.at(f, w - 1 - c, y);                 // 270
                out.at(f, y, c) = v;
            }
    return out;
}

FrameStack conv_frames(const FrameStack& x, const double* k, int ks) {
    FrameStack out(x.frames, x.height, x.width);
    int r = ks / 2;
    for (int f = 0; f < x.frames; ++f)
        for (int y = 0; y < x.height; ++y)
            for (int c = 0; c < x.width; ++c) {
                double acc = 0.0;
                for (int ky = 0; ky < ks; ++ky) {
                    int sy = clamp_idx(y + ky - r, x.height);
                    for (int kx = 0; kx < ks; ++kx)
                        acc += k[ky * ks + kx] * x.at(f, sy, clamp_idx(c + kx - r, x.width));
                }
                out.at(f, y, c) = acc;
            }
    return out;
}

}  // namespace

FrameStack make_texture(uint64_t seed, int frames, int h, int w) {
    // value noise: a coarse random lattice, bilinearly upsampled
    const int cell = 4;
    int gh = (h + cell - 1) / cell + 1, gw = (w + cell - 1) / cell + 1;
    std::vector<double> lattice(static_cast<size_t>(gh) * gw);
    for (int i = 0; i < gh * gw; ++i)
        lattice[static_cast<size_t>(i)] =
            static_cast<double>(mix64(seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(i) + 1) >> 11) *
            0x1.0p-53;
    FrameStack tex(frames, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
            int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            double ty = fy - y0, tx = fx - x0;
            double v00 = lattice[static_cast<size_t>(y0) * gw + x0];
            double v01 = lattice[static_cast<size_t>(y0) * gw + x0 + 1];
            double v10 = lattice[static_cast<size_t>(y0 + 1) * gw + x0];
            double v11 = lattice[static_cast<size_t>(y0 + 1) * gw + x0 + 1];
            double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
            for (int f = 0; f < frames; ++f) tex.at(f, y, x) = v;
        }
    return tex;
}

std::vector<double> gaussian_kernel(double sigma, int size) {
    std::vector<double> k(static_cast<size_t>(size) * size, 0.0);
    int r = size / 2;
    if (sigma <= 0.0) {
        k[static_cast<size_t>(r) * size + r] = 1.0;
        return k;
    }
    double total = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double d2 = static_cast<double>((y - r) * (y - r) + (x - r) * (x - r));
            double v = std::exp(-d2 / (2.0 * sigma * sigma));
            k[static_cast<size_t>(y) * size + x] = v;
            total += v;
        }
    for (double& v : k) v /= total;
    return k;
}

FrameStack apply_transform(const TransformSpec& spec, const TransformParam& p,
                           const FrameStack& x) {
    if (x.frames <= 0) throw std::invalid_argument("apply_transform: empty frame stack");
    if (!param_in_bounds(spec, p))
        throw std::invalid_argument("apply_transform: parameter outside spec bounds: " + p.to_text());
    if (is_identity(spec, p)) return x;
    FrameStack out;
    switch (spec.kind) {
        case TransformKind::shift:
            out = apply_shift(p, x);
            break;
        case TransformKind::rotation:
            out = apply_rotation(p, x);
            break;
        case TransformKind::overlay: {
            FrameStack tex = make_texture(p.texture_seed, x.frames, x.height, x.width);
            out = x;
            for (long long i = 0; i < x.size(); ++i)
                out.pix[static_cast<size_t>(i)] =
                    (1.0 - p.beta) * x.pix[static_cast<size_t>(i)] + p.beta * tex.pix[static_cast<size_t>(i)];
            break;
        }
        case TransformKind::randconv:
            out = conv_frames(x, p.kernel.data(), 3);
            break;
        case TransformKind::blur: {
            std::vector<double> k = gaussian_kernel(p.sigma, 5);
            out = conv_frames(x, k.data(), 5);
            break;
        }
    }
    out.clamp01();
    return out;
}

TransformParam sample_param(const ParamDistribution& dist, RandomStream& rng) {
    if (dist.finite()) {
        double u = rng.uniform();
        double acc = 0.0;
        for (size_t i = 0; i < dist.support.size(); ++i) {
            acc += dist.weights[i];
            if (u < acc) return dist.support[i];
        }
        return dist.support.back();
    }
    TransformParam p;
    p.kind = dist.spec.kind;
    switch (dist.spec.kind) {
        case TransformKind::overlay:
            p.texture_seed = rng.next_u64();
            p.beta = dist.spec.overlay_beta;
            break;
        case TransformKind::randconv:
            for (double& w : p.kernel) w = rng.normal() / 3.0;  // N(0, 1/9)
            break;
        case TransformKind::blur:
            p.sigma = rng.uniform(dist.spec.blur_sigma_min, dist.spec.blur_sigma_max);
            break;
        default:
            throw std::logic_error("sample_param: finite family without a table");
    }
    return p;
}

std::vector<TransformParam> sample_params(const ParamDistribution& dist, int n, RandomStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_params: n must be >= 1");
    std::vector<TransformParam> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sample_param(dist, rng));
    return out;
}

std::optional<std::vector<TransformParam>> enumerate_params(const TransformSpec& spec) {
    switch (spec.kind) {
        case TransformKind::shift: {
            std::vector<TransformParam> all;
            for (int dy = -spec.max_pad; dy <= spec.max_pad; ++dy)
                for (int dx = -spec.max_pad; dx <= spec.max_pad; ++dx) {
                    TransformParam p;
                    p.kind = TransformKind::shift;
                    p.dx = dx;
                    p.dy = dy;
                    all.push_back(p);
                }
            return all;
        }
        case TransformKind::rotation: {
            std::vector<TransformParam> all;
            for (int a : {0, 90, 180, 270}) {
                TransformParam p;
                p.kind = TransformKind::rotation;
                p.angle = a;
                all.push_back(p);
            }
            return all;
        }
        default:
            return std::nullopt;
    }
}

int tangent_axis_count(const TransformSpec& spec) {
    switch (spec.kind) {
        case TransformKind::shift: return 2;
        case TransformKind::blur: return 1;
        default: return 0;
    }
}

FrameStack tangent_vector(const TransformSpec& spec, const TransformParam& p, int axis,
                          double delta, const FrameStack& x) {
    if (axis < 0 || axis >= tangent_axis_count(spec))
        throw std::invalid_argument("tangent_vector: no such axis for this family");
    TransformParam hi = p;
    double d = delta;
    if (spec.kind == TransformKind::shift) {
        int step = static_cast<int>(delta);
        if (step == 0) throw std::invalid_argument("tangent_vector: shift needs an integer step");
        int* coord = axis == 0 ? &hi.dx : &hi.dy;
        *coord += step;
        if (!param_in_bounds(spec, hi)) {  // backward difference at the boundary
            *coord -= 2 * step;
            d = -delta;
        }
    } else {  // blur
        hi.sigma += delta;
        if (!param_in_bounds(spec, hi)) {
            hi.sigma -= 2.0 * delta;
            d = -delta;
        }
    }
    FrameStack a = apply_transform(spec, p, x);
    FrameStack b = apply_transform(spec, hi, x);
    FrameStack t(x.frames, x.height, x.width);
    for (long long i = 0; i < t.size(); ++i)
        t.pix[static_cast<size_t>(i)] =
            (b.pix[static_cast<size_t>(i)] - a.pix[static_cast<size_t>(i)]) / d;
    return t;
}

std::vector<TangentAxis> tangent_vectors(const TransformSpec& spec, const TransformParam& p,
                                         const FrameStack& x) {
    std::vector<TangentAxis> out;
    if (spec.kind == TransformKind::shift) {
        out.push_back({"dx", tangent_vector(spec, p, 0, 1.0, x)});
        out.push_back({"dy", tangent_vector(spec, p, 1, 1.0, x)});
    } else if (spec.kind == TransformKind::blur) {
        out.push_back({"sigma", tangent_vector(spec, p, 0, 0.05, x)});
    }
    return out;
}

}  // namespace augrl
