#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "augrl/image.hpp"
#include "augrl/rng.hpp"

namespace augrl {

enum class TransformKind { shift, overlay, randconv, rotation, blur };

std::string to_string(TransformKind k);
TransformKind transform_kind_from_string(const std::string& s);

// A parameterized family of image transformations together with its bounds.
// Every family admits an identity parameter; shift and rotation have finite,
// enumerable parameter sets.
struct TransformSpec {
    TransformKind kind = TransformKind::shift;
    int max_pad = 4;            // shift: offsets in [-max_pad, max_pad]^2
    double overlay_beta = 0.5;  // overlay blend weight in [0, 1]
    int kernel_size = 3;        // randconv
    double blur_sigma_min = 0.1;
    double blur_sigma_max = 2.0;

    static TransformSpec shift_spec(int max_pad = 4);
    static TransformSpec overlay_spec(double beta = 0.5);
    static TransformSpec randconv_spec();
    static TransformSpec rotation_spec();
    static TransformSpec blur_spec(double sigma_min = 0.1, double sigma_max = 2.0);
};

// One draw from a transformation family.
//   shift:    integer offsets (dx, dy); content moves by +dx columns, +dy rows
//   overlay:  procedural texture seed + blend weight beta
//   randconv: 3x3 kernel weights, the same kernel for every frame in a stack
//   rotation: quarter turns, angle in {0, 90, 180, 270}
//   blur:     5x5 truncated Gaussian with stddev sigma; sigma = 0 is identity
struct TransformParam {
    TransformKind kind = TransformKind::shift;
    int dx = 0, dy = 0;
    uint64_t texture_seed = 0;
    double beta = 0.0;
    std::array<double, 9> kernel{};
    int angle = 0;
    double sigma = 0.0;

    std::string to_text() const;  // canonical form, e.g. "shift:dx=2,dy=-1"
    static TransformParam from_text(const std::string& text);
};

TransformParam identity_param(const TransformSpec& spec);
bool is_identity(const TransformSpec& spec, const TransformParam& p);
bool param_in_bounds(const TransformSpec& spec, const TransformParam& p);

// Distribution over a family's parameters: an explicit weighted table for
// finite families, or the family's continuous sampler otherwise.
struct ParamDistribution {
    TransformSpec spec;
    std::vector<TransformParam> support;  // empty => continuous sampler
    std::vector<double> weights;          // same length as support, sums to 1

    static ParamDistribution uniform_finite(const TransformSpec& spec);
    static ParamDistribution continuous(const TransformSpec& spec);
    static ParamDistribution point_mass(const TransformSpec& spec, const TransformParam& p);
    static ParamDistribution table(const TransformSpec& spec, std::vector<TransformParam> support,
                                   std::vector<double> weights);
    bool finite() const { return !support.empty(); }
};

// Applies the same parameterized transformation to every frame of the stack.
// Output matches the input shape, pixel values are clamped to [0, 1], and the
// identity parameter reproduces the input bit-exactly. Shifts and blurs use
// replicate-edge padding.
FrameStack apply_transform(const TransformSpec& spec, const TransformParam& p,
                           const FrameStack& x);

std::vector<TransformParam> sample_params(const ParamDistribution& dist, int n, RandomStream& rng);
TransformParam sample_param(const ParamDistribution& dist, RandomStream& rng);

// All parameters of a finite family (81 offsets for shift with max_pad=4,
// the 4 quarter turns for rotation); nullopt for continuous families.
std::optional<std::vector<TransformParam>> enumerate_params(const TransformSpec& spec);

// Finite-difference tangents (T_{p+delta}(x) - T_p(x)) / delta, one per
// parameter axis. Shift has two axes (dx, dy) with a one-pixel step; blur has
// a single sigma axis. A backward difference is used when p+delta leaves the
// parameter bounds. Rotation and the other non-smooth families have no
// tangent axes.
struct TangentAxis {
    std::string name;
    FrameStack vec;
};
int tangent_axis_count(const TransformSpec& spec);
std::vector<TangentAxis> tangent_vectors(const TransformSpec& spec, const TransformParam& p,
                                         const FrameStack& x);
FrameStack tangent_vector(const TransformSpec& spec, const TransformParam& p, int axis,
                          double delta, const FrameStack& x);

// Seeded value-noise texture in [0, 1]; the overlay transform's extra image.
FrameStack make_texture(uint64_t seed, int frames, int h, int w);

// Gaussian blur kernel of the given width (normalized; identity for sigma=0).
std::vector<double> gaussian_kernel(double sigma, int size);

}  // namespace augrl
