#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace augrl {

// Dense row-major double tensor. Small enough on purpose: everything in this
// project fits in a handful of megabytes.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(numel(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> data);

    static long long numel(const std::vector<int>& s);
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double c);
    static Tensor scalar(double c);

    long long size() const { return static_cast<long long>(v.size()); }
    int dim(int i) const { return shape.at(static_cast<size_t>(i)); }
    int ndim() const { return static_cast<int>(shape.size()); }
    double& operator[](long long i) { return v[static_cast<size_t>(i)]; }
    double operator[](long long i) const { return v[static_cast<size_t>(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    double item() const;
};

// Handle into a Tape. Default-constructed handles are invalid (used e.g. for
// convolutions without a bias term).
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Tensor-granular operations. Build a graph with the
// op methods, call backward(root) on a scalar, then read grad() of any
// differentiable leaf or intermediate. Nodes created via constant() (or
// detach()) block gradient flow.
class Tape {
public:
    Var input(Tensor value);     // differentiable leaf
    Var constant(Tensor value);  // gradient-blocking leaf
    Var constant_scalar(double c) { return constant(Tensor::scalar(c)); }

    // elementwise
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var neg(Var a);
    Var scale(Var a, double c);
    Var add_scalar(Var a, double c);
    Var square(Var a);
    Var tanh_(Var a);
    Var silu(Var a);        // x * sigmoid(x)
    Var silu_deriv(Var a);  // d/dx silu(x), itself differentiable
    Var exp_(Var a);
    Var log_(Var a);
    Var sqrt_(Var a);
    Var softplus(Var a);                       // log(1 + exp(x)), overflow-safe
    Var clamp(Var a, double lo, double hi);    // zero gradient outside [lo, hi]
    Var min2(Var a, Var b);                    // elementwise min, ties route to a

    // linear algebra / structure
    Var affine(Var x, Var w, Var b);                     // [n,p]*[p,q] + b[q]
    Var conv2d(Var x, Var w, Var b, int stride, int pad);  // x [N,C,H,W], w [O,C,kh,kw], zero pad
    Var concat_cols(Var a, Var b);                       // [n,p] ++ [n,q] -> [n,p+q]
    Var slice_cols(Var a, int c0, int c1);               // [n,m] -> [n,c1-c0]
    Var gather_rows(Var a, std::vector<int> index);      // out[r] = a[index[r]]
    Var reshape(Var a, std::vector<int> shape);
    Var row_sum(Var a);   // [n,m] -> [n,1]
    Var sum_all(Var a);   // -> scalar
    Var mean_all(Var a);  // -> scalar

    Var detach(Var a);

    void backward(Var root);

    const Tensor& val(Var v) const;
    const Tensor& grad(Var v) const;  // zero tensor if no gradient reached v
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        bool grad_init = false;
        std::function<void(Tape&)> back;  // empty for leaves/constants
    };

    std::vector<Node> nodes_;
    mutable Tensor zero_scratch_;

    Var push(Tensor value, bool needs_grad, std::function<void(Tape&)> back);
    Tensor& g(int id);  // gradient accumulator, lazily zero-initialized
    const Node& node(Var v) const;

    template <typename FwdFn, typename BwdFn>
    Var unary(Var a, FwdFn fwd, BwdFn dfdx);
};

// Central finite-difference gradient of f at x; used by gradient-check tests
// and the verification suites.
Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x,
                         double step = 1e-6);

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
double max_relative_error(const Tensor& a, const Tensor& b);

}  // namespace augrl
