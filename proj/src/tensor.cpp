#include "augrl/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace augrl {

Tensor::Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
    if (static_cast<long long>(v.size()) != numel(shape))
        throw std::invalid_argument("tensor: data size does not match shape");
}

long long Tensor::numel(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) {
        if (d < 0) throw std::invalid_argument("tensor: negative dimension");
        n *= d;
    }
    return n;
}

Tensor Tensor::full(std::vector<int> s, double c) {
    Tensor t(std::move(s));
    std::fill(t.v.begin(), t.v.end(), c);
    return t;
}

Tensor Tensor::scalar(double c) {
    Tensor t(std::vector<int>{});
    t.v.assign(1, c);
    return t;
}

double Tensor::item() const {
    if (v.size() != 1) throw std::logic_error("tensor: item() on non-scalar");
    return v[0];
}

Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::g(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_init) {
        n.grad = Tensor::zeros(n.value.shape);
        n.grad_init = true;
    }
    return n.grad;
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
        throw std::logic_error("tape: invalid var");
    return nodes_[static_cast<size_t>(v.id)];
}

const Tensor& Tape::val(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad_init) return n.grad;
    zero_scratch_ = Tensor::zeros(n.value.shape);
    return zero_scratch_;
}

Var Tape::input(Tensor value) { return push(std::move(value), true, nullptr); }
Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

void Tape::backward(Var root) {
    const Node& r = node(root);
    if (r.value.size() != 1) throw std::logic_error("tape: backward root must be scalar");
    g(root.id)[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.needs_grad && n.grad_init && n.back) n.back(*this);
    }
}

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string("tape: shape mismatch in ") + op);
}
}  // namespace

template <typename FwdFn, typename BwdFn>
Var Tape::unary(Var a, FwdFn fwd, BwdFn dfdx) {
    const Tensor& x = val(a);
    Tensor y(x.shape);
    for (long long i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    bool ng = node(a).needs_grad;
    int aid = a.id, n = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (ng)
        back = [aid, n, dfdx](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(n)].grad;
            const Tensor& x = t.nodes_[static_cast<size_t>(aid)].value;
            const Tensor& y = t.nodes_[static_cast<size_t>(n)].value;
            Tensor& ga = t.g(aid);
            for (long long i = 0; i < x.size(); ++i) ga[i] += go[i] * dfdx(x[i], y[i]);
        };
    return push(std::move(y), ng, std::move(back));
}

Var Tape::add(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    check_same_shape(x, y, "add");
    Tensor out(x.shape);
    for (long long i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    bool na = node(a).needs_grad, nb = node(b).needs_grad;
    int aid = a.id, bid = b.id, n = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na || nb)
        back = [aid, bid, n, na, nb](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(n)].grad;
            if (na) {
                Tensor& ga = t.g(aid);
                for (long long i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (nb) {
                Tensor& gb = t.g(bid);
                for (long long i = 0; i < go.size(); ++i) gb[i] += go[i];
            }
        };
    return push(std::move(out), na || nb, std::move(back));
}

Var Tape::sub(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    check_same_shape(x, y, "sub");
    Tensor out(x.shape);
    for (long long i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    bool na = node(a).needs_grad, nb = node(b).needs_grad;
    int aid = a.id, bid = b.id, n = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na || nb)
        back = [aid, bid, n, na, nb](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(n)].grad;
            if (na) {
                Tensor& ga = t.g(aid);
                for (long long i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (nb) {
                Tensor& gb = t.g(bid);
                for (long long i = 0; i < go.size(); ++i) gb[i] -= go[i];
            }
        };
    return push(std::move(out), na || nb, std::move(back));
}

Var Tape::mul(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    check_same_shape(x, y, "mul");
    Tensor out(x.shape);
    for (long long i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    bool na = node(a).needs_grad, nb = node(b).needs_grad;
    int aid = a.id, bid = b.id, n = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na || nb)
        back = [aid, bid, n, na, nb](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(n)].grad;
            const Tensor& x = t.nodes_[static_cast<size_t>(aid)].value;
            const Tensor& y = t.nodes_[static_cast<size_t>(bid)].value;
            if (na) {
                Tensor& ga = t.g(aid);
                for (long long i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i];
            }
            if (nb) {
                Tensor& gb = t.g(bid);
                for (long long i = 0; i < go.size(); ++i) gb[i] += go[i] * x[i];
            }
        };
    return push(std::move(out), na || nb, std::move(back));
}

Var Tape::div(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    check_same_shape(x, y, "div");
    Tensor out(x.shape);
    for (long long i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
    bool na = node(a).needs_grad, nb = node(b).needs_grad;
    int aid = a.id, bid = b.id, n = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na || nb)
        back = [aid, bid, n, na, nb](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(n)].grad;
            const Tensor& x = t.nodes_[static_cast<size_t>(aid)].value;
            const Tensor& y = t.nodes_[static_cast<size_t>(bid)].value;
            if (na) {
                Tensor& ga = t.g(aid);
                for (long long i = 0; i < go.size(); ++i) ga[i] += go[i] / y[i];
            }
            if (nb) {
                Tensor& gb = t.g(bid);
                for (long long i = 0; i < go.size(); ++i) gb[i] -= go[i] * x[i] / (y[i] * y[i]);
            }
        };
    return push(std::move(out), na || nb, std::move(back));
}

Var Tape::neg(Var a) {
    return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var Tape::scale(Var a, double c) {
    return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var Tape::add_scalar(Var a, double c) {
    return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var Tape::square(Var a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var Tape::tanh_(Var a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

namespace {
inline double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
}

Var Tape::silu(Var a) {
    auto fwd = [](double x) { return x * sigmoid(x); };
    auto bwd = [](double x, double) {
        double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    };
    return unary(a, fwd, bwd);
}

Var Tape::silu_deriv(Var a) {
    auto fwd = [](double x) {
        double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    };
    auto bwd = [](double x, double) {
        double s = sigmoid(x);
        return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s));
    };
    return unary(a, fwd, bwd);
}

Var Tape::exp_(Var a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var Tape::log_(Var a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var Tape::sqrt_(Var a) {
    return unary(a, [](double x) { return std::sqrt(x); },
                 [](double, double y) { return 0.5 / y; });
}

Var Tape::softplus(Var a) {
    auto fwd = [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); };
    auto bwd = [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); };
    return unary(a, fwd, bwd);
}

Var Tape::clamp(Var a, double lo, double hi) {
    auto fwd = [lo, hi](double x) { return std::min(std::max(x, lo), hi); };
    auto bwd = [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; };
    return unary(a, fwd, bwd);
}

Var Tape::min2(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    check_same_shape(x, y, "min2");
    Tensor out(x.shape);
    for (long long i = 0; i < x.size(); ++i) out[i] = x[i] <= y[i] ? x[i] : y[i];
    bool na = node(a).needs_grad, nb = node(b).needs_grad;
    int aid = a.id, bid = b.id, n = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na || nb)
        back = [aid, bid, n, na, nb](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(n)].grad;
            const Tensor& x = t.nodes_[static_cast<size_t>(aid)].value;
            const Tensor& y = t.nodes_[static_cast<size_t>(bid)].value;
            for (long long i = 0; i < go.size(); ++i) {
                if (x[i] <= y[i]) {
                    if (na) t.g(aid)[i] += go[i];
                } else {
                    if (nb) t.g(bid)[i] += go[i];
                }
            }
        };
    return push(std::move(out), na || nb, std::move(back));
}

Var Tape::affine(Var xv, Var wv, Var bv) {
    const Tensor& x = val(xv);
    const Tensor& w = val(wv);
    if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(0))
        throw std::invalid_argument("tape: affine shape mismatch");
    int n = x.dim(0), p = x.dim(1), q = w.dim(1);
    const Tensor* b = bv.valid() ? &val(bv) : nullptr;
    if (b && (b->ndim() != 1 || b->dim(0) != q))
        throw std::invalid_argument("tape: affine bias shape mismatch");
    Tensor out({n, q});
    for (int i = 0; i < n; ++i) {
        double* o = &out.v[static_cast<size_t>(i) * q];
        if (b)
            for (int j = 0; j < q; ++j) o[j] = b->v[static_cast<size_t>(j)];
        const double* xi = &x.v[static_cast<size_t>(i) * p];
        for (int k = 0; k < p; ++k) {
            double xk = xi[k];
            const double* wk = &w.v[static_cast<size_t>(k) * q];
            for (int j = 0; j < q; ++j) o[j] += xk * wk[j];
        }
    }
    bool nx = node(xv).needs_grad, nw = node(wv).needs_grad;
    bool nb = bv.valid() && node(bv).needs_grad;
    int xid = xv.id, wid = wv.id, bid = bv.valid() ? bv.id : -1;
    int nid = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (nx || nw || nb)
        back = [=](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(nid)].grad;
            const Tensor& x = t.nodes_[static_cast<size_t>(xid)].value;
            const Tensor& w = t.nodes_[static_cast<size_t>(wid)].value;
            if (nx) {
                Tensor& gx = t.g(xid);
                for (int i = 0; i < n; ++i) {
                    const double* gi = &go.v[static_cast<size_t>(i) * q];
                    double* gxi = &gx.v[static_cast<size_t>(i) * p];
                    for (int k = 0; k < p; ++k) {
                        const double* wk = &w.v[static_cast<size_t>(k) * q];
                        double acc = 0.0;
                        for (int j = 0; j < q; ++j) acc += gi[j] * wk[j];
                        gxi[k] += acc;
                    }
                }
            }
            if (nw) {
                Tensor& gw = t.g(wid);
                for (int i = 0; i < n; ++i) {
                    const double* gi = &go.v[static_cast<size_t>(i) * q];
                    const double* xi = &x.v[static_cast<size_t>(i) * p];
                    for (int k = 0; k < p; ++k) {
                        double xk = xi[k];
                        double* gwk = &gw.v[static_cast<size_t>(k) * q];
                        for (int j = 0; j < q; ++j) gwk[j] += xk * gi[j];
                    }
                }
            }
            if (nb) {
                Tensor& gb = t.g(bid);
                for (int i = 0; i < n; ++i) {
                    const double* gi = &go.v[static_cast<size_t>(i) * q];
                    for (int j = 0; j < q; ++j) gb[j] += gi[j];
                }
            }
        };
    return push(std::move(out), nx || nw || nb, std::move(back));
}

namespace {

// column matrix of one image: rows indexed by (c, ky, kx), columns by output
// position; zeros where the receptive field leaves the input
void im2col(const double* x, int C, int H, int W, int KH, int KW, int OH, int OW, int stride,
            int pad, double* cols) {
    size_t col_w = static_cast<size_t>(OH) * OW;
    for (int c = 0; c < C; ++c) {
        const double* plane = x + static_cast<size_t>(c) * H * W;
        for (int ky = 0; ky < KH; ++ky)
            for (int kx = 0; kx < KW; ++kx) {
                double* row = cols + ((static_cast<size_t>(c) * KH + ky) * KW + kx) * col_w;
                for (int oy = 0; oy < OH; ++oy) {
                    int iy = oy * stride - pad + ky;
                    double* dst = row + static_cast<size_t>(oy) * OW;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + OW, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<size_t>(iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        int ix = ox * stride - pad + kx;
                        dst[ox] = (ix < 0 || ix >= W) ? 0.0 : src[ix];
                    }
                }
            }
    }
}

void col2im_add(const double* cols, int C, int H, int W, int KH, int KW, int OH, int OW,
                int stride, int pad, double* gx) {
    size_t col_w = static_cast<size_t>(OH) * OW;
    for (int c = 0; c < C; ++c) {
        double* plane = gx + static_cast<size_t>(c) * H * W;
        for (int ky = 0; ky < KH; ++ky)
            for (int kx = 0; kx < KW; ++kx) {
                const double* row = cols + ((static_cast<size_t>(c) * KH + ky) * KW + kx) * col_w;
                for (int oy = 0; oy < OH; ++oy) {
                    int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    double* dst = plane + static_cast<size_t>(iy) * W;
                    const double* src = row + static_cast<size_t>(oy) * OW;
                    for (int ox = 0; ox < OW; ++ox) {
                        int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
    }
}

// C[m,n] (+)= A[m,k] * B[k,n]
void matmul_acc(const double* A, const double* B, double* C, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        double* ci = C + static_cast<size_t>(i) * n;
        if (!accumulate) std::fill(ci, ci + n, 0.0);
        const double* ai = A + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            double a = ai[p];
            if (a == 0.0) continue;
            const double* bp = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += a * bp[j];
        }
    }
}

// C[k,n] += A^T[k,m] * B[m,n] where A is [m,k]
void matmul_at_b_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        const double* bi = B + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double a = ai[p];
            if (a == 0.0) continue;
            double* cp = C + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) cp[j] += a * bi[j];
        }
    }
}

// C[m,n] += A[m,k] * B^T[k,n] where B is [n,k]
void matmul_a_bt_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        double* ci = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = B + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

}  // namespace

Var Tape::conv2d(Var xv, Var wv, Var bv, int stride, int pad) {
    const Tensor& x = val(xv);
    const Tensor& w = val(wv);
    if (x.ndim() != 4 || w.ndim() != 4 || x.dim(1) != w.dim(1))
        throw std::invalid_argument("tape: conv2d shape mismatch");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int O = w.dim(0), KH = w.dim(2), KW = w.dim(3);
    int OH = (H + 2 * pad - KH) / stride + 1;
    int OW = (W + 2 * pad - KW) / stride + 1;
    const Tensor* b = bv.valid() ? &val(bv) : nullptr;
    if (b && (b->ndim() != 1 || b->dim(0) != O))
        throw std::invalid_argument("tape: conv2d bias shape mismatch");

    int ckk = C * KH * KW;
    size_t col_w = static_cast<size_t>(OH) * OW;
    Tensor out({N, O, OH, OW});
    std::vector<double> cols(static_cast<size_t>(ckk) * col_w);
    for (int n = 0; n < N; ++n) {
        im2col(&x.v[static_cast<size_t>(n) * C * H * W], C, H, W, KH, KW, OH, OW, stride, pad,
               cols.data());
        double* y = &out.v[static_cast<size_t>(n) * O * col_w];
        matmul_acc(w.v.data(), cols.data(), y, O, ckk, static_cast<int>(col_w), false);
        if (b)
            for (int o = 0; o < O; ++o) {
                double bias = b->v[static_cast<size_t>(o)];
                double* yo = y + static_cast<size_t>(o) * col_w;
                for (size_t j = 0; j < col_w; ++j) yo[j] += bias;
            }
    }

    bool nx = node(xv).needs_grad, nw = node(wv).needs_grad;
    bool nb = bv.valid() && node(bv).needs_grad;
    int xid = xv.id, wid = wv.id, bid = bv.valid() ? bv.id : -1;
    int nid = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (nx || nw || nb)
        back = [=](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(nid)].grad;
            const Tensor& x = t.nodes_[static_cast<size_t>(xid)].value;
            const Tensor& w = t.nodes_[static_cast<size_t>(wid)].value;
            Tensor* gx = nx ? &t.g(xid) : nullptr;
            Tensor* gw = nw ? &t.g(wid) : nullptr;
            Tensor* gb = nb ? &t.g(bid) : nullptr;
            size_t col_w2 = static_cast<size_t>(OH) * OW;
            std::vector<double> cols(static_cast<size_t>(ckk) * col_w2);
            std::vector<double> dcols(static_cast<size_t>(ckk) * col_w2);
            for (int n = 0; n < N; ++n) {
                const double* dy = &go.v[static_cast<size_t>(n) * O * col_w2];
                if (gb)
                    for (int o = 0; o < O; ++o) {
                        const double* dyo = dy + static_cast<size_t>(o) * col_w2;
                        double acc = 0.0;
                        for (size_t j = 0; j < col_w2; ++j) acc += dyo[j];
                        gb->v[static_cast<size_t>(o)] += acc;
                    }
                if (gw) {
                    im2col(&x.v[static_cast<size_t>(n) * C * H * W], C, H, W, KH, KW, OH, OW,
                           stride, pad, cols.data());
                    // dW [O, ckk] += dY [O, col_w] * cols^T [col_w, ckk]
                    matmul_a_bt_acc(dy, cols.data(), gw->v.data(), O, static_cast<int>(col_w2), ckk);
                }
                if (gx) {
                    std::fill(dcols.begin(), dcols.end(), 0.0);
                    // dcols [ckk, col_w] = W^T [ckk, O] * dY [O, col_w]
                    matmul_at_b_acc(w.v.data(), dy, dcols.data(), O, ckk, static_cast<int>(col_w2));
                    col2im_add(dcols.data(), C, H, W, KH, KW, OH, OW, stride, pad,
                               &gx->v[static_cast<size_t>(n) * C * H * W]);
                }
            }
        };
    return push(std::move(out), nx || nw || nb, std::move(back));
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& x = val(a);
    const Tensor& y = val(b);
    if (x.ndim() != 2 || y.ndim() != 2 || x.dim(0) != y.dim(0))
        throw std::invalid_argument("tape: concat_cols shape mismatch");
    int n = x.dim(0), p = x.dim(1), q = y.dim(1);
    Tensor out({n, p + q});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) out.v[static_cast<size_t>(i) * (p + q) + j] = x.v[static_cast<size_t>(i) * p + j];
        for (int j = 0; j < q; ++j) out.v[static_cast<size_t>(i) * (p + q) + p + j] = y.v[static_cast<size_t>(i) * q + j];
    }
    bool na = node(a).needs_grad, nb = node(b).needs_grad;
    int aid = a.id, bid = b.id, nid = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na || nb)
        back = [=](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(nid)].grad;
            if (na) {
                Tensor& ga = t.g(aid);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < p; ++j)
                        ga.v[static_cast<size_t>(i) * p + j] += go.v[static_cast<size_t>(i) * (p + q) + j];
            }
            if (nb) {
                Tensor& gb = t.g(bid);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < q; ++j)
                        gb.v[static_cast<size_t>(i) * q + j] += go.v[static_cast<size_t>(i) * (p + q) + p + j];
            }
        };
    return push(std::move(out), na || nb, std::move(back));
}

Var Tape::slice_cols(Var a, int c0, int c1) {
    const Tensor& x = val(a);
    if (x.ndim() != 2 || c0 < 0 || c1 > x.dim(1) || c0 >= c1)
        throw std::invalid_argument("tape: slice_cols out of range");
    int n = x.dim(0), m = x.dim(1), w = c1 - c0;
    Tensor out({n, w});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j)
            out.v[static_cast<size_t>(i) * w + j] = x.v[static_cast<size_t>(i) * m + c0 + j];
    bool na = node(a).needs_grad;
    int aid = a.id, nid = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na)
        back = [=](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(nid)].grad;
            Tensor& ga = t.g(aid);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j)
                    ga.v[static_cast<size_t>(i) * m + c0 + j] += go.v[static_cast<size_t>(i) * w + j];
        };
    return push(std::move(out), na, std::move(back));
}

Var Tape::gather_rows(Var a, std::vector<int> index) {
    const Tensor& x = val(a);
    if (x.ndim() != 2) throw std::invalid_argument("tape: gather_rows wants a matrix");
    int n = x.dim(0), m = x.dim(1);
    int r = static_cast<int>(index.size());
    Tensor out({r, m});
    for (int i = 0; i < r; ++i) {
        int src = index[static_cast<size_t>(i)];
        if (src < 0 || src >= n) throw std::invalid_argument("tape: gather_rows index out of range");
        std::copy_n(&x.v[static_cast<size_t>(src) * m], m, &out.v[static_cast<size_t>(i) * m]);
    }
    bool na = node(a).needs_grad;
    int aid = a.id, nid = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na)
        back = [aid, nid, m, idx = std::move(index)](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(nid)].grad;
            Tensor& ga = t.g(aid);
            for (size_t i = 0; i < idx.size(); ++i)
                for (int j = 0; j < m; ++j)
                    ga.v[static_cast<size_t>(idx[i]) * m + j] += go.v[i * static_cast<size_t>(m) + j];
        };
    return push(std::move(out), na, std::move(back));
}

Var Tape::reshape(Var a, std::vector<int> shape) {
    const Tensor& x = val(a);
    if (Tensor::numel(shape) != x.size()) throw std::invalid_argument("tape: reshape size mismatch");
    Tensor out(shape, x.v);
    bool na = node(a).needs_grad;
    int aid = a.id, nid = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na)
        back = [aid, nid](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(nid)].grad;
            Tensor& ga = t.g(aid);
            for (long long i = 0; i < go.size(); ++i) ga[i] += go[i];
        };
    return push(std::move(out), na, std::move(back));
}

Var Tape::row_sum(Var a) {
    const Tensor& x = val(a);
    if (x.ndim() != 2) throw std::invalid_argument("tape: row_sum wants a matrix");
    int n = x.dim(0), m = x.dim(1);
    Tensor out({n, 1});
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += x.v[static_cast<size_t>(i) * m + j];
        out.v[static_cast<size_t>(i)] = acc;
    }
    bool na = node(a).needs_grad;
    int aid = a.id, nid = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na)
        back = [=](Tape& t) {
            const Tensor& go = t.nodes_[static_cast<size_t>(nid)].grad;
            Tensor& ga = t.g(aid);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) ga.v[static_cast<size_t>(i) * m + j] += go.v[static_cast<size_t>(i)];
        };
    return push(std::move(out), na, std::move(back));
}

Var Tape::sum_all(Var a) {
    const Tensor& x = val(a);
    double acc = 0.0;
    for (long long i = 0; i < x.size(); ++i) acc += x[i];
    bool na = node(a).needs_grad;
    int aid = a.id, nid = static_cast<int>(nodes_.size());
    std::function<void(Tape&)> back;
    if (na)
        back = [aid, nid](Tape& t) {
            double go = t.nodes_[static_cast<size_t>(nid)].grad[0];
            Tensor& ga = t.g(aid);
            for (long long i = 0; i < ga.size(); ++i) ga[i] += go;
        };
    return push(Tensor::scalar(acc), na, std::move(back));
}

Var Tape::mean_all(Var a) {
    long long n = val(a).size();
    return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Var Tape::detach(Var a) { return constant(val(a)); }

Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x,
                         double step) {
    Tensor g(x.shape);
    Tensor xp = x;
    for (long long i = 0; i < x.size(); ++i) {
        double h = step * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + h;
        double fp = f(xp);
        xp[i] = x[i] - h;
        double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double max_relative_error(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_relative_error: shape mismatch");
    double worst = 0.0;
    for (long long i = 0; i < a.size(); ++i) {
        double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace augrl
