#include "hotvae/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace hotvae {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << " x ";
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

namespace {

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value in output");
        }
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

// Flattens all leading axes, leaving the last axis as the column count.
std::pair<std::size_t, std::size_t> as_rows(const Tensor& t, const char* op) {
    if (t.rank() < 1) throw ShapeError(std::string(op) + ": rank >= 1 required, got scalar");
    std::size_t cols = t.dim(t.rank() - 1);
    if (cols == 0) throw ShapeError(std::string(op) + ": empty last axis");
    return {t.size() / cols, cols};
}

} // namespace

// gemm kernels. Loop orders are chosen so that each output element receives
// its k-indexed additions in ascending order, matching a naive (i,j,k)
// triple loop bit-for-bit (the build disables FP contraction).
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = arow[t];
            const double* brow = b + t * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
            crow[j] += acc;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t t = 0; t < k; ++t) {
        const double* arow = a + t * m;
        const double* brow = b + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Tensor -----------------------------------------------------------------

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("Tensor::from: shape " + shape_str(shape) + " expects " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    std::vector<double> data(n);
    for (double& v : data) v = stddev * rng.normal();
    return from(std::move(shape), std::move(data), requires_grad);
}

std::vector<double>& Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_->has_grad()) node_->grad.assign(node_->data.size(), 0.0);
}

double Tensor::value() const {
    if (size() != 1) {
        throw ShapeError("Tensor::value: expected scalar, got shape " + shape_str(shape()));
    }
    return node_->data[0];
}

// Tape -------------------------------------------------------------------

bool Tape::recording(const std::initializer_list<const Tensor*>& inputs) const {
    if (!enabled_) return false;
    for (const Tensor* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

Tensor Tape::make_output(Shape shape, bool requires_grad) {
    Tensor out = Tensor::zeros(std::move(shape), requires_grad);
    return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = make_output({m, n}, recording({&a, &b}));
    gemm_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    check_finite(out, "matmul");
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        push([an, bn, on, m, k, n]() {
            if (!on->has_grad()) return;
            const double* g = on->grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                gemm_nt(g, bn->data.data(), an->grad.data(), m, n, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                gemm_tn(an->data.data(), g, bn->grad.data(), k, m, n);
            }
        });
    }
    return out;
}

Tensor Tape::bmm(const Tensor& a, const Tensor& b, bool trans_b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
        throw ShapeError("bmm: expected rank-3 tensors with equal batch, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
    const std::size_t bk = trans_b ? b.dim(2) : b.dim(1);
    const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
    if (bk != k) {
        throw ShapeError("bmm: inner dimension mismatch " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + (trans_b ? " (trans_b)" : ""));
    }
    Tensor out = make_output({batch, m, n}, recording({&a, &b}));
    for (std::size_t i = 0; i < batch; ++i) {
        const double* ap = a.data().data() + i * m * k;
        const double* bp = b.data().data() + i * k * n;
        double* cp = out.data().data() + i * m * n;
        if (trans_b) gemm_nt(ap, bp, cp, m, k, n);
        else gemm_nn(ap, bp, cp, m, k, n);
    }
    check_finite(out, "bmm");
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        push([an, bn, on, batch, m, k, n, trans_b]() {
            if (!on->has_grad()) return;
            for (std::size_t i = 0; i < batch; ++i) {
                const double* g = on->grad.data() + i * m * n;
                const double* ap = an->data.data() + i * m * k;
                const double* bp = bn->data.data() + i * k * n;
                if (an->requires_grad) {
                    an->ensure_grad();
                    double* ga = an->grad.data() + i * m * k;
                    if (trans_b) gemm_nn(g, bp, ga, m, n, k);
                    else gemm_nt(g, bp, ga, m, n, k);
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    double* gb = bn->grad.data() + i * k * n;
                    if (trans_b) gemm_tn(g, ap, gb, n, m, k);
                    else gemm_tn(ap, g, gb, k, m, n);
                }
            }
        });
    }
    return out;
}

Tensor Tape::linear(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (W.rank() != 2) throw ShapeError("linear: weight must be rank 2, got " + shape_str(W.shape()));
    if (x.rank() != 2 && x.rank() != 3) {
        throw ShapeError("linear: input must be rank 2 or 3, got " + shape_str(x.shape()));
    }
    const std::size_t in = W.dim(1), outw = W.dim(0);
    if (x.dim(x.rank() - 1) != in) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(W.shape()));
    }
    if (b.defined() && (b.rank() != 1 || b.dim(0) != outw)) {
        throw ShapeError("linear: bias " + shape_str(b.shape()) + " incompatible with weight " +
                         shape_str(W.shape()));
    }
    const std::size_t rows = x.size() / in;
    Shape oshape = x.shape();
    oshape.back() = outw;
    Tensor out = make_output(std::move(oshape), recording({&x, &W, &b}));
    if (b.defined()) {
        double* od = out.data().data();
        const double* bd = b.data().data();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < outw; ++j) od[r * outw + j] = bd[j];
        }
    }
    gemm_nt(x.data().data(), W.data().data(), out.data().data(), rows, in, outw);
    check_finite(out, "linear");
    if (out.requires_grad()) {
        auto xn = x.node(), wn = W.node(), on = out.node();
        auto bnode = b.defined() ? b.node() : nullptr;
        push([xn, wn, bnode, on, rows, in, outw]() {
            if (!on->has_grad()) return;
            const double* g = on->grad.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                gemm_nn(g, wn->data.data(), xn->grad.data(), rows, outw, in);
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                gemm_tn(g, xn->data.data(), wn->grad.data(), outw, rows, in);
            }
            if (bnode && bnode->requires_grad) {
                bnode->ensure_grad();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < outw; ++j) bnode->grad[j] += g[r * outw + j];
                }
            }
        });
    }
    return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = make_output(a.shape(), recording({&a, &b}));
    auto& od = out.data();
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
    check_finite(out, "add");
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        push([an, bn, on]() {
            if (!on->has_grad()) return;
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = make_output(a.shape(), recording({&a, &b}));
    auto& od = out.data();
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
    check_finite(out, "sub");
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        push([an, bn, on]() {
            if (!on->has_grad()) return;
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] -= on->grad[i];
            }
        });
    }
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = make_output(a.shape(), recording({&a, &b}));
    auto& od = out.data();
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
    check_finite(out, "mul");
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        push([an, bn, on]() {
            if (!on->has_grad()) return;
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    an->grad[i] += on->grad[i] * bn->data[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    bn->grad[i] += on->grad[i] * an->data[i];
            }
        });
    }
    return out;
}

Tensor Tape::divide(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "divide");
    Tensor out = make_output(a.shape(), recording({&a, &b}));
    auto& od = out.data();
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] / bd[i];
    check_finite(out, "divide");
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        push([an, bn, on]() {
            if (!on->has_grad()) return;
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    an->grad[i] += on->grad[i] / bn->data[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    bn->grad[i] -= on->grad[i] * an->data[i] / (bn->data[i] * bn->data[i]);
            }
        });
    }
    return out;
}

Tensor Tape::add_scalar(const Tensor& x, double c) {
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] + c;
    check_finite(out, "add_scalar");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor Tape::mul_scalar(const Tensor& x, double c) {
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] * c;
    check_finite(out, "mul_scalar");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, c]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i] * c;
        });
    }
    return out;
}

Tensor Tape::relu(const Tensor& x) {
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] > 0.0 ? xd[i] : 0.0;
    check_finite(out, "relu");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (xn->data[i] > 0.0) xn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor Tape::sigmoid(const Tensor& x) {
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) {
        const double v = xd[i];
        od[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                         : std::exp(v) / (1.0 + std::exp(v));
    }
    check_finite(out, "sigmoid");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                const double s = on->data[i];
                xn->grad[i] += on->grad[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

Tensor Tape::exp(const Tensor& x) {
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = std::exp(xd[i]);
    check_finite(out, "exp");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += on->grad[i] * on->data[i];
        });
    }
    return out;
}

Tensor Tape::log(const Tensor& x) {
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = std::log(xd[i]);
    check_finite(out, "log");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += on->grad[i] / xn->data[i];
        });
    }
    return out;
}

Tensor Tape::sqrt(const Tensor& x) {
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = std::sqrt(xd[i]);
    check_finite(out, "sqrt");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += on->grad[i] * 0.5 / on->data[i];
        });
    }
    return out;
}

Tensor Tape::clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw ValueError("clamp: lo must be <= hi");
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t i = 0; i < od.size(); ++i) {
        od[i] = xd[i] < lo ? lo : (xd[i] > hi ? hi : xd[i]);
    }
    check_finite(out, "clamp");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, lo, hi]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (xn->data[i] >= lo && xn->data[i] <= hi) xn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor Tape::softmax_rows(const Tensor& x, const BoolMask* mask) {
    auto [rows, cols] = as_rows(x, "softmax_rows");
    if (mask) {
        if (mask->cols != cols || mask->rows == 0 || rows % mask->rows != 0) {
            throw ShapeError("softmax_rows: mask " + std::to_string(mask->rows) + "x" +
                             std::to_string(mask->cols) + " does not tile input " +
                             shape_str(x.shape()));
        }
    }
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xd.data() + r * cols;
        double* yr = od.data() + r * cols;
        const std::uint8_t* keep = mask ? mask->keep.data() + (r % mask->rows) * cols : nullptr;
        double mx = 0.0;
        bool any = false;
        for (std::size_t j = 0; j < cols; ++j) {
            if (keep && !keep[j]) continue;
            if (!any || xr[j] > mx) mx = xr[j];
            any = true;
        }
        if (!any) throw ValueError("softmax_rows: fully masked row " + std::to_string(r));
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            if (keep && !keep[j]) {
                yr[j] = 0.0;
            } else {
                yr[j] = std::exp(xr[j] - mx);
                sum += yr[j];
            }
        }
        for (std::size_t j = 0; j < cols; ++j) yr[j] /= sum;
    }
    check_finite(out, "softmax_rows");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, rows, cols]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = on->data.data() + r * cols;
                const double* g = on->grad.data() + r * cols;
                double* gx = xn->grad.data() + r * cols;
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += y[j] * g[j];
                for (std::size_t j = 0; j < cols; ++j) gx[j] += y[j] * (g[j] - dot);
            }
        });
    }
    return out;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    auto [rows, d] = as_rows(x, "layer_norm");
    if (gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != d || bias.dim(0) != d) {
        throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " incompatible with input " +
                         shape_str(x.shape()));
    }
    constexpr double eps = 1e-5;
    Tensor out = make_output(x.shape(), recording({&x, &gain, &bias}));
    const auto& xd = x.data();
    auto& od = out.data();
    std::vector<double> xhat(xd.size());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xd.data() + r * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xr[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        double* hr = xhat.data() + r * d;
        double* yr = od.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) {
            hr[j] = (xr[j] - mean) * is;
            yr[j] = gain.data()[j] * hr[j] + bias.data()[j];
        }
    }
    check_finite(out, "layer_norm");
    if (out.requires_grad()) {
        auto xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node();
        push([xn, gn, bn, on, rows, d, xhat = std::move(xhat),
              inv_std = std::move(inv_std)]() {
            if (!on->has_grad()) return;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* g = on->grad.data() + r * d;
                const double* h = xhat.data() + r * d;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (std::size_t j = 0; j < d; ++j) gn->grad[j] += g[j] * h[j];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (std::size_t j = 0; j < d; ++j) bn->grad[j] += g[j];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    double* gx = xn->grad.data() + r * d;
                    double mean_gg = 0.0, mean_ggh = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double gg = g[j] * gn->data[j];
                        mean_gg += gg;
                        mean_ggh += gg * h[j];
                    }
                    mean_gg /= static_cast<double>(d);
                    mean_ggh /= static_cast<double>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const double gg = g[j] * gn->data[j];
                        gx[j] += (gg - mean_gg - h[j] * mean_ggh) * inv_std[r];
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::dropout(const Tensor& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ValueError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return x;
    const double scale = 1.0 / (1.0 - rate);
    Tensor out = make_output(x.shape(), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    std::vector<double> mask(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) {
        mask[i] = rng.bernoulli(rate) ? 0.0 : scale;
        od[i] = xd[i] * mask[i];
    }
    check_finite(out, "dropout");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, mask = std::move(mask)]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                xn->grad[i] += on->grad[i] * mask[i];
        });
    }
    return out;
}

Tensor Tape::reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
    }
    Tensor out = make_output(std::move(shape), recording({&x}));
    out.data() = x.data();
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor Tape::split_heads(const Tensor& x, std::size_t h) {
    if (x.rank() != 3 || h == 0 || x.dim(2) % h != 0) {
        throw ShapeError("split_heads: input " + shape_str(x.shape()) +
                         " not splittable into " + std::to_string(h) + " heads");
    }
    const std::size_t b = x.dim(0), r = x.dim(1), d = x.dim(2), dh = d / h;
    Tensor out = make_output({b * h, r, dh}, recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t hi = 0; hi < h; ++hi) {
            for (std::size_t ri = 0; ri < r; ++ri) {
                const double* src = xd.data() + (bi * r + ri) * d + hi * dh;
                double* dst = od.data() + ((bi * h + hi) * r + ri) * dh;
                for (std::size_t c = 0; c < dh; ++c) dst[c] = src[c];
            }
        }
    }
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, b, r, d, h, dh]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t bi = 0; bi < b; ++bi) {
                for (std::size_t hi = 0; hi < h; ++hi) {
                    for (std::size_t ri = 0; ri < r; ++ri) {
                        double* dst = xn->grad.data() + (bi * r + ri) * d + hi * dh;
                        const double* src = on->grad.data() + ((bi * h + hi) * r + ri) * dh;
                        for (std::size_t c = 0; c < dh; ++c) dst[c] += src[c];
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::merge_heads(const Tensor& x, std::size_t h) {
    if (x.rank() != 3 || h == 0 || x.dim(0) % h != 0) {
        throw ShapeError("merge_heads: input " + shape_str(x.shape()) +
                         " not mergeable from " + std::to_string(h) + " heads");
    }
    const std::size_t b = x.dim(0) / h, r = x.dim(1), dh = x.dim(2), d = dh * h;
    Tensor out = make_output({b, r, d}, recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t hi = 0; hi < h; ++hi) {
            for (std::size_t ri = 0; ri < r; ++ri) {
                const double* src = xd.data() + ((bi * h + hi) * r + ri) * dh;
                double* dst = od.data() + (bi * r + ri) * d + hi * dh;
                for (std::size_t c = 0; c < dh; ++c) dst[c] = src[c];
            }
        }
    }
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, b, r, d, h, dh]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t bi = 0; bi < b; ++bi) {
                for (std::size_t hi = 0; hi < h; ++hi) {
                    for (std::size_t ri = 0; ri < r; ++ri) {
                        double* dst = xn->grad.data() + ((bi * h + hi) * r + ri) * dh;
                        const double* src = on->grad.data() + (bi * r + ri) * d + hi * dh;
                        for (std::size_t c = 0; c < dh; ++c) dst[c] += src[c];
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::broadcast_rows(const Tensor& x, std::size_t batch) {
    if (x.rank() != 2 || batch == 0) {
        throw ShapeError("broadcast_rows: expected rank-2 input and batch >= 1, got " +
                         shape_str(x.shape()));
    }
    const std::size_t n = x.size();
    Tensor out = make_output({batch, x.dim(0), x.dim(1)}, recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) od[b * n + i] = xd[i];
    }
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, batch, n]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < n; ++i) xn->grad[i] += on->grad[b * n + i];
            }
        });
    }
    return out;
}

Tensor Tape::rowdot(const Tensor& u, const Tensor& w) {
    if (u.rank() != 3 || w.rank() != 2 || u.dim(1) != w.dim(0) || u.dim(2) != w.dim(1)) {
        throw ShapeError("rowdot: incompatible shapes " + shape_str(u.shape()) + " and " +
                         shape_str(w.shape()));
    }
    const std::size_t b = u.dim(0), l = u.dim(1), d = u.dim(2);
    Tensor out = make_output({b, l}, recording({&u, &w}));
    const auto& ud = u.data();
    const auto& wd = w.data();
    auto& od = out.data();
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t li = 0; li < l; ++li) {
            const double* ur = ud.data() + (bi * l + li) * d;
            const double* wr = wd.data() + li * d;
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += ur[k] * wr[k];
            od[bi * l + li] = acc;
        }
    }
    check_finite(out, "rowdot");
    if (out.requires_grad()) {
        auto un = u.node(), wn = w.node(), on = out.node();
        push([un, wn, on, b, l, d]() {
            if (!on->has_grad()) return;
            for (std::size_t bi = 0; bi < b; ++bi) {
                for (std::size_t li = 0; li < l; ++li) {
                    const double g = on->grad[bi * l + li];
                    if (un->requires_grad) {
                        un->ensure_grad();
                        double* gu = un->grad.data() + (bi * l + li) * d;
                        const double* wr = wn->data.data() + li * d;
                        for (std::size_t k = 0; k < d; ++k) gu[k] += g * wr[k];
                    }
                    if (wn->requires_grad) {
                        wn->ensure_grad();
                        double* gw = wn->grad.data() + li * d;
                        const double* ur = un->data.data() + (bi * l + li) * d;
                        for (std::size_t k = 0; k < d; ++k) gw[k] += g * ur[k];
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::sum_last(const Tensor& x) {
    auto [rows, cols] = as_rows(x, "sum_last");
    Shape oshape(x.shape().begin(), x.shape().end() - 1);
    Tensor out = make_output(std::move(oshape), recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += xd[r * cols + j];
        od[r] = acc;
    }
    check_finite(out, "sum_last");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, rows, cols]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < cols; ++j) xn->grad[r * cols + j] += on->grad[r];
            }
        });
    }
    return out;
}

Tensor Tape::mean_axis1(const Tensor& x) {
    if (x.rank() != 3) {
        throw ShapeError("mean_axis1: expected rank-3 input, got " + shape_str(x.shape()));
    }
    const std::size_t b = x.dim(0), c = x.dim(1), d = x.dim(2);
    if (c == 0) throw ShapeError("mean_axis1: empty axis 1");
    Tensor out = make_output({b, d}, recording({&x}));
    const auto& xd = x.data();
    auto& od = out.data();
    const double inv = 1.0 / static_cast<double>(c);
    for (std::size_t bi = 0; bi < b; ++bi) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            for (std::size_t k = 0; k < d; ++k) {
                od[bi * d + k] += xd[(bi * c + ci) * d + k];
            }
        }
        for (std::size_t k = 0; k < d; ++k) od[bi * d + k] *= inv;
    }
    check_finite(out, "mean_axis1");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, b, c, d, inv]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t bi = 0; bi < b; ++bi) {
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t k = 0; k < d; ++k) {
                        xn->grad[(bi * c + ci) * d + k] += on->grad[bi * d + k] * inv;
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::sum_all(const Tensor& x) {
    Tensor out = make_output({}, recording({&x}));
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    out.data()[0] = acc;
    check_finite(out, "sum_all");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[0];
        });
    }
    return out;
}

Tensor Tape::mean_all(const Tensor& x) {
    if (x.size() == 0) throw ShapeError("mean_all: empty tensor");
    const double inv = 1.0 / static_cast<double>(x.size());
    Tensor out = make_output({}, recording({&x}));
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    out.data()[0] = acc * inv;
    check_finite(out, "mean_all");
    if (out.requires_grad()) {
        auto xn = x.node(), on = out.node();
        push([xn, on, inv]() {
            if (!on->has_grad() || !xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += on->grad[0] * inv;
        });
    }
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ShapeError("backward: loss must be scalar" +
                         (loss.defined() ? ", got shape " + shape_str(loss.shape()) : ""));
    }
    if (replayed_) {
        throw ValueError("backward: tape already replayed; build a fresh tape per pass");
    }
    replayed_ = true;
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        it->backward();
    }
}

} // namespace hotvae
