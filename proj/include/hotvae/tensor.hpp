#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hotvae/error.hpp"
#include "hotvae/rng.hpp"

namespace hotvae {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Storage node shared by tensor handles. Gradients are allocated lazily the
// first time a backward rule touches them and accumulate until zeroed.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    std::size_t size() const { return data.size(); }
    bool has_grad() const { return !grad.empty(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

// Cheap shared handle to a Node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }
    std::size_t size() const { return node_->size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    bool has_grad() const { return node_->has_grad(); }
    void zero_grad();

    // Scalar access; throws ShapeError unless the tensor holds exactly one value.
    double value() const;

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Boolean keep-mask for masked softmax. `keep[i*cols + j] != 0` means entry
// (i, j) participates. When applied to a tensor whose flattened row count is
// a multiple of `rows`, the mask tiles over the leading dimensions.
struct BoolMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> keep;

    BoolMask() = default;
    BoolMask(std::size_t r, std::size_t c, std::uint8_t fill = 1)
        : rows(r), cols(c), keep(r * c, fill) {}
    std::uint8_t at(std::size_t i, std::size_t j) const { return keep[i * cols + j]; }
    void set(std::size_t i, std::size_t j, bool v) { keep[i * cols + j] = v ? 1 : 0; }
};

// Records forward operations and replays them in reverse for gradients.
// Every op validates shapes, checks outputs for NaN/Inf, and (when recording
// and some input requires grad) pushes a backward closure.
class Tape {
public:
    // Matrix products ------------------------------------------------------
    Tensor matmul(const Tensor& a, const Tensor& b);
    // Batched product over rank-3 tensors with matching batch dimension.
    // trans_b=true computes a[i] * b[i]^T.
    Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);
    // x: [rows x in] or [batch x rows x in]; W: [out x in]; b: [out] or undefined.
    Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);

    // Elementwise ----------------------------------------------------------
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor divide(const Tensor& a, const Tensor& b);
    Tensor add_scalar(const Tensor& x, double c);
    Tensor mul_scalar(const Tensor& x, double c);
    Tensor neg(const Tensor& x) { return mul_scalar(x, -1.0); }
    Tensor relu(const Tensor& x);
    Tensor sigmoid(const Tensor& x);
    Tensor exp(const Tensor& x);
    Tensor log(const Tensor& x);
    Tensor sqrt(const Tensor& x);
    Tensor clamp(const Tensor& x, double lo, double hi);

    // Neural sublayers -----------------------------------------------------
    // Softmax over the last axis with optional tiling keep-mask; masked
    // entries are exactly 0 and a fully masked row is an error.
    Tensor softmax_rows(const Tensor& x, const BoolMask* mask = nullptr);
    // Normalization over the last axis, epsilon 1e-5.
    Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
    // Inverted dropout: identity when !training or rate == 0.
    Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

    // Shape manipulation ---------------------------------------------------
    Tensor reshape(const Tensor& x, Shape shape);
    // [batch x rows x (h*dh)] -> [batch*h x rows x dh], slicing the last axis.
    Tensor split_heads(const Tensor& x, std::size_t h);
    // Exact inverse of split_heads.
    Tensor merge_heads(const Tensor& x, std::size_t h);
    // [rows x cols] -> [batch x rows x cols] by repetition; backward sums.
    Tensor broadcast_rows(const Tensor& x, std::size_t batch);

    // Reductions -----------------------------------------------------------
    // Row-wise dot of u [batch x L x d] against shared w [L x d] -> [batch x L].
    Tensor rowdot(const Tensor& u, const Tensor& w);
    Tensor sum_last(const Tensor& x);            // [... x n] -> [...]
    Tensor mean_axis1(const Tensor& x);          // [b x c x d] -> [b x d]
    Tensor sum_all(const Tensor& x);             // -> scalar
    Tensor mean_all(const Tensor& x);            // -> scalar

    // Reverse pass ---------------------------------------------------------
    // loss must be scalar; gradients accumulate into leaves (caller zeroes).
    // A tape replays exactly once; build a fresh tape per forward pass.
    void backward(const Tensor& loss);
    void clear() { records_.clear(); replayed_ = false; }
    std::size_t size() const { return records_.size(); }

    // Gradient recording toggle; disabling turns the tape into a pure
    // forward evaluator (used at inference).
    void set_enabled(bool v) { enabled_ = v; }
    bool enabled() const { return enabled_; }

private:
    struct Record {
        std::function<void()> backward;
    };

    std::vector<Record> records_;
    bool enabled_ = true;
    bool replayed_ = false;

    bool recording(const std::initializer_list<const Tensor*>& inputs) const;
    Tensor make_output(Shape shape, bool requires_grad);
    void push(std::function<void()> fn) { records_.push_back({std::move(fn)}); }
};

// Raw kernels exposed for reuse by backward rules and oracles.
// All compute C += A*B variants over row-major buffers.
void gemm_nn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n); // b is [n x k]
void gemm_tn(const double* a, const double* b, double* c,
             std::size_t m, std::size_t k, std::size_t n); // a is [k x m]

} // namespace hotvae
