#include "hotvae/vae.hpp"

#include <cmath>

#include "hotvae/error.hpp"

namespace hotvae {

EncoderParams EncoderParams::init(std::size_t in_dim, std::size_t hidden1, std::size_t hidden2,
                                  std::size_t count, std::size_t d, Rng& rng) {
    if (in_dim == 0 || hidden1 == 0 || hidden2 == 0 || count == 0 || d == 0) {
        throw ValueError("EncoderParams::init: all dimensions must be positive");
    }
    EncoderParams p;
    p.in_dim = in_dim;
    p.hidden1 = hidden1;
    p.hidden2 = hidden2;
    p.count = count;
    p.d = d;
    const std::size_t head = count * d;
    p.W1 = Tensor::randn({hidden1, in_dim}, rng, 1.0 / std::sqrt(static_cast<double>(in_dim)), true);
    p.b1 = Tensor::zeros({hidden1}, true);
    p.W2 = Tensor::randn({hidden2, hidden1}, rng, 1.0 / std::sqrt(static_cast<double>(hidden1)), true);
    p.b2 = Tensor::zeros({hidden2}, true);
    p.Wmu = Tensor::randn({head, hidden2}, rng, 1.0 / std::sqrt(static_cast<double>(hidden2)), true);
    p.bmu = Tensor::zeros({head}, true);
    p.Wlv = Tensor::randn({head, hidden2}, rng, 1.0 / std::sqrt(static_cast<double>(hidden2)), true);
    p.blv = Tensor::zeros({head}, true);
    return p;
}

void EncoderParams::collect(std::vector<Tensor>& out) const {
    out.push_back(W1);
    out.push_back(b1);
    out.push_back(W2);
    out.push_back(b2);
    out.push_back(Wmu);
    out.push_back(bmu);
    out.push_back(Wlv);
    out.push_back(blv);
}

GaussianSubspaces encode(Tape& tp, const Tensor& input, const EncoderParams& params,
                         double dropout_rate, bool training, Rng& rng) {
    if (input.rank() != 2 || input.dim(1) != params.in_dim) {
        throw ShapeError("encode: input " + shape_str(input.shape()) + " does not match encoder in_dim " +
                         std::to_string(params.in_dim));
    }
    const std::size_t batch = input.dim(0);
    Tensor h1 = tp.dropout(tp.relu(tp.linear(input, params.W1, params.b1)),
                           dropout_rate, training, rng);
    Tensor h2 = tp.dropout(tp.relu(tp.linear(h1, params.W2, params.b2)),
                           dropout_rate, training, rng);
    Tensor mu = tp.reshape(tp.linear(h2, params.Wmu, params.bmu), {batch, params.count, params.d});
    Tensor logvar = tp.reshape(tp.linear(h2, params.Wlv, params.blv), {batch, params.count, params.d});
    GaussianSubspaces gs;
    gs.batch = batch;
    gs.count = params.count;
    gs.d = params.d;
    gs.means = mu;
    gs.variances = tp.exp(logvar);
    return gs;
}

LatentSamples reparameterize(Tape& tp, const GaussianSubspaces& gs, Rng& rng) {
    Tensor eps = Tensor::randn(gs.means.shape(), rng, 1.0, false);
    LatentSamples s;
    s.batch = gs.batch;
    s.count = gs.count;
    s.d = gs.d;
    s.z = tp.add(gs.means, tp.mul(tp.sqrt(gs.variances), eps));
    return s;
}

GaussianSubspaces collapse(Tape& tp, const GaussianSubspaces& gs) {
    if (gs.count < 1) throw ValueError("collapse: count must be >= 1");
    GaussianSubspaces out;
    out.batch = gs.batch;
    out.count = 1;
    out.d = gs.d;
    out.means = tp.reshape(tp.mean_axis1(gs.means), {gs.batch, 1, gs.d});
    out.variances = tp.reshape(tp.mean_axis1(gs.variances), {gs.batch, 1, gs.d});
    return out;
}

Tensor kl_aligned(Tape& tp, const GaussianSubspaces& feature,
                  const GaussianSubspaces& label, double beta) {
    if (feature.count != 1 || label.count != 1) {
        throw ValueError("kl_aligned: both subspace sets must be collapsed (count=1)");
    }
    if (feature.d != label.d || feature.batch != label.batch) {
        throw ShapeError("kl_aligned: dimension mismatch " + shape_str(feature.means.shape()) +
                         " vs " + shape_str(label.means.shape()));
    }
    const double d = static_cast<double>(feature.d);
    Tensor log_ratio = tp.sum_last(tp.log(tp.divide(feature.variances, label.variances)));
    Tensor trace = tp.sum_last(tp.divide(label.variances, feature.variances));
    Tensor diff = tp.sub(feature.means, label.means);
    Tensor quad = tp.sum_last(tp.divide(tp.mul(diff, diff), feature.variances));
    Tensor bracket = tp.add_scalar(tp.add(tp.add(log_ratio, trace), quad), -d);
    return tp.mul_scalar(tp.mean_all(bracket), beta);
}

} // namespace hotvae
