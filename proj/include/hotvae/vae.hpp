#pragma once

#include <cstddef>
#include <vector>

#include "hotvae/rng.hpp"
#include "hotvae/tensor.hpp"

namespace hotvae {

// A batch of sets of diagonal Gaussians: means/variances are
// [batch x count x d] with every variance strictly positive.
struct GaussianSubspaces {
    std::size_t batch = 0;
    std::size_t count = 0;
    std::size_t d = 0;
    Tensor means;
    Tensor variances;
};

// Latent draws matching a GaussianSubspaces source, [batch x count x d].
struct LatentSamples {
    std::size_t batch = 0;
    std::size_t count = 0;
    std::size_t d = 0;
    Tensor z;
};

// One encoder branch: a three-layer MLP whose final layer is a pair of
// heads emitting means and log-variances of width count*d.
struct EncoderParams {
    std::size_t in_dim = 0;
    std::size_t hidden1 = 0;
    std::size_t hidden2 = 0;
    std::size_t count = 0;
    std::size_t d = 0;
    Tensor W1, b1;
    Tensor W2, b2;
    Tensor Wmu, bmu;
    Tensor Wlv, blv;

    static EncoderParams init(std::size_t in_dim, std::size_t hidden1, std::size_t hidden2,
                              std::size_t count, std::size_t d, Rng& rng);
    void collect(std::vector<Tensor>& out) const;
};

// input: [batch x in_dim] -> subspaces with variances = exp(log-variance head).
GaussianSubspaces encode(Tape& tp, const Tensor& input, const EncoderParams& params,
                         double dropout_rate, bool training, Rng& rng);

// z = mu + sqrt(variance) * eps with eps ~ N(0, I); gradients flow to the
// Gaussian parameters, not to eps.
LatentSamples reparameterize(Tape& tp, const GaussianSubspaces& gs, Rng& rng);

// Uniform mixture-moment compression of count subspaces down to one:
// collapsed mean and variance are the arithmetic means over subspaces.
GaussianSubspaces collapse(Tape& tp, const GaussianSubspaces& gs);

// Alignment divergence between two collapsed (count=1) Gaussian batches:
//   beta * mean_b [ sum_i log(vf_i/vl_i) - d + sum_i vl_i/vf_i
//                   + sum_i (mf_i - ml_i)^2 / vf_i ]
// where f is the feature branch and l the label branch. The bracket equals
// twice the KL divergence from the label posterior to the feature posterior.
Tensor kl_aligned(Tape& tp, const GaussianSubspaces& feature,
                  const GaussianSubspaces& label, double beta);

} // namespace hotvae
