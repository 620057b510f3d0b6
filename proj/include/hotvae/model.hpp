#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hotvae/decoder.hpp"
#include "hotvae/vae.hpp"

namespace hotvae {

struct ModelDims {
    std::size_t in_dim = 0;   // feature width S
    std::size_t n_labels = 0; // L
    std::size_t d = 100;
    std::size_t n_layers = 2;
    std::size_t heads = 4;
    std::size_t hidden1 = 256;
    std::size_t hidden2 = 512;
    std::size_t subspaces = 1; // J = K for the MLP encoders

    void validate() const;
};

// The full two-branch model: feature and label encoders plus the shared
// attention decoder over the label graph.
struct Model {
    ModelDims dims;
    InjectMode inject = InjectMode::per_layer;
    EncoderParams feature_encoder;
    EncoderParams label_encoder;
    DecoderParams decoder;
    LabelGraph graph;

    static Model init(const ModelDims& dims, LabelGraph graph, InjectMode inject,
                      Rng& rng);

    // Stable name -> tensor registry; the checkpoint payload and the Adam
    // parameter list both follow this order.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;
};

struct ForwardResult {
    GaussianSubspaces feature_posterior; // collapsed, for the KL bracket
    GaussianSubspaces label_posterior;   // collapsed
    DecoderTrace trace_f;
    DecoderTrace trace_l;
    Tensor kl_bracket; // unweighted (beta = 1)
};

// Training forward: encode both branches, sample, decode each branch's
// latents through the shared decoder, and compute the alignment bracket.
// RNG consumption order: feature-encoder dropout, label-encoder dropout,
// feature eps, label eps, feature-decode dropout, label-decode dropout.
ForwardResult forward_two_branch(Tape& tp, const Model& m, const Tensor& x,
                                 const Tensor& y, double dropout_rate,
                                 bool training, Rng& rng);

// Inference: feature branch only, z = posterior means (no sampling), dropout
// disabled, no gradient recording. Returns final probabilities [batch x L].
Tensor predict_probs(const Model& m, const Tensor& x);

} // namespace hotvae
