#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hotvae/rng.hpp"
#include "hotvae/tensor.hpp"
#include "hotvae/vae.hpp"

namespace hotvae {

enum class GraphMode { complete, prior };
enum class InjectMode { per_layer, first };

// Symmetric label graph without self-loops; the residual path of the
// message-passing update carries each node's own state.
struct LabelGraph {
    std::size_t L = 0;
    GraphMode mode = GraphMode::complete;
    std::vector<std::uint8_t> adjacency; // L*L row-major

    bool at(std::size_t i, std::size_t j) const { return adjacency[i * L + j] != 0; }
    void set(std::size_t i, std::size_t j, bool v) {
        adjacency[i * L + j] = v ? 1 : 0;
        adjacency[j * L + i] = v ? 1 : 0;
    }
    std::size_t edge_count() const;

    static LabelGraph complete(std::size_t L);

    // Keep-mask for the label-to-label attention. A node with no neighbors
    // falls back to attending itself so its softmax row stays well defined.
    BoolMask attention_mask() const;
};

// adjacency[i][j] set iff labels i and j co-occur in at least one sample.
LabelGraph build_prior_graph(const std::vector<std::uint8_t>& labels,
                             std::size_t n_samples, std::size_t L);

// One attention sublayer plus its feed-forward sublayer. Head projections
// are packed: rows [k*d/h, (k+1)*d/h) of Wq/Wu/Wv belong to head k.
struct AttentionBlock {
    std::size_t d = 0;
    std::size_t h = 0;
    Tensor Wq, Wu, Wv, Wproj;  // all [d x d], no biases
    Tensor U1, c1, U2, c2;     // feed-forward d -> 2d -> d
    Tensor ln1_gain, ln1_bias; // after the attention residual
    Tensor ln2_gain, ln2_bias; // after the feed-forward residual

    static AttentionBlock init(std::size_t d, std::size_t h, Rng& rng);
    void collect(std::vector<Tensor>& out) const;
};

struct DecoderLayerParams {
    AttentionBlock fy; // latent-to-label injection
    AttentionBlock yy; // masked label-to-label message passing
};

struct DecoderParams {
    std::size_t L = 0;
    std::size_t d = 0;
    std::size_t h = 0;
    Tensor Wy; // [L x d] initial label embeddings
    Tensor Wo; // [L x d] per-label readout rows
    std::vector<DecoderLayerParams> layers;

    std::size_t n() const { return layers.size(); }
    static DecoderParams init(std::size_t L, std::size_t d, std::size_t h, std::size_t n,
                              Rng& rng);
    void collect(std::vector<Tensor>& out) const;
};

// Detached copy of one attention weight tensor [batch*heads x rows x cols].
struct AlphaRecord {
    std::size_t batch_heads = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
};

struct DecoderTrace {
    Tensor final_probs;                // [batch x L]
    std::vector<Tensor> intermediates; // n-1 tensors of [batch x L]
    std::vector<AlphaRecord> alphas_fy; // per layer, when captured
    std::vector<AlphaRecord> alphas_yy; // per layer, when captured
};

// Scaled multi-head attention with residual and post-norm:
// queries [B x M x d], keys [B x P x d] -> [B x M x d].
Tensor attention_pass(Tape& tp, const Tensor& queries, const Tensor& keys,
                      const AttentionBlock& blk, const BoolMask* mask,
                      double dropout_rate, bool training, Rng& rng,
                      AlphaRecord* alpha_out = nullptr);

// Post-norm feed-forward sublayer: layer_norm(m + U(m)).
Tensor feed_forward(Tape& tp, const Tensor& m, const AttentionBlock& blk,
                    double dropout_rate, bool training, Rng& rng);

// One decoder step: latent injection (when inject) then masked
// label-to-label message passing, each followed by its feed-forward.
Tensor decoder_layer(Tape& tp, const Tensor& u, const Tensor& z, const LabelGraph& graph,
                     const DecoderLayerParams& lp, bool inject, double dropout_rate,
                     bool training, Rng& rng, AlphaRecord* alpha_fy = nullptr,
                     AlphaRecord* alpha_yy = nullptr);

// Row-wise readout: sigmoid(<Wo_i, u_i>) per label, [B x L x d] -> [B x L].
Tensor readout(Tape& tp, const Tensor& u, const Tensor& Wo);

// Full decoder: u^0 = label embeddings; n decoder layers; intermediate
// probabilities after layers 1..n-1 plus the final probabilities.
DecoderTrace decode(Tape& tp, const LatentSamples& z, const LabelGraph& graph,
                    const DecoderParams& params, InjectMode inject, double dropout_rate,
                    bool training, Rng& rng, bool capture_alphas = false);

} // namespace hotvae
