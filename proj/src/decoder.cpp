#include "hotvae/decoder.hpp"

#include <cmath>

#include "hotvae/error.hpp"

namespace hotvae {

std::size_t LabelGraph::edge_count() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = i + 1; j < L; ++j) {
            if (at(i, j)) ++c;
        }
    }
    return c;
}

LabelGraph LabelGraph::complete(std::size_t L) {
    LabelGraph g;
    g.L = L;
    g.mode = GraphMode::complete;
    g.adjacency.assign(L * L, 1);
    for (std::size_t i = 0; i < L; ++i) g.adjacency[i * L + i] = 0;
    return g;
}

BoolMask LabelGraph::attention_mask() const {
    BoolMask mask(L, L, 0);
    for (std::size_t i = 0; i < L; ++i) {
        bool any = false;
        for (std::size_t j = 0; j < L; ++j) {
            if (at(i, j)) {
                mask.set(i, j, true);
                any = true;
            }
        }
        if (!any) mask.set(i, i, true);
    }
    return mask;
}

LabelGraph build_prior_graph(const std::vector<std::uint8_t>& labels,
                             std::size_t n_samples, std::size_t L) {
    if (L < 2) throw ValueError("build_prior_graph: need at least 2 labels, got " + std::to_string(L));
    if (labels.size() != n_samples * L) {
        throw ShapeError("build_prior_graph: label matrix size " + std::to_string(labels.size()) +
                         " does not match " + std::to_string(n_samples) + "x" + std::to_string(L));
    }
    LabelGraph g;
    g.L = L;
    g.mode = GraphMode::prior;
    g.adjacency.assign(L * L, 0);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const std::uint8_t* row = labels.data() + s * L;
        for (std::size_t i = 0; i < L; ++i) {
            if (!row[i]) continue;
            for (std::size_t j = i + 1; j < L; ++j) {
                if (row[j]) g.set(i, j, true);
            }
        }
    }
    return g;
}

AttentionBlock AttentionBlock::init(std::size_t d, std::size_t h, Rng& rng) {
    if (h == 0 || d % h != 0) {
        throw ValueError("AttentionBlock::init: d=" + std::to_string(d) +
                         " not divisible by heads=" + std::to_string(h));
    }
    const double att_std = 1.0 / std::sqrt(static_cast<double>(d));
    AttentionBlock b;
    b.d = d;
    b.h = h;
    b.Wq = Tensor::randn({d, d}, rng, att_std, true);
    b.Wu = Tensor::randn({d, d}, rng, att_std, true);
    b.Wv = Tensor::randn({d, d}, rng, att_std, true);
    b.Wproj = Tensor::randn({d, d}, rng, att_std, true);
    b.U1 = Tensor::randn({2 * d, d}, rng, att_std, true);
    b.c1 = Tensor::zeros({2 * d}, true);
    b.U2 = Tensor::randn({d, 2 * d}, rng, 1.0 / std::sqrt(2.0 * static_cast<double>(d)), true);
    b.c2 = Tensor::zeros({d}, true);
    b.ln1_gain = Tensor::full({d}, 1.0, true);
    b.ln1_bias = Tensor::zeros({d}, true);
    b.ln2_gain = Tensor::full({d}, 1.0, true);
    b.ln2_bias = Tensor::zeros({d}, true);
    return b;
}

void AttentionBlock::collect(std::vector<Tensor>& out) const {
    for (const Tensor* t : {&Wq, &Wu, &Wv, &Wproj, &U1, &c1, &U2, &c2,
                            &ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias}) {
        out.push_back(*t);
    }
}

DecoderParams DecoderParams::init(std::size_t L, std::size_t d, std::size_t h, std::size_t n,
                                  Rng& rng) {
    if (n < 1) throw ValueError("DecoderParams::init: need at least 1 layer");
    if (L < 1) throw ValueError("DecoderParams::init: need at least 1 label");
    const double std = 1.0 / std::sqrt(static_cast<double>(d));
    DecoderParams p;
    p.L = L;
    p.d = d;
    p.h = h;
    p.Wy = Tensor::randn({L, d}, rng, std, true);
    p.layers.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        DecoderLayerParams lp;
        lp.fy = AttentionBlock::init(d, h, rng);
        lp.yy = AttentionBlock::init(d, h, rng);
        p.layers.push_back(std::move(lp));
    }
    p.Wo = Tensor::randn({L, d}, rng, std, true);
    return p;
}

void DecoderParams::collect(std::vector<Tensor>& out) const {
    out.push_back(Wy);
    for (const DecoderLayerParams& lp : layers) {
        lp.fy.collect(out);
        lp.yy.collect(out);
    }
    out.push_back(Wo);
}

Tensor attention_pass(Tape& tp, const Tensor& queries, const Tensor& keys,
                      const AttentionBlock& blk, const BoolMask* mask,
                      double dropout_rate, bool training, Rng& rng,
                      AlphaRecord* alpha_out) {
    if (queries.rank() != 3 || keys.rank() != 3 || queries.dim(0) != keys.dim(0) ||
        queries.dim(2) != blk.d || keys.dim(2) != blk.d) {
        throw ShapeError("attention_pass: incompatible shapes " + shape_str(queries.shape()) +
                         " and " + shape_str(keys.shape()) + " for d=" + std::to_string(blk.d));
    }
    const std::size_t dh = blk.d / blk.h;
    Tensor Q = tp.split_heads(tp.linear(queries, blk.Wq, Tensor()), blk.h);
    Tensor K = tp.split_heads(tp.linear(keys, blk.Wu, Tensor()), blk.h);
    Tensor V = tp.split_heads(tp.linear(keys, blk.Wv, Tensor()), blk.h);
    Tensor scores = tp.mul_scalar(tp.bmm(Q, K, true), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor alpha = tp.softmax_rows(scores, mask);
    if (alpha_out) {
        alpha_out->batch_heads = alpha.dim(0);
        alpha_out->rows = alpha.dim(1);
        alpha_out->cols = alpha.dim(2);
        alpha_out->values = alpha.data();
    }
    Tensor context = tp.merge_heads(tp.bmm(alpha, V), blk.h);
    Tensor projected = tp.dropout(tp.linear(context, blk.Wproj, Tensor()),
                                  dropout_rate, training, rng);
    Tensor message = tp.add(queries, projected);
    return tp.layer_norm(message, blk.ln1_gain, blk.ln1_bias);
}

Tensor feed_forward(Tape& tp, const Tensor& m, const AttentionBlock& blk,
                    double dropout_rate, bool training, Rng& rng) {
    Tensor inner = tp.relu(tp.linear(m, blk.U1, blk.c1));
    Tensor f = tp.dropout(tp.linear(inner, blk.U2, blk.c2), dropout_rate, training, rng);
    return tp.layer_norm(tp.add(m, f), blk.ln2_gain, blk.ln2_bias);
}

Tensor decoder_layer(Tape& tp, const Tensor& u, const Tensor& z, const LabelGraph& graph,
                     const DecoderLayerParams& lp, bool inject, double dropout_rate,
                     bool training, Rng& rng, AlphaRecord* alpha_fy, AlphaRecord* alpha_yy) {
    Tensor state = u;
    if (inject) {
        Tensor injected = attention_pass(tp, state, z, lp.fy, nullptr,
                                         dropout_rate, training, rng, alpha_fy);
        state = feed_forward(tp, injected, lp.fy, dropout_rate, training, rng);
    }
    BoolMask mask = graph.attention_mask();
    Tensor passed = attention_pass(tp, state, state, lp.yy, &mask,
                                   dropout_rate, training, rng, alpha_yy);
    return feed_forward(tp, passed, lp.yy, dropout_rate, training, rng);
}

Tensor readout(Tape& tp, const Tensor& u, const Tensor& Wo) {
    return tp.sigmoid(tp.rowdot(u, Wo));
}

DecoderTrace decode(Tape& tp, const LatentSamples& z, const LabelGraph& graph,
                    const DecoderParams& params, InjectMode inject, double dropout_rate,
                    bool training, Rng& rng, bool capture_alphas) {
    if (params.n() < 1) throw ValueError("decode: decoder has no layers");
    if (graph.L != params.L) {
        throw ShapeError("decode: graph has " + std::to_string(graph.L) + " labels, decoder " +
                         std::to_string(params.L));
    }
    const std::size_t n = params.n();
    DecoderTrace trace;
    Tensor u = tp.broadcast_rows(params.Wy, z.batch);
    for (std::size_t t = 1; t <= n; ++t) {
        const bool inject_now = inject == InjectMode::per_layer || t == 1;
        AlphaRecord afy, ayy;
        u = decoder_layer(tp, u, z.z, graph, params.layers[t - 1], inject_now,
                          dropout_rate, training, rng,
                          capture_alphas && inject_now ? &afy : nullptr,
                          capture_alphas ? &ayy : nullptr);
        if (capture_alphas) {
            trace.alphas_fy.push_back(std::move(afy));
            trace.alphas_yy.push_back(std::move(ayy));
        }
        if (t < n) trace.intermediates.push_back(readout(tp, u, params.Wo));
    }
    trace.final_probs = readout(tp, u, params.Wo);
    return trace;
}

} // namespace hotvae
