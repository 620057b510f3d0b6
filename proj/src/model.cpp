#include "hotvae/model.hpp"

namespace hotvae {

void ModelDims::validate() const {
    if (in_dim == 0) throw ValueError("model: in_dim must be positive");
    if (n_labels == 0) throw ValueError("model: n_labels must be positive");
    if (d == 0 || heads == 0 || d % heads != 0) {
        throw ValueError("model: d (" + std::to_string(d) +
                         ") must be a positive multiple of heads (" +
                         std::to_string(heads) + ")");
    }
    if (n_layers < 1) throw ValueError("model: need at least 1 decoder layer");
    if (subspaces < 1) throw ValueError("model: need at least 1 subspace");
    if (hidden1 == 0 || hidden2 == 0) {
        throw ValueError("model: encoder hidden widths must be positive");
    }
}

Model Model::init(const ModelDims& dims, LabelGraph graph, InjectMode inject,
                  Rng& rng) {
    dims.validate();
    if (graph.L != dims.n_labels) {
        throw ShapeError("model: graph has " + std::to_string(graph.L) +
                         " nodes, model has " + std::to_string(dims.n_labels) +
                         " labels");
    }
    Model m;
    m.dims = dims;
    m.inject = inject;
    m.graph = std::move(graph);
    m.feature_encoder = EncoderParams::init(dims.in_dim, dims.hidden1,
                                            dims.hidden2, dims.subspaces,
                                            dims.d, rng);
    m.label_encoder = EncoderParams::init(dims.n_labels, dims.hidden1,
                                          dims.hidden2, dims.subspaces,
                                          dims.d, rng);
    m.decoder = DecoderParams::init(dims.n_labels, dims.d, dims.heads,
                                    dims.n_layers, rng);
    return m;
}

namespace {

void push_encoder(std::vector<std::pair<std::string, Tensor>>& out,
                  const std::string& prefix, const EncoderParams& e) {
    out.emplace_back(prefix + ".W1", e.W1);
    out.emplace_back(prefix + ".b1", e.b1);
    out.emplace_back(prefix + ".W2", e.W2);
    out.emplace_back(prefix + ".b2", e.b2);
    out.emplace_back(prefix + ".Wmu", e.Wmu);
    out.emplace_back(prefix + ".bmu", e.bmu);
    out.emplace_back(prefix + ".Wlv", e.Wlv);
    out.emplace_back(prefix + ".blv", e.blv);
}

void push_block(std::vector<std::pair<std::string, Tensor>>& out,
                const std::string& prefix, const AttentionBlock& b) {
    out.emplace_back(prefix + ".Wq", b.Wq);
    out.emplace_back(prefix + ".Wu", b.Wu);
    out.emplace_back(prefix + ".Wv", b.Wv);
    out.emplace_back(prefix + ".Wproj", b.Wproj);
    out.emplace_back(prefix + ".U1", b.U1);
    out.emplace_back(prefix + ".c1", b.c1);
    out.emplace_back(prefix + ".U2", b.U2);
    out.emplace_back(prefix + ".c2", b.c2);
    out.emplace_back(prefix + ".ln1_gain", b.ln1_gain);
    out.emplace_back(prefix + ".ln1_bias", b.ln1_bias);
    out.emplace_back(prefix + ".ln2_gain", b.ln2_gain);
    out.emplace_back(prefix + ".ln2_bias", b.ln2_bias);
}

} // namespace

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    push_encoder(out, "feature_encoder", feature_encoder);
    push_encoder(out, "label_encoder", label_encoder);
    out.emplace_back("decoder.Wy", decoder.Wy);
    for (std::size_t t = 0; t < decoder.layers.size(); ++t) {
        const std::string prefix = "decoder.layers." + std::to_string(t);
        push_block(out, prefix + ".fy", decoder.layers[t].fy);
        push_block(out, prefix + ".yy", decoder.layers[t].yy);
    }
    out.emplace_back("decoder.Wo", decoder.Wo);
    return out;
}

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, tensor] : named_parameters()) out.push_back(tensor);
    return out;
}

ForwardResult forward_two_branch(Tape& tp, const Model& m, const Tensor& x,
                                 const Tensor& y, double dropout_rate,
                                 bool training, Rng& rng) {
    ForwardResult out;
    GaussianSubspaces gs_f =
        encode(tp, x, m.feature_encoder, dropout_rate, training, rng);
    GaussianSubspaces gs_l =
        encode(tp, y, m.label_encoder, dropout_rate, training, rng);
    const LatentSamples z_f = reparameterize(tp, gs_f, rng);
    const LatentSamples z_l = reparameterize(tp, gs_l, rng);
    out.feature_posterior = collapse(tp, gs_f);
    out.label_posterior = collapse(tp, gs_l);
    out.kl_bracket =
        kl_aligned(tp, out.feature_posterior, out.label_posterior, 1.0);
    out.trace_f = decode(tp, z_f, m.graph, m.decoder, m.inject, dropout_rate,
                         training, rng);
    out.trace_l = decode(tp, z_l, m.graph, m.decoder, m.inject, dropout_rate,
                         training, rng);
    return out;
}

Tensor predict_probs(const Model& m, const Tensor& x) {
    Tape tp;
    tp.set_enabled(false);
    Rng unused(0);
    const GaussianSubspaces gs =
        encode(tp, x, m.feature_encoder, 0.0, false, unused);
    LatentSamples z;
    z.batch = gs.batch;
    z.count = gs.count;
    z.d = gs.d;
    z.z = gs.means;
    const DecoderTrace trace = decode(tp, z, m.graph, m.decoder, m.inject, 0.0,
                                      false, unused);
    return trace.final_probs;
}

} // namespace hotvae
