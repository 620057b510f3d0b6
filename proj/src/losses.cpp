#include "hotvae/losses.hpp"

#include <string>

#include "hotvae/error.hpp"

namespace hotvae {

namespace {

constexpr double kProbClamp = 1e-7;

void require_prob_shape(const Tensor& y, const Tensor& yhat, const char* op) {
    if (y.shape() != yhat.shape()) {
        throw ShapeError(std::string(op) + ": truth " + shape_str(y.shape()) +
                         " vs prediction " + shape_str(yhat.shape()));
    }
}

// 1 - y for a constant {0,1} tensor.
Tensor complement(const Tensor& y) {
    std::vector<double> c(y.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 1.0 - y.data()[i];
    return Tensor::from(y.shape(), std::move(c));
}

} // namespace

void LossWeights::validate() const {
    if (lambda0 < 0.0 || lambda1 < 0.0 || lambda2 < 0.0 || beta < 0.0) {
        throw ValueError("LossWeights: all weights must be nonnegative");
    }
}

Tensor bce(Tape& tp, const Tensor& y, const Tensor& yhat) {
    require_prob_shape(y, yhat, "bce");
    Tensor p = tp.clamp(yhat, kProbClamp, 1.0 - kProbClamp);
    Tensor pos = tp.mul(tp.log(p), y);
    Tensor negp = tp.mul(tp.log(tp.add_scalar(tp.neg(p), 1.0)), complement(y));
    return tp.neg(tp.mean_all(tp.add(pos, negp)));
}

Tensor loss_bce(Tape& tp, const Tensor& y, const Tensor& yhat_f, const Tensor& yhat_l) {
    return tp.add(bce(tp, y, yhat_f), bce(tp, y, yhat_l));
}

Tensor loss_int(Tape& tp, const Tensor& y, const std::vector<Tensor>& inter_f,
                const std::vector<Tensor>& inter_l, std::size_t n) {
    if (n < 1) throw ValueError("loss_int: n must be >= 1");
    if (inter_f.size() != n - 1 || inter_l.size() != n - 1) {
        throw ValueError("loss_int: expected " + std::to_string(n - 1) +
                         " intermediates per branch, got " + std::to_string(inter_f.size()) +
                         " and " + std::to_string(inter_l.size()));
    }
    Tensor acc = Tensor::scalar(0.0);
    for (const Tensor& t : inter_f) acc = tp.add(acc, bce(tp, y, t));
    for (const Tensor& t : inter_l) acc = tp.add(acc, bce(tp, y, t));
    return acc;
}

Tensor ranking_loss(Tape& tp, const Tensor& y, const Tensor& yhat) {
    require_prob_shape(y, yhat, "ranking_loss");
    if (y.rank() != 2) {
        throw ShapeError("ranking_loss: expected [batch x labels], got " + shape_str(y.shape()));
    }
    const std::size_t B = y.dim(0), L = y.dim(1);
    // Per-sample normalization 1/(|Y| * |Ybar|), zero for degenerate rows.
    std::vector<double> weight(B, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < L; ++i) pos += y.data()[b * L + i] != 0.0 ? 1 : 0;
        const std::size_t neg = L - pos;
        if (pos > 0 && neg > 0) weight[b] = 1.0 / (static_cast<double>(pos) * static_cast<double>(neg));
    }
    Tensor negated = complement(y);
    Tensor pos_sum = tp.sum_last(tp.mul(tp.exp(tp.neg(yhat)), y));
    Tensor neg_sum = tp.sum_last(tp.mul(tp.exp(yhat), negated));
    Tensor per_sample = tp.mul(tp.mul(pos_sum, neg_sum), Tensor::from({B}, std::move(weight)));
    return tp.mean_all(per_sample);
}

TotalLoss total_loss(Tape& tp, const Tensor& y, const DecoderTrace& trace_f,
                     const DecoderTrace& trace_l, const Tensor& kl_bracket,
                     const LossWeights& w) {
    w.validate();
    const std::size_t n = trace_f.intermediates.size() + 1;
    if (trace_l.intermediates.size() + 1 != n) {
        throw ValueError("total_loss: branch traces disagree on depth");
    }
    auto guarded = [](const char* term, auto&& fn) -> Tensor {
        try {
            return fn();
        } catch (const NumericError& e) {
            throw NumericError(std::string(term) + ": " + e.what());
        }
    };
    Tensor bce_t = guarded("L_BCE", [&] {
        return loss_bce(tp, y, trace_f.final_probs, trace_l.final_probs);
    });
    Tensor int_t = guarded("L_INT", [&] {
        return loss_int(tp, y, trace_f.intermediates, trace_l.intermediates, n);
    });
    Tensor rank_t = guarded("L_RANK", [&] {
        return tp.add(ranking_loss(tp, y, trace_f.final_probs),
                      ranking_loss(tp, y, trace_l.final_probs));
    });
    Tensor total = guarded("L_TOTAL", [&] {
        Tensor acc = tp.mul_scalar(bce_t, w.lambda0);
        acc = tp.add(acc, tp.mul_scalar(int_t, w.lambda1));
        acc = tp.add(acc, tp.mul_scalar(rank_t, w.lambda2));
        return tp.add(acc, tp.mul_scalar(kl_bracket, w.beta));
    });

    TotalLoss out;
    out.breakdown.bce = bce_t.value();
    out.breakdown.intermediate = int_t.value();
    out.breakdown.rank = rank_t.value();
    out.breakdown.kl = kl_bracket.value();
    out.breakdown.total = total.value();
    out.total = total;
    return out;
}

} // namespace hotvae
