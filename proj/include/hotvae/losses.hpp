#pragma once

#include <cstddef>
#include <vector>

#include "hotvae/decoder.hpp"
#include "hotvae/tensor.hpp"

namespace hotvae {

struct LossWeights {
    double lambda0 = 1.0; // branch BCE
    double lambda1 = 0.1; // intermediate-state BCE
    double lambda2 = 1.0; // pairwise ranking
    double beta = 1e-5;   // KL alignment

    void validate() const;
};

// Scalar snapshot of one loss evaluation. kl holds the unweighted alignment
// bracket; beta is applied only inside total.
struct LossBreakdown {
    double bce = 0.0;
    double intermediate = 0.0;
    double rank = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

// Mean binary cross entropy over labels and batch; predictions are clamped
// to [1e-7, 1-1e-7] before the logs. y is a constant {0,1} tensor.
Tensor bce(Tape& tp, const Tensor& y, const Tensor& yhat);

// bce against both branch outputs, summed.
Tensor loss_bce(Tape& tp, const Tensor& y, const Tensor& yhat_f, const Tensor& yhat_l);

// Sum of bce over all intermediate readouts of both branches; zero when the
// decoder has a single layer. Lists must hold exactly n-1 entries each.
Tensor loss_int(Tape& tp, const Tensor& y, const std::vector<Tensor>& inter_f,
                const std::vector<Tensor>& inter_l, std::size_t n);

// Batch mean of (1/(|Y||Ybar|)) * sum_{r in Y, s in Ybar} exp(-(yhat_r - yhat_s)),
// computed via the factorization (sum_r e^{-yhat_r}) * (sum_s e^{yhat_s}).
// Samples with empty Y or empty Ybar contribute zero.
Tensor ranking_loss(Tape& tp, const Tensor& y, const Tensor& yhat);

struct TotalLoss {
    LossBreakdown breakdown;
    Tensor total; // differentiable scalar
};

// Assembles lambda0*bce + lambda1*int + lambda2*rank + beta*kl where rank
// covers the final outputs of both branches and kl_bracket is the unweighted
// alignment bracket.
TotalLoss total_loss(Tape& tp, const Tensor& y, const DecoderTrace& trace_f,
                     const DecoderTrace& trace_l, const Tensor& kl_bracket,
                     const LossWeights& w);

} // namespace hotvae
