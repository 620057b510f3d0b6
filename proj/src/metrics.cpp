#include "hotvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hotvae {

namespace {

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double f1_term(double tp, double fp, double fn) {
    const double denom = 2.0 * tp + fp + fn;
    if (denom == 0.0) return 1.0; // truth and prediction both empty
    return 2.0 * tp / denom;
}

double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

double population_std(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return std::sqrt(sq / n);
}

// The interval-coverage statistic shared by richness and community metrics:
// |fraction of units whose truth lies in the per-unit 25-75 band - 0.5|.
double interval_calibration(const std::vector<std::vector<double>>& samples,
                            const std::vector<double>& truth) {
    std::size_t covered = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double lo = percentile(samples[i], 0.25);
        const double hi = percentile(samples[i], 0.75);
        if (truth[i] >= lo && truth[i] <= hi) ++covered;
    }
    const double p =
        static_cast<double>(covered) / static_cast<double>(truth.size());
    return std::fabs(p - 0.5);
}

EcoQuad sampled_quad(const std::vector<std::vector<double>>& per_unit_draws,
                     const std::vector<double>& truth) {
    const std::size_t n = truth.size();
    std::vector<double> mean(n, 0.0);
    std::vector<double> stds(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        mean[i] = std::accumulate(per_unit_draws[i].begin(),
                                  per_unit_draws[i].end(), 0.0) /
                  static_cast<double>(per_unit_draws[i].size());
        stds[i] = population_std(per_unit_draws[i]);
    }
    EcoQuad quad;
    quad.accuracy = rmse(mean, truth);
    quad.discrimination = spearman(mean, truth);
    quad.calibration = interval_calibration(per_unit_draws, truth);
    quad.precision =
        std::accumulate(stds.begin(), stds.end(), 0.0) / static_cast<double>(n);
    return quad;
}

} // namespace

void PredictionSet::apply_threshold(double tau) {
    thresholded.assign(probabilities.size(), 0);
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        thresholded[i] = probabilities[i] >= tau ? 1 : 0;
    }
}

void PredictionSet::validate(bool need_thresholded) const {
    const std::size_t cells = n_samples * n_labels;
    if (probabilities.size() != cells || truth.size() != cells) {
        throw ShapeError("PredictionSet: expected " + std::to_string(cells) +
                         " cells, got " + std::to_string(probabilities.size()) +
                         " probabilities and " + std::to_string(truth.size()) +
                         " truth entries");
    }
    if (need_thresholded && thresholded.size() != cells) {
        throw ShapeError("PredictionSet: thresholded predictions are missing");
    }
}

F1Scores f1_scores(const PredictionSet& p) {
    p.validate(true);
    F1Scores out;

    double eb_acc = 0.0;
    double micro_tp = 0.0, micro_fp = 0.0, micro_fn = 0.0;
    std::vector<double> label_tp(p.n_labels, 0.0);
    std::vector<double> label_fp(p.n_labels, 0.0);
    std::vector<double> label_fn(p.n_labels, 0.0);

    for (std::size_t i = 0; i < p.n_samples; ++i) {
        double tp = 0.0, fp = 0.0, fn = 0.0;
        for (std::size_t j = 0; j < p.n_labels; ++j) {
            const bool t = p.truth_at(i, j) != 0;
            const bool y = p.pred_at(i, j) != 0;
            if (t && y) {
                tp += 1.0;
                label_tp[j] += 1.0;
            } else if (!t && y) {
                fp += 1.0;
                label_fp[j] += 1.0;
            } else if (t && !y) {
                fn += 1.0;
                label_fn[j] += 1.0;
            }
        }
        eb_acc += f1_term(tp, fp, fn);
        micro_tp += tp;
        micro_fp += fp;
        micro_fn += fn;
    }
    out.ebf1 = eb_acc / static_cast<double>(p.n_samples);
    out.mif1 = f1_term(micro_tp, micro_fp, micro_fn);

    double ma_acc = 0.0;
    for (std::size_t j = 0; j < p.n_labels; ++j) {
        ma_acc += f1_term(label_tp[j], label_fp[j], label_fn[j]);
    }
    out.maf1 = ma_acc / static_cast<double>(p.n_labels);
    return out;
}

double hamming_accuracy(const PredictionSet& p) {
    p.validate(true);
    std::size_t correct = 0;
    const std::size_t cells = p.n_samples * p.n_labels;
    for (std::size_t i = 0; i < cells; ++i) {
        if ((p.truth[i] != 0) == (p.thresholded[i] != 0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(cells);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return values[a] < values[b];
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // ranks i+1 .. j+1 share the average
        const double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

AucSummary auc_per_label(const PredictionSet& p) {
    p.validate(false);
    AucSummary out;
    out.per_label.assign(p.n_labels, 0.0);
    out.computed.assign(p.n_labels, 0);

    std::vector<double> column(p.n_samples);
    std::vector<double> scored;
    for (std::size_t j = 0; j < p.n_labels; ++j) {
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < p.n_samples; ++i) {
            column[i] = p.prob_at(i, j);
            if (p.truth_at(i, j)) ++n_pos;
        }
        const std::size_t n_neg = p.n_samples - n_pos;
        if (n_pos == 0 || n_neg == 0) {
            ++out.n_skipped;
            continue;
        }
        const std::vector<double> ranks = average_ranks(column);
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < p.n_samples; ++i) {
            if (p.truth_at(i, j)) rank_sum += ranks[i];
        }
        const double np = static_cast<double>(n_pos);
        const double nn = static_cast<double>(n_neg);
        const double auc = (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
        out.per_label[j] = auc;
        out.computed[j] = 1;
        scored.push_back(auc);
    }
    if (scored.empty()) {
        throw MetricUnavailable("auc_per_label: every label is degenerate");
    }
    out.median = median_of(scored);
    return out;
}

double select_threshold(const PredictionSet& validation,
                        const std::string& metric,
                        const std::vector<double>& grid) {
    if (grid.empty()) throw ValueError("select_threshold: empty grid");
    const auto& names = threshold_metric_names();
    if (std::find(names.begin(), names.end(), metric) == names.end()) {
        throw ValueError("select_threshold: unknown metric '" + metric + "'");
    }
    std::vector<double> taus = grid;
    std::sort(taus.begin(), taus.end());

    PredictionSet work = validation;
    double best_tau = taus.front();
    double best_value = -1.0;
    for (double tau : taus) {
        work.apply_threshold(tau);
        double value = 0.0;
        if (metric == "HA") {
            value = hamming_accuracy(work);
        } else {
            const F1Scores f = f1_scores(work);
            value = metric == "ebF1" ? f.ebf1 : metric == "miF1" ? f.mif1 : f.maf1;
        }
        if (value > best_value) {
            best_value = value;
            best_tau = tau;
        }
    }
    return best_tau;
}

CommunityTriple baselga_dissimilarity(std::size_t a, std::size_t b,
                                      std::size_t c) {
    CommunityTriple t;
    const double shared = static_cast<double>(a);
    const double lo = static_cast<double>(std::min(b, c));
    const double uniq = static_cast<double>(b + c);
    const double sor =
        (2.0 * shared + uniq) == 0.0 ? 0.0 : uniq / (2.0 * shared + uniq);
    t.sim = (shared + lo) == 0.0 ? 0.0 : lo / (shared + lo);
    t.nes = sor - t.sim;
    // reassembled so that sor == sim + nes holds bit-exactly; the sum can
    // differ from the quotient by an ulp when the subtraction rounded
    t.sor = t.sim + t.nes;
    return t;
}

EcoQuad occurrence_metrics(const PredictionSet& p) {
    p.validate(false);
    EcoQuad quad;

    const std::size_t cells = p.n_samples * p.n_labels;
    double abs_acc = 0.0;
    double prec_acc = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        abs_acc += std::fabs(p.probabilities[i] - static_cast<double>(p.truth[i]));
        prec_acc += std::sqrt(p.probabilities[i] * (1.0 - p.probabilities[i]));
    }
    quad.accuracy = abs_acc / static_cast<double>(cells);
    quad.precision = prec_acc / static_cast<double>(cells);

    try {
        const AucSummary auc = auc_per_label(p);
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t j = 0; j < p.n_labels; ++j) {
            if (auc.computed[j]) {
                acc += auc.per_label[j];
                ++n;
            }
        }
        quad.discrimination = acc / static_cast<double>(n);
    } catch (const MetricUnavailable&) {
        quad.discrimination = std::nullopt;
    }

    // Ten equal-count quantile bins per species over the stable prob order.
    constexpr std::size_t kBins = 10;
    double cal_acc = 0.0;
    std::vector<std::size_t> order(p.n_samples);
    for (std::size_t j = 0; j < p.n_labels; ++j) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                             return p.prob_at(a, j) < p.prob_at(b, j);
                         });
        double species_acc = 0.0;
        std::size_t used_bins = 0;
        for (std::size_t b = 0; b < kBins; ++b) {
            const std::size_t lo = b * p.n_samples / kBins;
            const std::size_t hi = (b + 1) * p.n_samples / kBins;
            if (hi == lo) continue;
            double prob_sum = 0.0, truth_sum = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
                prob_sum += p.prob_at(order[k], j);
                truth_sum += static_cast<double>(p.truth_at(order[k], j));
            }
            const double width = static_cast<double>(hi - lo);
            species_acc += std::fabs(prob_sum / width - truth_sum / width);
            ++used_bins;
        }
        cal_acc += species_acc / static_cast<double>(used_bins);
    }
    quad.calibration = cal_acc / static_cast<double>(p.n_labels);
    return quad;
}

std::optional<double> spearman(const std::vector<double>& a,
                               const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) return std::nullopt;
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = ra[i] - ma;
        const double db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return std::nullopt;
    return cov / std::sqrt(va * vb);
}

double percentile(std::vector<double> values, double alpha) {
    if (values.empty()) throw ValueError("percentile: empty sample");
    std::sort(values.begin(), values.end());
    const double h = alpha * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

EcoQuad richness_metrics(const PredictionSet& p, Rng& rng, std::size_t draws) {
    p.validate(false);
    if (draws < 2) throw ValueError("richness_metrics: draws must be at least 2");

    const std::size_t n = p.n_samples;
    std::vector<std::vector<double>> richness(n, std::vector<double>(draws, 0.0));
    for (std::size_t m = 0; m < draws; ++m) {
        for (std::size_t i = 0; i < n; ++i) {
            double count = 0.0;
            for (std::size_t k = 0; k < p.n_labels; ++k) {
                if (rng.bernoulli(p.prob_at(i, k))) count += 1.0;
            }
            richness[i][m] = count;
        }
    }
    std::vector<double> truth(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < p.n_labels; ++k) {
            truth[i] += static_cast<double>(p.truth_at(i, k));
        }
    }
    return sampled_quad(richness, truth);
}

CommunityReport community_metrics(const PredictionSet& p, Rng& rng,
                                  std::size_t pairs, std::size_t draws) {
    p.validate(false);
    if (p.n_samples < 2) {
        throw ValueError("community_metrics: need at least 2 locations");
    }
    if (draws < 2) throw ValueError("community_metrics: draws must be at least 2");
    if (pairs == 0) throw ValueError("community_metrics: pairs must be positive");

    const std::size_t n = p.n_samples;
    const std::size_t L = p.n_labels;

    std::vector<std::pair<std::size_t, std::size_t>> chosen(pairs);
    for (std::size_t q = 0; q < pairs; ++q) {
        const std::size_t i = static_cast<std::size_t>(rng.below(n));
        std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
        if (j >= i) ++j;
        chosen[q] = {i, j};
    }

    std::vector<std::vector<double>> sor(pairs, std::vector<double>(draws, 0.0));
    std::vector<std::vector<double>> sim(pairs, std::vector<double>(draws, 0.0));
    std::vector<std::vector<double>> nes(pairs, std::vector<double>(draws, 0.0));

    std::vector<std::uint8_t> matrix(n * L, 0);
    for (std::size_t m = 0; m < draws; ++m) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < L; ++k) {
                matrix[i * L + k] = rng.bernoulli(p.prob_at(i, k)) ? 1 : 0;
            }
        }
        for (std::size_t q = 0; q < pairs; ++q) {
            const std::uint8_t* ra = matrix.data() + chosen[q].first * L;
            const std::uint8_t* rb = matrix.data() + chosen[q].second * L;
            std::size_t a = 0, b = 0, c = 0;
            for (std::size_t k = 0; k < L; ++k) {
                if (ra[k] && rb[k]) ++a;
                else if (ra[k]) ++b;
                else if (rb[k]) ++c;
            }
            const CommunityTriple t = baselga_dissimilarity(a, b, c);
            sor[q][m] = t.sor;
            sim[q][m] = t.sim;
            nes[q][m] = t.nes;
        }
    }

    std::vector<double> true_sor(pairs), true_sim(pairs), true_nes(pairs);
    for (std::size_t q = 0; q < pairs; ++q) {
        const std::uint8_t* ra = p.truth.data() + chosen[q].first * L;
        const std::uint8_t* rb = p.truth.data() + chosen[q].second * L;
        std::size_t a = 0, b = 0, c = 0;
        for (std::size_t k = 0; k < L; ++k) {
            if (ra[k] && rb[k]) ++a;
            else if (ra[k]) ++b;
            else if (rb[k]) ++c;
        }
        const CommunityTriple t = baselga_dissimilarity(a, b, c);
        true_sor[q] = t.sor;
        true_sim[q] = t.sim;
        true_nes[q] = t.nes;
    }

    CommunityReport report;
    report.sor = sampled_quad(sor, true_sor);
    report.sim = sampled_quad(sim, true_sim);
    report.nes = sampled_quad(nes, true_nes);
    return report;
}

EcoReport eco_report(const PredictionSet& p, std::uint64_t seed,
                     std::size_t draws, std::size_t pairs) {
    EcoReport report;
    report.occurrence = occurrence_metrics(p);
    Rng richness_rng = Rng::stream(seed, 1);
    report.richness = richness_metrics(p, richness_rng, draws);
    Rng community_rng = Rng::stream(seed, 2);
    report.community = community_metrics(p, community_rng, pairs, draws);
    return report;
}

} // namespace hotvae
