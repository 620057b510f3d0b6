#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hotvae/error.hpp"
#include "hotvae/rng.hpp"

namespace hotvae {

// Soft predictions with ground truth and an optional hard thresholding.
// Rows are samples (locations), columns labels (species).
struct PredictionSet {
    std::size_t n_samples = 0;
    std::size_t n_labels = 0;
    std::vector<double> probabilities;     // n_samples x n_labels
    std::vector<std::uint8_t> truth;       // n_samples x n_labels
    std::vector<std::uint8_t> thresholded; // same shape, or empty

    double prob_at(std::size_t i, std::size_t j) const {
        return probabilities[i * n_labels + j];
    }
    std::uint8_t truth_at(std::size_t i, std::size_t j) const {
        return truth[i * n_labels + j];
    }
    std::uint8_t pred_at(std::size_t i, std::size_t j) const {
        return thresholded[i * n_labels + j];
    }
    void apply_threshold(double tau);
    void validate(bool need_thresholded) const;
};

struct F1Scores {
    double ebf1 = 0.0;
    double mif1 = 0.0;
    double maf1 = 0.0;
};

// Example-based, micro, and macro F1 over the thresholded predictions. A
// zero-denominator term (truth and prediction both empty) counts as 1.
F1Scores f1_scores(const PredictionSet& p);

// Fraction of (sample, label) cells where thresholded equals truth.
double hamming_accuracy(const PredictionSet& p);

struct AucSummary {
    std::vector<double> per_label;        // 0 placeholder where not computed
    std::vector<std::uint8_t> computed;   // 1 if the label had both classes
    double median = 0.0;                  // over computed labels
    std::size_t n_skipped = 0;
};

// Mann-Whitney rank AUC per label, ties counting one half; labels without
// both a positive and a negative are skipped. Throws MetricUnavailable when
// every label is degenerate.
AucSummary auc_per_label(const PredictionSet& p);

// Metric names accepted by select_threshold and the evaluation report.
inline const std::vector<std::string>& threshold_metric_names() {
    static const std::vector<std::string> names = {"ebF1", "miF1", "maF1", "HA"};
    return names;
}

// Scans the grid in ascending order and returns the tau maximizing the named
// metric on the validation set; ties resolve to the smaller tau.
double select_threshold(const PredictionSet& validation,
                        const std::string& metric,
                        const std::vector<double>& grid);

// accuracy / discrimination / calibration / precision for one ecological
// level; discrimination is absent when its AUC or Spearman is undefined.
struct EcoQuad {
    double accuracy = 0.0;
    std::optional<double> discrimination;
    double calibration = 0.0;
    double precision = 0.0;
};

struct CommunityTriple {
    double sor = 0.0;
    double sim = 0.0;
    double nes = 0.0;
};

// Baselga decomposition from shared (a) and unique (b, c) species counts:
// sor = (b+c)/(2a+b+c), sim = min(b,c)/(a+min(b,c)), nes = sor - sim, with a
// zero denominator contributing 0. The reported sor is assembled as
// sim + nes so the identity holds bit-exactly; it matches the quotient to
// within an ulp.
CommunityTriple baselga_dissimilarity(std::size_t a, std::size_t b,
                                      std::size_t c);

struct CommunityReport {
    EcoQuad sor;
    EcoQuad sim;
    EcoQuad nes;
};

struct EcoReport {
    EcoQuad occurrence;
    EcoQuad richness;
    CommunityReport community;
};

// Occurrence level: accuracy = mean |prob - truth|; discrimination = mean
// per-species AUC (degenerate species skipped); calibration = mean over
// species of the mean |bin prob - bin truth| over 10 equal-count quantile
// bins; precision = mean sqrt(prob (1 - prob)).
EcoQuad occurrence_metrics(const PredictionSet& p);

// Richness level over `draws` sampled 0/1 matrices. The sampling order is
// part of the contract: for each draw, row-major over (location, species),
// one bernoulli(prob) call per cell. Richness is per location. accuracy =
// RMSE(mean sampled richness, true richness); discrimination = Spearman;
// calibration = |coverage of the 25th-75th percentile interval - 0.5|;
// precision = mean per-location std of sampled richness.
EcoQuad richness_metrics(const PredictionSet& p, Rng& rng,
                         std::size_t draws = 100);

// Community level: first draws `pairs` location pairs (i = below(N),
// j = below(N-1), j incremented when j >= i), then samples matrices in the
// richness order, averaging Baselga triples over draws per pair. The four
// richness-style statistics are computed per dissimilarity.
CommunityReport community_metrics(const PredictionSet& p, Rng& rng,
                                  std::size_t pairs = 300,
                                  std::size_t draws = 100);

// Runs all three levels with per-level RNG streams derived from the seed.
EcoReport eco_report(const PredictionSet& p, std::uint64_t seed,
                     std::size_t draws = 100, std::size_t pairs = 300);

// Shared rank/statistics helpers (exposed for oracle tests).
std::vector<double> average_ranks(const std::vector<double>& values);
std::optional<double> spearman(const std::vector<double>& a,
                               const std::vector<double>& b);
double percentile(std::vector<double> values, double alpha);

} // namespace hotvae
