#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hotvae/error.hpp"
#include "hotvae/rng.hpp"

namespace hotvae {

enum class Split : std::uint8_t { train, val, test };

// A loaded multi-label dataset: N samples, S real features, L binary labels,
// plus a per-sample split assignment. Row-major storage throughout.
struct Dataset {
    std::string name;
    std::size_t n_samples = 0;
    std::size_t n_features = 0;
    std::size_t n_labels = 0;
    std::vector<double> features;        // n_samples x n_features
    std::vector<std::uint8_t> labels;    // n_samples x n_labels
    std::vector<std::string> feature_names;
    std::vector<std::string> label_names;
    std::vector<Split> split;            // one entry per sample

    double feature_at(std::size_t i, std::size_t j) const {
        return features[i * n_features + j];
    }
    std::uint8_t label_at(std::size_t i, std::size_t j) const {
        return labels[i * n_labels + j];
    }
    std::vector<std::size_t> split_indices(Split s) const;
};

struct LabelStats {
    double mean_labels_per_sample = 0.0;
    double median_labels_per_sample = 0.0;
    double max_labels_per_sample = 0.0;
    double mean_samples_per_label = 0.0;
    double median_samples_per_label = 0.0;
    double max_samples_per_label = 0.0;
    std::vector<std::size_t> samples_per_label;
};

enum class DataFormat { csv, arff };

// csv: header row; `label:`-prefixed columns are labels, the rest features.
// arff: attribute declarations then data rows (dense comma-separated or
// sparse `{index value, ...}`); the last num_labels attributes are labels.
// Malformed rows raise ParseError with the line number; label values outside
// {0,1} raise ValueError. The returned split assignment is all-train.
Dataset load_dataset(const std::string& path, DataFormat format,
                     std::size_t num_labels = 0);

// Writes the dataset as CSV in the format load_dataset(csv) reads. Feature
// values use 17 significant digits so a load/save/load cycle is exact.
void save_dataset_csv(const Dataset& ds, const std::string& path);

// Per-feature affine transform x -> (x - mean) / scale fitted on the train
// split: binary columns (train values within {0,1}) are identity, columns with
// population std below 1e-12 are centered only, the rest are z-scored.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;
};

Standardizer fit_standardizer(const Dataset& ds);
Dataset apply_standardizer(const Dataset& ds, const Standardizer& st);
Dataset standardize(const Dataset& ds);

LabelStats label_stats(const Dataset& ds);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

// Seeded shuffle assignment; ratios must sum to 1.
Dataset make_splits(const Dataset& ds, const SplitRatios& ratios,
                    std::uint64_t seed);

// Explicit 0-based index files, one integer per line. The three files must
// partition 0..N-1 exactly; overlaps or gaps raise ValueError.
Dataset make_splits(const Dataset& ds, const std::string& train_path,
                    const std::string& val_path, const std::string& test_path);

std::vector<std::size_t> read_index_file(const std::string& path,
                                         std::size_t n_samples);

// Row gathers used for batching: features as f64, labels widened to f64.
std::vector<double> gather_features(const Dataset& ds,
                                    const std::vector<std::size_t>& rows);
std::vector<double> gather_labels(const Dataset& ds,
                                  const std::vector<std::size_t>& rows);
std::vector<std::uint8_t> gather_labels_u8(const Dataset& ds,
                                           const std::vector<std::size_t>& rows);

} // namespace hotvae
