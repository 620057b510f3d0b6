#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hotvae/data.hpp"
#include "hotvae/losses.hpp"
#include "hotvae/metrics.hpp"
#include "hotvae/model.hpp"

namespace hotvae {

// Every field can be set from a key = value config file and overridden by a
// --key flag; config_keys() lists the accepted keys.
struct RunConfig {
    std::string dataset;
    std::string format = "arff";    // csv | arff
    std::string encoder = "mlp";
    std::size_t num_labels = 0;     // arff only
    std::string train_idx;          // optional explicit split files
    std::string val_idx;
    std::string test_idx;
    double train_ratio = 0.8;
    double val_ratio = 0.1;
    double test_ratio = 0.1;
    std::size_t d = 100;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t hidden1 = 256;
    std::size_t hidden2 = 512;
    double lr = 7.5e-4;
    double lambda0 = 1.0;
    double lambda1 = 0.1;
    double lambda2 = 1.0;
    double beta = 1e-5;
    double dropout = 0.2;
    std::size_t epochs = 60;
    std::size_t batch_size = 128;
    std::uint64_t seed = 1;
    std::string graph_mode = "prior";  // prior | complete
    std::string inject = "per-layer";  // per-layer | first
    std::vector<double> thresholds;    // default 0.05 .. 0.95 step 0.05

    void validate() const;
    GraphMode graph_mode_value() const;
    InjectMode inject_value() const;
    LossWeights weights() const;
};

RunConfig default_config();
const std::vector<std::string>& config_keys();
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);
RunConfig load_config_file(const std::string& path, RunConfig base);

// The hyperparameter search grids the defaults are drawn from.
const std::vector<double>& grid_learning_rates(); // {2e-4, 3e-4, 7.5e-4}
const std::vector<double>& grid_lambda1();        // {0.1, 0.2, 0.3}
const std::vector<double>& grid_lambda2();        // {1, 100, 1000}
const std::vector<double>& grid_beta();           // {1e-5, 1e-4, 0}
const std::vector<std::size_t>& grid_d();         // {100, 200, 512}
const std::vector<std::size_t>& grid_layers();    // {2, 3, 4, 5}
const std::vector<double>& grid_dropout();        // {0, 0.1, 0.2, 0.5}

struct EpochLog {
    std::size_t epoch = 0;
    LossBreakdown mean; // sample-weighted mean over the epoch's batches
    double val_maf1 = 0.0;
    double val_tau = 0.0;
};

struct TrainOutput {
    Model model; // parameters restored to the best-validation epoch
    Standardizer standardizer;
    Dataset dataset; // standardized, with split assignment
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_maf1 = 0.0;
    std::string rng_state; // sampler stream descriptor at the best epoch
};

// Loads and prepares the dataset per the config (no standardization).
Dataset prepare_dataset(const RunConfig& cfg);

// Full training loop: seeded shuffles, two-branch forward, total loss, Adam;
// tracks the best validation maF1 model. Non-finite losses abort with the
// offending term named in the NumericError.
TrainOutput train_model(const RunConfig& cfg);

// Feature-branch probabilities plus ground truth for one split.
PredictionSet predict_split(const Model& m, const Dataset& standardized,
                            Split split, std::size_t batch_size = 256);

struct MetricReport {
    std::vector<std::pair<std::string, std::string>> rows; // CSV order
    double ebf1 = 0.0;
    double mif1 = 0.0;
    double maf1 = 0.0;
    double ha = 0.0;
    std::optional<double> median_auc;
    std::size_t auc_labels_skipped = 0;
    std::map<std::string, double> taus;
};

// Thresholds are selected on the validation split per metric and applied to
// report_split. The ecological suite runs only when eco is set (seeded).
MetricReport evaluate_model(const Model& m, const Dataset& standardized,
                            const std::vector<double>& thresholds,
                            Split report_split = Split::test, bool eco = false,
                            std::uint64_t eco_seed = 0,
                            std::size_t eco_draws = 100,
                            std::size_t eco_pairs = 300);

void write_metrics_csv(const MetricReport& report, const std::string& path);
void write_loss_log(const std::vector<EpochLog>& log, const std::string& path);

// Checkpoint = JSON manifest at `path` + raw little-endian f64 payload at
// `path`.bin holding all parameters (named_parameters order) followed by the
// standardizer mean and scale rows.
void save_checkpoint(const Model& m, const Standardizer& st,
                     const RunConfig& cfg, std::size_t epoch,
                     const std::string& rng_state, double best_val_maf1,
                     const std::vector<std::string>& label_names,
                     const std::string& path);

struct LoadedCheckpoint {
    Model model;
    Standardizer standardizer;
    RunConfig config;
    std::size_t epoch = 0;
    std::string rng_state;
    double best_val_maf1 = 0.0;
    std::vector<std::string> label_names;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

struct AblationRow {
    std::string key;  // n value or graph mode
    bool ok = false;
    double value = 0.0; // valid when ok
    std::string text;   // final CSV cell (number, "unavailable", or error:Tag)
};

// One run per depth, shared seed, rows in ascending n order; failures are
// recorded in the row instead of aborting the sweep.
std::vector<AblationRow> ablate_depth(const RunConfig& cfg,
                                      std::vector<std::size_t> n_values);

// Two runs differing only in graph mode; rows are prior then complete,
// reporting the test median AUC.
std::vector<AblationRow> ablate_graph(const RunConfig& cfg);

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::string& header, const std::string& path);

// Exception class name used for diagnostics and exit codes.
std::string error_category(const std::exception& e);

// 17-significant-digit formatting shared by all CSV emitters.
std::string format_double(double v);

} // namespace hotvae
