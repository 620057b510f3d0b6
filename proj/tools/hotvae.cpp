#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hotvae/train.hpp"

namespace fs = std::filesystem;
using namespace hotvae;

namespace {

// Registers --config plus one --<key> override flag per configuration key.
struct ConfigArgs {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path,
                        "configuration file with key = value lines");
        for (const std::string& key : config_keys()) {
            options[key] = cmd->add_option("--" + key, values[key],
                                           "override config key " + key);
        }
    }

    RunConfig resolve() const {
        RunConfig cfg = default_config();
        if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) apply_config_entry(cfg, key, values.at(key));
        }
        cfg.validate();
        return cfg;
    }
};

void print_table(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::size_t width = 0;
    for (const auto& [name, value] : rows) width = std::max(width, name.size());
    for (const auto& [name, value] : rows) {
        std::printf("%-*s  %s\n", static_cast<int>(width), name.c_str(),
                    value.c_str());
    }
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ValueError("unknown split '" + name + "', expected train/val/test");
}

Dataset load_for_checkpoint(const LoadedCheckpoint& ck) {
    Dataset raw = prepare_dataset(ck.config);
    if (ck.standardizer.mean.size() != raw.n_features) {
        throw ShapeError("checkpoint standardizer covers " +
                         std::to_string(ck.standardizer.mean.size()) +
                         " features, dataset has " +
                         std::to_string(raw.n_features));
    }
    return apply_standardizer(raw, ck.standardizer);
}

int run_train(const ConfigArgs& args, const std::string& out_dir) {
    const RunConfig cfg = args.resolve();
    fs::create_directories(out_dir);
    const TrainOutput run = train_model(cfg);

    write_loss_log(run.log, out_dir + "/loss_log.csv");
    save_checkpoint(run.model, run.standardizer, cfg, run.best_epoch,
                    run.rng_state, run.best_val_maf1, run.dataset.label_names,
                    out_dir + "/checkpoint.json");

    const MetricReport report =
        evaluate_model(run.model, run.dataset, cfg.thresholds);
    write_metrics_csv(report, out_dir + "/metrics.csv");

    std::printf("trained %zu epochs, kept epoch %zu (validation maF1 %s)\n",
                cfg.epochs, run.best_epoch, format_double(run.best_val_maf1).c_str());
    print_table(report.rows);
    return 0;
}

int run_predict(const std::string& checkpoint, const std::string& data,
                std::string format, std::size_t num_labels,
                const std::string& out_path) {
    const LoadedCheckpoint ck = load_checkpoint(checkpoint);
    if (format.empty()) format = ck.config.format;
    if (num_labels == 0) num_labels = ck.config.num_labels;
    Dataset raw = load_dataset(
        data, format == "csv" ? DataFormat::csv : DataFormat::arff, num_labels);
    if (ck.standardizer.mean.size() != raw.n_features) {
        throw ShapeError("checkpoint standardizer covers " +
                         std::to_string(ck.standardizer.mean.size()) +
                         " features, dataset has " +
                         std::to_string(raw.n_features));
    }
    const Dataset ds = apply_standardizer(raw, ck.standardizer);

    std::ofstream out(out_path);
    if (!out) throw ValueError("cannot open file for writing: " + out_path);
    for (std::size_t j = 0; j < ck.label_names.size(); ++j) {
        out << (j ? "," : "") << ck.label_names[j];
    }
    out << '\n';
    const std::size_t batch = 256;
    for (std::size_t start = 0; start < ds.n_samples; start += batch) {
        const std::size_t stop = std::min(ds.n_samples, start + batch);
        std::vector<std::size_t> rows(stop - start);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = start + i;
        const Tensor x = Tensor::from({rows.size(), ds.n_features},
                                      gather_features(ds, rows));
        const Tensor probs = predict_probs(ck.model, x);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < ds.n_labels; ++j) {
                out << (j ? "," : "")
                    << format_double(probs.data()[i * ds.n_labels + j]);
            }
            out << '\n';
        }
    }
    std::printf("wrote %zu prediction rows to %s\n", ds.n_samples,
                out_path.c_str());
    return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& split_name,
                 bool eco, std::uint64_t eco_seed, std::size_t eco_draws,
                 std::size_t eco_pairs, const std::string& out_path) {
    const LoadedCheckpoint ck = load_checkpoint(checkpoint);
    const Dataset ds = load_for_checkpoint(ck);
    const MetricReport report =
        evaluate_model(ck.model, ds, ck.config.thresholds,
                       parse_split(split_name), eco, eco_seed, eco_draws,
                       eco_pairs);
    write_metrics_csv(report, out_path);
    print_table(report.rows);
    return 0;
}

int run_ablate_depth(const ConfigArgs& args, const std::string& depths,
                     const std::string& out_path) {
    const RunConfig cfg = args.resolve();
    std::vector<std::size_t> values;
    std::istringstream in(depths);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) values.push_back(std::stoul(item));
    }
    const std::vector<AblationRow> rows = ablate_depth(cfg, values);
    write_ablation_csv(rows, "n,maF1", out_path);
    std::vector<std::pair<std::string, std::string>> table;
    for (const AblationRow& row : rows) table.emplace_back(row.key, row.text);
    print_table(table);
    return 0;
}

int run_ablate_graph(const ConfigArgs& args, const std::string& out_path) {
    const RunConfig cfg = args.resolve();
    const std::vector<AblationRow> rows = ablate_graph(cfg);
    write_ablation_csv(rows, "graph,medianAUC", out_path);
    std::vector<std::pair<std::string, std::string>> table;
    for (const AblationRow& row : rows) table.emplace_back(row.key, row.text);
    print_table(table);
    return 0;
}

int run_stats(const std::string& data, const std::string& format,
              std::size_t num_labels) {
    const Dataset ds = load_dataset(
        data, format == "csv" ? DataFormat::csv : DataFormat::arff, num_labels);
    const LabelStats st = label_stats(ds);
    std::vector<std::pair<std::string, std::string>> table = {
        {"samples", std::to_string(ds.n_samples)},
        {"features", std::to_string(ds.n_features)},
        {"labels", std::to_string(ds.n_labels)},
        {"labels_per_sample_mean", format_double(st.mean_labels_per_sample)},
        {"labels_per_sample_median", format_double(st.median_labels_per_sample)},
        {"labels_per_sample_max", format_double(st.max_labels_per_sample)},
        {"samples_per_label_mean", format_double(st.mean_samples_per_label)},
        {"samples_per_label_median", format_double(st.median_samples_per_label)},
        {"samples_per_label_max", format_double(st.max_samples_per_label)},
    };
    for (std::size_t j = 0; j < ds.n_labels; ++j) {
        table.emplace_back("count." + ds.label_names[j],
                           std::to_string(st.samples_per_label[j]));
    }
    print_table(table);
    return 0;
}

int exit_code_for(const std::exception& e) {
    const std::string category = error_category(e);
    if (category == "ParseError") return 2;
    if (category == "ShapeError") return 3;
    if (category == "ValueError") return 4;
    if (category == "NumericError") return 5;
    if (category == "MetricUnavailable") return 6;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-branch variational autoencoder with an attention "
                 "message-passing decoder for multi-label classification"};
    app.require_subcommand(1);

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    ConfigArgs train_args;
    train_args.attach(train_cmd);
    std::string train_out = ".";
    train_cmd->add_option("--out-dir", train_out,
                          "directory for checkpoint.json, loss_log.csv and "
                          "metrics.csv");

    CLI::App* predict_cmd =
        app.add_subcommand("predict", "write label probabilities for a dataset");
    std::string pr_checkpoint, pr_data, pr_format;
    std::size_t pr_num_labels = 0;
    std::string pr_out = "predictions.csv";
    predict_cmd->add_option("--checkpoint", pr_checkpoint, "checkpoint manifest")
        ->required();
    predict_cmd->add_option("--data", pr_data, "dataset file")->required();
    predict_cmd->add_option("--format", pr_format,
                            "csv or arff (default: from checkpoint)");
    predict_cmd->add_option("--num-labels", pr_num_labels,
                            "label count for arff (default: from checkpoint)");
    predict_cmd->add_option("--out", pr_out, "output csv path");

    CLI::App* eval_cmd =
        app.add_subcommand("evaluate", "score a checkpoint on a split");
    std::string ev_checkpoint, ev_split = "test", ev_out = "metrics.csv";
    bool ev_eco = false;
    std::uint64_t ev_seed = 0;
    std::size_t ev_draws = 100, ev_pairs = 300;
    eval_cmd->add_option("--checkpoint", ev_checkpoint, "checkpoint manifest")
        ->required();
    eval_cmd->add_option("--split", ev_split, "train, val or test");
    eval_cmd->add_option("--out", ev_out, "output csv path");
    CLI::Option* eco_flag = eval_cmd->add_flag(
        "--eco", ev_eco, "also run the sampling-based ecological suite");
    CLI::Option* eco_seed_opt = eval_cmd->add_option(
        "--eco-seed", ev_seed, "seed for the ecological suite's sampling");
    eco_flag->needs(eco_seed_opt);
    eval_cmd->add_option("--eco-draws", ev_draws, "binary matrices per draw");
    eval_cmd->add_option("--eco-pairs", ev_pairs, "community pairs to sample");

    CLI::App* depth_cmd = app.add_subcommand(
        "ablate-depth", "train once per decoder depth and tabulate maF1");
    ConfigArgs depth_args;
    depth_args.attach(depth_cmd);
    std::string depth_values = "2,3,4,5";
    std::string depth_out = "ablation_depth.csv";
    depth_cmd->add_option("--depths", depth_values,
                          "comma-separated decoder depths");
    depth_cmd->add_option("--out", depth_out, "output csv path");

    CLI::App* graph_cmd = app.add_subcommand(
        "ablate-graph", "compare prior and complete label graphs by medianAUC");
    ConfigArgs graph_args;
    graph_args.attach(graph_cmd);
    std::string graph_out = "ablation_graph.csv";
    graph_cmd->add_option("--out", graph_out, "output csv path");

    CLI::App* stats_cmd =
        app.add_subcommand("stats", "print dataset label statistics");
    std::string st_data, st_format = "arff";
    std::size_t st_num_labels = 0;
    stats_cmd->add_option("--data", st_data, "dataset file")->required();
    stats_cmd->add_option("--format", st_format, "csv or arff");
    stats_cmd->add_option("--num-labels", st_num_labels,
                          "label count (required for arff)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*train_cmd) return run_train(train_args, train_out);
        if (*predict_cmd) {
            return run_predict(pr_checkpoint, pr_data, pr_format, pr_num_labels,
                               pr_out);
        }
        if (*eval_cmd) {
            return run_evaluate(ev_checkpoint, ev_split, ev_eco, ev_seed,
                                ev_draws, ev_pairs, ev_out);
        }
        if (*depth_cmd) {
            return run_ablate_depth(depth_args, depth_values, depth_out);
        }
        if (*graph_cmd) return run_ablate_graph(graph_args, graph_out);
        if (*stats_cmd) return run_stats(st_data, st_format, st_num_labels);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s: %s\n", error_category(e).c_str(), e.what());
        return exit_code_for(e);
    }
    return 1;
}
