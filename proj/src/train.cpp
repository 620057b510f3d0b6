#include "hotvae/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "hotvae/adam.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads assume a little-endian host");

namespace hotvae {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double to_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ValueError("config key '" + key + "': not a number: '" + value + "'");
    }
    if (used != value.size()) {
        throw ValueError("config key '" + key + "': trailing characters in '" +
                         value + "'");
    }
    return v;
}

std::size_t to_size(const std::string& key, const std::string& value) {
    const double v = to_double(key, value);
    if (v < 0 || v != std::floor(v)) {
        throw ValueError("config key '" + key +
                         "': expected a nonnegative integer, got '" + value + "'");
    }
    return static_cast<std::size_t>(v);
}

std::vector<double> to_double_list(const std::string& key,
                                   const std::string& value) {
    std::vector<double> out;
    std::string cur;
    std::istringstream in(value);
    while (std::getline(in, cur, ',')) {
        const std::string item = trim(cur);
        if (!item.empty()) out.push_back(to_double(key, item));
    }
    if (out.empty()) throw ValueError("config key '" + key + "': empty list");
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void RunConfig::validate() const {
    if (dataset.empty()) throw ValueError("config: dataset path is required");
    if (format != "csv" && format != "arff") {
        throw ValueError("config: format must be csv or arff, got '" + format + "'");
    }
    if (encoder != "mlp") {
        throw ValueError("config: encoder must be mlp, got '" + encoder + "'");
    }
    if (format == "arff" && num_labels == 0) {
        throw ValueError("config: arff datasets need num-labels");
    }
    const bool any_idx = !train_idx.empty() || !val_idx.empty() || !test_idx.empty();
    const bool all_idx = !train_idx.empty() && !val_idx.empty() && !test_idx.empty();
    if (any_idx && !all_idx) {
        throw ValueError("config: provide all three of train-idx/val-idx/test-idx "
                         "or none");
    }
    if (d == 0 || heads == 0 || d % heads != 0) {
        throw ValueError("config: d must be a positive multiple of heads");
    }
    if (layers < 1) throw ValueError("config: layers must be at least 1");
    if (epochs < 1) throw ValueError("config: epochs must be at least 1");
    if (batch_size < 1) throw ValueError("config: batch-size must be at least 1");
    for (const auto& [name, v] :
         {std::pair<const char*, double>{"lr", lr},
          {"lambda0", lambda0},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"beta", beta},
          {"dropout", dropout},
          {"train-ratio", train_ratio},
          {"val-ratio", val_ratio},
          {"test-ratio", test_ratio}}) {
        if (!(v >= 0.0)) {
            throw ValueError(std::string("config: ") + name +
                             " must be nonnegative");
        }
    }
    if (dropout >= 1.0) throw ValueError("config: dropout must be below 1");
    if (graph_mode != "prior" && graph_mode != "complete") {
        throw ValueError("config: graph-mode must be prior or complete");
    }
    if (inject != "per-layer" && inject != "first") {
        throw ValueError("config: inject must be per-layer or first");
    }
    if (thresholds.empty()) throw ValueError("config: threshold grid is empty");
}

GraphMode RunConfig::graph_mode_value() const {
    return graph_mode == "complete" ? GraphMode::complete : GraphMode::prior;
}

InjectMode RunConfig::inject_value() const {
    return inject == "first" ? InjectMode::first : InjectMode::per_layer;
}

LossWeights RunConfig::weights() const {
    LossWeights w;
    w.lambda0 = lambda0;
    w.lambda1 = lambda1;
    w.lambda2 = lambda2;
    w.beta = beta;
    return w;
}

RunConfig default_config() {
    RunConfig cfg;
    for (int i = 1; i <= 19; ++i) {
        cfg.thresholds.push_back(static_cast<double>(i) * 0.05);
    }
    return cfg;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "dataset",    "format",      "encoder",    "num-labels", "train-idx",
        "val-idx",    "test-idx",    "train-ratio", "val-ratio",  "test-ratio",
        "d",          "layers",      "heads",      "hidden1",    "hidden2",
        "lr",         "lambda0",     "lambda1",    "lambda2",    "beta",
        "dropout",    "epochs",      "batch-size", "seed",       "graph-mode",
        "inject",     "thresholds"};
    return keys;
}

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
    if (key == "dataset") cfg.dataset = value;
    else if (key == "format") cfg.format = value;
    else if (key == "encoder") cfg.encoder = value;
    else if (key == "num-labels") cfg.num_labels = to_size(key, value);
    else if (key == "train-idx") cfg.train_idx = value;
    else if (key == "val-idx") cfg.val_idx = value;
    else if (key == "test-idx") cfg.test_idx = value;
    else if (key == "train-ratio") cfg.train_ratio = to_double(key, value);
    else if (key == "val-ratio") cfg.val_ratio = to_double(key, value);
    else if (key == "test-ratio") cfg.test_ratio = to_double(key, value);
    else if (key == "d") cfg.d = to_size(key, value);
    else if (key == "layers") cfg.layers = to_size(key, value);
    else if (key == "heads") cfg.heads = to_size(key, value);
    else if (key == "hidden1") cfg.hidden1 = to_size(key, value);
    else if (key == "hidden2") cfg.hidden2 = to_size(key, value);
    else if (key == "lr") cfg.lr = to_double(key, value);
    else if (key == "lambda0") cfg.lambda0 = to_double(key, value);
    else if (key == "lambda1") cfg.lambda1 = to_double(key, value);
    else if (key == "lambda2") cfg.lambda2 = to_double(key, value);
    else if (key == "beta") cfg.beta = to_double(key, value);
    else if (key == "dropout") cfg.dropout = to_double(key, value);
    else if (key == "epochs") cfg.epochs = to_size(key, value);
    else if (key == "batch-size") cfg.batch_size = to_size(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_size(key, value));
    else if (key == "graph-mode") cfg.graph_mode = value;
    else if (key == "inject") cfg.inject = value;
    else if (key == "thresholds") cfg.thresholds = to_double_list(key, value);
    else throw ValueError("unknown config key '" + key + "'");
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected key = value");
        }
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        try {
            apply_config_entry(base, key, value);
        } catch (const ValueError& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " +
                             e.what());
        }
    }
    return base;
}

const std::vector<double>& grid_learning_rates() {
    static const std::vector<double> g = {2e-4, 3e-4, 7.5e-4};
    return g;
}
const std::vector<double>& grid_lambda1() {
    static const std::vector<double> g = {0.1, 0.2, 0.3};
    return g;
}
const std::vector<double>& grid_lambda2() {
    static const std::vector<double> g = {1.0, 100.0, 1000.0};
    return g;
}
const std::vector<double>& grid_beta() {
    static const std::vector<double> g = {1e-5, 1e-4, 0.0};
    return g;
}
const std::vector<std::size_t>& grid_d() {
    static const std::vector<std::size_t> g = {100, 200, 512};
    return g;
}
const std::vector<std::size_t>& grid_layers() {
    static const std::vector<std::size_t> g = {2, 3, 4, 5};
    return g;
}
const std::vector<double>& grid_dropout() {
    static const std::vector<double> g = {0.0, 0.1, 0.2, 0.5};
    return g;
}

Dataset prepare_dataset(const RunConfig& cfg) {
    Dataset ds = load_dataset(
        cfg.dataset, cfg.format == "csv" ? DataFormat::csv : DataFormat::arff,
        cfg.num_labels);
    if (!cfg.train_idx.empty()) {
        return make_splits(ds, cfg.train_idx, cfg.val_idx, cfg.test_idx);
    }
    SplitRatios ratios{cfg.train_ratio, cfg.val_ratio, cfg.test_ratio};
    // stream 3 of the run seed is reserved for the split shuffle
    return make_splits(ds, ratios, Rng::stream(cfg.seed, 3).next_u64());
}

PredictionSet predict_split(const Model& m, const Dataset& standardized,
                            Split split, std::size_t batch_size) {
    const std::vector<std::size_t> rows = standardized.split_indices(split);
    PredictionSet out;
    out.n_samples = rows.size();
    out.n_labels = standardized.n_labels;
    out.probabilities.reserve(rows.size() * out.n_labels);
    out.truth = gather_labels_u8(standardized, rows);
    for (std::size_t start = 0; start < rows.size(); start += batch_size) {
        const std::size_t stop = std::min(rows.size(), start + batch_size);
        const std::vector<std::size_t> chunk(rows.begin() + start,
                                             rows.begin() + stop);
        const Tensor x =
            Tensor::from({chunk.size(), standardized.n_features},
                         gather_features(standardized, chunk));
        const Tensor probs = predict_probs(m, x);
        out.probabilities.insert(out.probabilities.end(), probs.data().begin(),
                                 probs.data().end());
    }
    return out;
}

namespace {

double validation_maf1(const Model& m, const Dataset& ds,
                       const std::vector<double>& grid, double& tau_out) {
    PredictionSet val = predict_split(m, ds, Split::val);
    tau_out = select_threshold(val, "maF1", grid);
    val.apply_threshold(tau_out);
    return f1_scores(val).maf1;
}

} // namespace

TrainOutput train_model(const RunConfig& cfg) {
    cfg.validate();
    TrainOutput out;

    Dataset raw = prepare_dataset(cfg);
    out.standardizer = fit_standardizer(raw);
    out.dataset = apply_standardizer(raw, out.standardizer);
    const Dataset& ds = out.dataset;

    const std::vector<std::size_t> train_rows = ds.split_indices(Split::train);
    if (train_rows.empty()) throw ValueError("train: train split is empty");
    if (ds.split_indices(Split::val).empty()) {
        throw ValueError("train: validation split is empty");
    }

    LabelGraph graph;
    if (cfg.graph_mode_value() == GraphMode::complete) {
        graph = LabelGraph::complete(ds.n_labels);
    } else {
        const std::vector<std::uint8_t> train_labels =
            gather_labels_u8(ds, train_rows);
        graph = build_prior_graph(train_labels, train_rows.size(), ds.n_labels);
    }

    ModelDims dims;
    dims.in_dim = ds.n_features;
    dims.n_labels = ds.n_labels;
    dims.d = cfg.d;
    dims.n_layers = cfg.layers;
    dims.heads = cfg.heads;
    dims.hidden1 = cfg.hidden1;
    dims.hidden2 = cfg.hidden2;

    Rng init_rng = Rng::stream(cfg.seed, 0);
    out.model = Model::init(dims, graph, cfg.inject_value(), init_rng);

    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;
    Adam adam(out.model.parameters(), adam_cfg);

    Rng shuffle_rng = Rng::stream(cfg.seed, 1);
    Rng sample_rng = Rng::stream(cfg.seed, 2);
    const LossWeights weights = cfg.weights();

    std::vector<std::size_t> order = train_rows;
    const double n_train = static_cast<double>(order.size());

    std::vector<std::vector<double>> best_params;
    out.best_val_maf1 = -std::numeric_limits<double>::infinity();

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        LossBreakdown epoch_mean;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            const std::size_t stop =
                std::min(order.size(), start + cfg.batch_size);
            const std::vector<std::size_t> batch(order.begin() + start,
                                                 order.begin() + stop);
            const Tensor x = Tensor::from({batch.size(), ds.n_features},
                                          gather_features(ds, batch));
            const Tensor y = Tensor::from({batch.size(), ds.n_labels},
                                          gather_labels(ds, batch));
            Tape tp;
            const ForwardResult fwd = forward_two_branch(
                tp, out.model, x, y, cfg.dropout, true, sample_rng);
            const TotalLoss loss = total_loss(tp, y, fwd.trace_f, fwd.trace_l,
                                              fwd.kl_bracket, weights);
            adam.zero_grad();
            tp.backward(loss.total);
            adam.step();

            const double w = static_cast<double>(batch.size()) / n_train;
            epoch_mean.bce += loss.breakdown.bce * w;
            epoch_mean.intermediate += loss.breakdown.intermediate * w;
            epoch_mean.rank += loss.breakdown.rank * w;
            epoch_mean.kl += loss.breakdown.kl * w;
            epoch_mean.total += loss.breakdown.total * w;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.mean = epoch_mean;
        entry.val_maf1 =
            validation_maf1(out.model, ds, cfg.thresholds, entry.val_tau);
        out.log.push_back(entry);

        if (entry.val_maf1 > out.best_val_maf1) {
            out.best_val_maf1 = entry.val_maf1;
            out.best_epoch = epoch;
            out.rng_state = sample_rng.serialize();
            best_params.clear();
            for (const Tensor& p : out.model.parameters()) {
                best_params.push_back(p.data());
            }
        }
    }

    if (best_params.empty()) {
        throw NumericError("train: validation maF1 was never finite");
    }
    std::vector<Tensor> params = out.model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i].data() = best_params[i];
    }
    return out;
}

MetricReport evaluate_model(const Model& m, const Dataset& standardized,
                            const std::vector<double>& thresholds,
                            Split report_split, bool eco,
                            std::uint64_t eco_seed, std::size_t eco_draws,
                            std::size_t eco_pairs) {
    const PredictionSet val = predict_split(m, standardized, Split::val);
    PredictionSet rep = predict_split(m, standardized, report_split);

    MetricReport report;
    for (const std::string& metric : threshold_metric_names()) {
        const double tau = select_threshold(val, metric, thresholds);
        report.taus[metric] = tau;
        rep.apply_threshold(tau);
        double value = 0.0;
        if (metric == "HA") {
            value = hamming_accuracy(rep);
            report.ha = value;
        } else {
            const F1Scores f = f1_scores(rep);
            if (metric == "ebF1") report.ebf1 = value = f.ebf1;
            else if (metric == "miF1") report.mif1 = value = f.mif1;
            else report.maf1 = value = f.maf1;
        }
        report.rows.emplace_back(metric, format_double(value));
    }

    try {
        const AucSummary auc = auc_per_label(rep);
        report.median_auc = auc.median;
        report.auc_labels_skipped = auc.n_skipped;
        report.rows.emplace_back("medianAUC", format_double(auc.median));
    } catch (const MetricUnavailable&) {
        report.median_auc = std::nullopt;
        report.auc_labels_skipped = standardized.n_labels;
        report.rows.emplace_back("medianAUC", "unavailable");
    }
    report.rows.emplace_back("auc_labels_skipped",
                             std::to_string(report.auc_labels_skipped));
    for (const std::string& metric : threshold_metric_names()) {
        report.rows.emplace_back("tau_" + metric,
                                 format_double(report.taus[metric]));
    }

    if (eco) {
        // the ecological suite scores one thresholded prediction set; use the
        // maF1-selected threshold, matching the model-selection metric
        rep.apply_threshold(report.taus["maF1"]);
        const EcoReport er = eco_report(rep, eco_seed, eco_draws, eco_pairs);
        const auto opt_str = [](const std::optional<double>& v) {
            return v ? format_double(*v) : std::string("unavailable");
        };
        const auto emit_quad = [&](const std::string& prefix, const EcoQuad& q) {
            report.rows.emplace_back(prefix + "_accuracy",
                                     format_double(q.accuracy));
            report.rows.emplace_back(prefix + "_discrimination",
                                     opt_str(q.discrimination));
            report.rows.emplace_back(prefix + "_calibration",
                                     format_double(q.calibration));
            report.rows.emplace_back(prefix + "_precision",
                                     format_double(q.precision));
        };
        emit_quad("occurrence", er.occurrence);
        emit_quad("richness", er.richness);
        emit_quad("community_sor", er.community.sor);
        emit_quad("community_sim", er.community.sim);
        emit_quad("community_nes", er.community.nes);
    }
    return report;
}

void write_metrics_csv(const MetricReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValueError("cannot open file for writing: " + path);
    out << "metric,value\n";
    for (const auto& [name, value] : report.rows) {
        out << name << ',' << value << '\n';
    }
}

void write_loss_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValueError("cannot open file for writing: " + path);
    out << "epoch,bce,intermediate,rank,kl,total,val_maF1,val_tau\n";
    for (const EpochLog& e : log) {
        out << e.epoch << ',' << format_double(e.mean.bce) << ','
            << format_double(e.mean.intermediate) << ','
            << format_double(e.mean.rank) << ',' << format_double(e.mean.kl)
            << ',' << format_double(e.mean.total) << ','
            << format_double(e.val_maf1) << ',' << format_double(e.val_tau)
            << '\n';
    }
}

namespace {

json config_to_json(const RunConfig& cfg) {
    json j;
    j["dataset"] = cfg.dataset;
    j["format"] = cfg.format;
    j["encoder"] = cfg.encoder;
    j["num-labels"] = cfg.num_labels;
    j["train-idx"] = cfg.train_idx;
    j["val-idx"] = cfg.val_idx;
    j["test-idx"] = cfg.test_idx;
    j["train-ratio"] = cfg.train_ratio;
    j["val-ratio"] = cfg.val_ratio;
    j["test-ratio"] = cfg.test_ratio;
    j["d"] = cfg.d;
    j["layers"] = cfg.layers;
    j["heads"] = cfg.heads;
    j["hidden1"] = cfg.hidden1;
    j["hidden2"] = cfg.hidden2;
    j["lr"] = cfg.lr;
    j["lambda0"] = cfg.lambda0;
    j["lambda1"] = cfg.lambda1;
    j["lambda2"] = cfg.lambda2;
    j["beta"] = cfg.beta;
    j["dropout"] = cfg.dropout;
    j["epochs"] = cfg.epochs;
    j["batch-size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["graph-mode"] = cfg.graph_mode;
    j["inject"] = cfg.inject;
    j["thresholds"] = cfg.thresholds;
    return j;
}

RunConfig config_from_json(const json& j) {
    RunConfig cfg;
    cfg.dataset = j.at("dataset").get<std::string>();
    cfg.format = j.at("format").get<std::string>();
    cfg.encoder = j.at("encoder").get<std::string>();
    cfg.num_labels = j.at("num-labels").get<std::size_t>();
    cfg.train_idx = j.at("train-idx").get<std::string>();
    cfg.val_idx = j.at("val-idx").get<std::string>();
    cfg.test_idx = j.at("test-idx").get<std::string>();
    cfg.train_ratio = j.at("train-ratio").get<double>();
    cfg.val_ratio = j.at("val-ratio").get<double>();
    cfg.test_ratio = j.at("test-ratio").get<double>();
    cfg.d = j.at("d").get<std::size_t>();
    cfg.layers = j.at("layers").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.hidden1 = j.at("hidden1").get<std::size_t>();
    cfg.hidden2 = j.at("hidden2").get<std::size_t>();
    cfg.lr = j.at("lr").get<double>();
    cfg.lambda0 = j.at("lambda0").get<double>();
    cfg.lambda1 = j.at("lambda1").get<double>();
    cfg.lambda2 = j.at("lambda2").get<double>();
    cfg.beta = j.at("beta").get<double>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.batch_size = j.at("batch-size").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.graph_mode = j.at("graph-mode").get<std::string>();
    cfg.inject = j.at("inject").get<std::string>();
    cfg.thresholds = j.at("thresholds").get<std::vector<double>>();
    return cfg;
}

std::string payload_name(const std::string& manifest_path) {
    const std::size_t slash = manifest_path.find_last_of('/');
    const std::string base = slash == std::string::npos
                                 ? manifest_path
                                 : manifest_path.substr(slash + 1);
    return base + ".bin";
}

std::string sibling_path(const std::string& manifest_path,
                         const std::string& name) {
    const std::size_t slash = manifest_path.find_last_of('/');
    if (slash == std::string::npos) return name;
    return manifest_path.substr(0, slash + 1) + name;
}

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw ParseError("checkpoint payload is truncated");
}

} // namespace

void save_checkpoint(const Model& m, const Standardizer& st,
                     const RunConfig& cfg, std::size_t epoch,
                     const std::string& rng_state, double best_val_maf1,
                     const std::vector<std::string>& label_names,
                     const std::string& path) {
    json manifest;
    manifest["format_version"] = 1;
    manifest["epoch"] = epoch;
    manifest["best_val_maf1"] = best_val_maf1;
    manifest["rng"] = rng_state;
    manifest["inject"] = cfg.inject;
    manifest["graph_mode"] = cfg.graph_mode;
    manifest["label_names"] = label_names;
    manifest["config"] = config_to_json(cfg);

    json dims;
    dims["in_dim"] = m.dims.in_dim;
    dims["n_labels"] = m.dims.n_labels;
    dims["d"] = m.dims.d;
    dims["n_layers"] = m.dims.n_layers;
    dims["heads"] = m.dims.heads;
    dims["hidden1"] = m.dims.hidden1;
    dims["hidden2"] = m.dims.hidden2;
    dims["subspaces"] = m.dims.subspaces;
    manifest["dims"] = dims;

    manifest["adjacency"] = m.graph.adjacency;
    manifest["standardizer_columns"] = st.mean.size();

    json params = json::array();
    for (const auto& [name, tensor] : m.named_parameters()) {
        json entry;
        entry["name"] = name;
        entry["shape"] = tensor.shape();
        params.push_back(entry);
    }
    manifest["parameters"] = params;
    manifest["payload"] = payload_name(path);

    std::ofstream mout(path);
    if (!mout) throw ValueError("cannot open file for writing: " + path);
    mout << manifest.dump(2) << '\n';

    std::ofstream pout(sibling_path(path, payload_name(path)), std::ios::binary);
    if (!pout) {
        throw ValueError("cannot open file for writing: " +
                         sibling_path(path, payload_name(path)));
    }
    for (const auto& [name, tensor] : m.named_parameters()) {
        write_doubles(pout, tensor.data());
    }
    write_doubles(pout, st.mean);
    write_doubles(pout, st.scale);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream min(path);
    if (!min) throw ParseError("cannot open checkpoint manifest: " + path);
    json manifest;
    try {
        min >> manifest;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint manifest " + path + ": " + e.what());
    }

    LoadedCheckpoint out;
    try {
        out.epoch = manifest.at("epoch").get<std::size_t>();
        out.best_val_maf1 = manifest.at("best_val_maf1").get<double>();
        out.rng_state = manifest.at("rng").get<std::string>();
        out.label_names =
            manifest.at("label_names").get<std::vector<std::string>>();
        out.config = config_from_json(manifest.at("config"));

        const json& dims_j = manifest.at("dims");
        ModelDims dims;
        dims.in_dim = dims_j.at("in_dim").get<std::size_t>();
        dims.n_labels = dims_j.at("n_labels").get<std::size_t>();
        dims.d = dims_j.at("d").get<std::size_t>();
        dims.n_layers = dims_j.at("n_layers").get<std::size_t>();
        dims.heads = dims_j.at("heads").get<std::size_t>();
        dims.hidden1 = dims_j.at("hidden1").get<std::size_t>();
        dims.hidden2 = dims_j.at("hidden2").get<std::size_t>();
        dims.subspaces = dims_j.at("subspaces").get<std::size_t>();

        LabelGraph graph;
        graph.L = dims.n_labels;
        graph.mode = out.config.graph_mode_value();
        graph.adjacency =
            manifest.at("adjacency").get<std::vector<std::uint8_t>>();
        if (graph.adjacency.size() != graph.L * graph.L) {
            throw ParseError("checkpoint adjacency has wrong size");
        }

        Rng dummy(0);
        out.model =
            Model::init(dims, std::move(graph), out.config.inject_value(), dummy);

        const json& params_j = manifest.at("parameters");
        const auto named = out.model.named_parameters();
        if (params_j.size() != named.size()) {
            throw ParseError("checkpoint lists " +
                             std::to_string(params_j.size()) +
                             " parameters, model has " +
                             std::to_string(named.size()));
        }
        const std::string payload =
            sibling_path(path, manifest.at("payload").get<std::string>());
        std::ifstream pin(payload, std::ios::binary);
        if (!pin) throw ParseError("cannot open checkpoint payload: " + payload);
        for (std::size_t i = 0; i < named.size(); ++i) {
            const std::string name = params_j[i].at("name").get<std::string>();
            const Shape shape = params_j[i].at("shape").get<Shape>();
            if (name != named[i].first || shape != named[i].second.shape()) {
                throw ParseError("checkpoint parameter " + std::to_string(i) +
                                 " (" + name + ") does not match the model's " +
                                 named[i].first);
            }
            Tensor t = named[i].second;
            read_doubles(pin, t.data());
        }
        const std::size_t cols =
            manifest.at("standardizer_columns").get<std::size_t>();
        out.standardizer.mean.assign(cols, 0.0);
        out.standardizer.scale.assign(cols, 0.0);
        read_doubles(pin, out.standardizer.mean);
        read_doubles(pin, out.standardizer.scale);
    } catch (const json::exception& e) {
        throw ParseError("checkpoint manifest " + path + ": " + e.what());
    }
    return out;
}

std::string error_category(const std::exception& e) {
    if (dynamic_cast<const ShapeError*>(&e)) return "ShapeError";
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const NumericError*>(&e)) return "NumericError";
    if (dynamic_cast<const MetricUnavailable*>(&e)) return "MetricUnavailable";
    if (dynamic_cast<const ValueError*>(&e)) return "ValueError";
    return "Error";
}

std::vector<AblationRow> ablate_depth(const RunConfig& cfg,
                                      std::vector<std::size_t> n_values) {
    if (n_values.empty()) throw ValueError("ablate_depth: no depths given");
    std::sort(n_values.begin(), n_values.end());
    std::vector<AblationRow> rows;
    for (std::size_t n : n_values) {
        AblationRow row;
        row.key = std::to_string(n);
        try {
            RunConfig run = cfg;
            run.layers = n;
            const TrainOutput t = train_model(run);
            const MetricReport r =
                evaluate_model(t.model, t.dataset, run.thresholds);
            row.ok = true;
            row.value = r.maf1;
            row.text = format_double(r.maf1);
        } catch (const std::exception& e) {
            row.ok = false;
            row.text = "error:" + error_category(e);
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<AblationRow> ablate_graph(const RunConfig& cfg) {
    std::vector<AblationRow> rows;
    for (const std::string mode : {"prior", "complete"}) {
        AblationRow row;
        row.key = mode;
        try {
            RunConfig run = cfg;
            run.graph_mode = mode;
            const TrainOutput t = train_model(run);
            const MetricReport r =
                evaluate_model(t.model, t.dataset, run.thresholds);
            if (r.median_auc) {
                row.ok = true;
                row.value = *r.median_auc;
                row.text = format_double(*r.median_auc);
            } else {
                row.ok = false;
                row.text = "unavailable";
            }
        } catch (const std::exception& e) {
            row.ok = false;
            row.text = "error:" + error_category(e);
        }
        rows.push_back(row);
    }
    return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::string& header, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValueError("cannot open file for writing: " + path);
    out << header << '\n';
    for (const AblationRow& row : rows) {
        out << row.key << ',' << row.text << '\n';
    }
}

} // namespace hotvae
