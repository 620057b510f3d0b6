#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hotvae/train.hpp"
#include "testutil.hpp"

using namespace hotvae;

namespace {

namespace fs = std::filesystem;

std::string fixture_dir() {
    static const std::string dir = [] {
        const fs::path p = fs::temp_directory_path() / "hotvae_train_tests";
        fs::create_directories(p);
        return p.string();
    }();
    return dir;
}

// Identity task: three binary features that are exactly the three labels.
// Every label combination from the given list appears `copies` times.
std::string write_identity_csv(const std::string& name,
                               const std::vector<int>& combos,
                               std::size_t copies) {
    const std::string path = fixture_dir() + "/" + name;
    std::ofstream out(path);
    out << "x0,x1,x2,label:a,label:b,label:c\n";
    for (std::size_t r = 0; r < copies; ++r) {
        for (int combo : combos) {
            const int b0 = combo & 1, b1 = (combo >> 1) & 1, b2 = (combo >> 2) & 1;
            out << b0 << ',' << b1 << ',' << b2 << ',' << b0 << ',' << b1 << ','
                << b2 << '\n';
        }
    }
    return path;
}

std::vector<int> all_combos() { return {0, 1, 2, 3, 4, 5, 6, 7}; }

// Rows cycle through the combos, so with block splits of size 40/16/8 every
// split contains every label combination. A model that is perfect on the
// validation block is therefore perfect on the test block too.
RunConfig fixture_config() {
    RunConfig cfg = default_config();
    cfg.dataset = write_identity_csv("identity64.csv", all_combos(), 8);
    cfg.format = "csv";
    cfg.train_idx = fixture_dir() + "/fix_tr.idx";
    cfg.val_idx = fixture_dir() + "/fix_va.idx";
    cfg.test_idx = fixture_dir() + "/fix_te.idx";
    {
        std::ofstream t(cfg.train_idx), v(cfg.val_idx), s(cfg.test_idx);
        for (int i = 0; i < 40; ++i) t << i << '\n';
        for (int i = 40; i < 56; ++i) v << i << '\n';
        for (int i = 56; i < 64; ++i) s << i << '\n';
    }
    cfg.d = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.hidden1 = 32;
    cfg.hidden2 = 32;
    cfg.lr = 3e-3;
    cfg.lambda1 = 0.1;
    cfg.lambda2 = 1.0;
    cfg.beta = 1e-5;
    cfg.dropout = 0.0;
    cfg.epochs = 150;
    cfg.batch_size = 16;
    cfg.seed = 3;
    cfg.graph_mode = "complete";
    return cfg;
}

const TrainOutput& fixture_run() {
    static const TrainOutput out = train_model(fixture_config());
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

double parse_row(const MetricReport& r, const std::string& name) {
    for (const auto& [key, value] : r.rows) {
        if (key == name) return std::stod(value);
    }
    FAIL("missing report row: ", name);
    return 0.0;
}

} // namespace

TEST_CASE("default config and search grids") {
    const RunConfig cfg = default_config();
    CHECK(cfg.d == 100);
    CHECK(cfg.layers == 2);
    CHECK(cfg.heads == 4);
    CHECK(cfg.lr == 7.5e-4);
    CHECK(cfg.lambda0 == 1.0);
    CHECK(cfg.batch_size == 128);
    REQUIRE(cfg.thresholds.size() == 19);
    CHECK(cfg.thresholds.front() == 0.05);
    CHECK(cfg.thresholds.back() == doctest::Approx(0.95).epsilon(1e-12));

    CHECK(grid_learning_rates() == std::vector<double>{2e-4, 3e-4, 7.5e-4});
    CHECK(grid_lambda1() == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(grid_lambda2() == std::vector<double>{1.0, 100.0, 1000.0});
    CHECK(grid_beta() == std::vector<double>{1e-5, 1e-4, 0.0});
    CHECK(grid_d() == std::vector<std::size_t>{100, 200, 512});
    CHECK(grid_layers() == std::vector<std::size_t>{2, 3, 4, 5});
    CHECK(grid_dropout() == std::vector<double>{0.0, 0.1, 0.2, 0.5});
}

TEST_CASE("config entries parse and reject bad values") {
    RunConfig cfg = default_config();
    apply_config_entry(cfg, "dataset", "/tmp/x.csv");
    apply_config_entry(cfg, "format", "csv");
    apply_config_entry(cfg, "lr", "0.001");
    apply_config_entry(cfg, "epochs", "12");
    apply_config_entry(cfg, "seed", "42");
    apply_config_entry(cfg, "thresholds", "0.3, 0.5");
    CHECK(cfg.dataset == "/tmp/x.csv");
    CHECK(cfg.lr == 0.001);
    CHECK(cfg.epochs == 12);
    CHECK(cfg.seed == 42);
    CHECK(cfg.thresholds == std::vector<double>{0.3, 0.5});

    CHECK_THROWS_AS(apply_config_entry(cfg, "epochs", "2.5"), ValueError);
    CHECK_THROWS_AS(apply_config_entry(cfg, "seed", "abc"), ValueError);
    CHECK_THROWS_AS(apply_config_entry(cfg, "lr", "1e-3x"), ValueError);
    CHECK_THROWS_AS(apply_config_entry(cfg, "thresholds", " , "), ValueError);
    CHECK_THROWS_AS(apply_config_entry(cfg, "no-such-key", "1"), ValueError);

    for (const std::string& key : config_keys()) {
        CHECK_NOTHROW(apply_config_entry(cfg, key, key == "dataset" ? "a"
                                              : key == "format" ? "csv"
                                              : key == "encoder" ? "mlp"
                                              : key == "train-idx" ? "t"
                                              : key == "val-idx" ? "v"
                                              : key == "test-idx" ? "s"
                                              : key == "graph-mode" ? "prior"
                                              : key == "inject" ? "first"
                                              : key == "thresholds" ? "0.5"
                                                                    : "1"));
    }
}

TEST_CASE("config files: comments, overrides, and located errors") {
    const std::string path = fixture_dir() + "/run.cfg";
    {
        std::ofstream out(path);
        out << "# a comment\n";
        out << "\n";
        out << "dataset = /tmp/data.csv\n";
        out << "format  =  csv \n";
        out << "lr = 0.0002\n";
        out << "epochs = 7\n";
        out << "thresholds = 0.25,0.75\n";
    }
    const RunConfig cfg = load_config_file(path, default_config());
    CHECK(cfg.dataset == "/tmp/data.csv");
    CHECK(cfg.format == "csv");
    CHECK(cfg.lr == 2e-4);
    CHECK(cfg.epochs == 7);
    CHECK(cfg.thresholds == std::vector<double>{0.25, 0.75});
    // untouched keys keep their defaults
    CHECK(cfg.d == 100);

    {
        std::ofstream out(path);
        out << "dataset = ok.csv\n";
        out << "mystery = 1\n";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_config_file(path, default_config())),
                         doctest::Contains(":2"), ParseError);

    {
        std::ofstream out(path);
        out << "just some words\n";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_config_file(path, default_config())),
                         doctest::Contains(":1"), ParseError);

    CHECK_THROWS_AS(static_cast<void>(
                        load_config_file(fixture_dir() + "/absent.cfg",
                                         default_config())),
                    ParseError);
}

TEST_CASE("config validation rejects inconsistent settings") {
    RunConfig cfg = default_config();
    CHECK_THROWS_AS(cfg.validate(), ValueError); // no dataset

    cfg.dataset = "x.arff";
    CHECK_THROWS_AS(cfg.validate(), ValueError); // arff needs num-labels
    cfg.num_labels = 3;
    CHECK_NOTHROW(cfg.validate());

    RunConfig bad = cfg;
    bad.format = "tsv";
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.encoder = "cnn";
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.d = 10;
    bad.heads = 3;
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.layers = 0;
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.dropout = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.lambda2 = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.graph_mode = "ring";
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.inject = "last";
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.thresholds.clear();
    CHECK_THROWS_AS(bad.validate(), ValueError);
    bad = cfg;
    bad.train_idx = "only-train.idx";
    CHECK_THROWS_AS(bad.validate(), ValueError);
}

TEST_CASE("zero loss weights leave every parameter bit-identical") {
    RunConfig cfg = fixture_config();
    cfg.lambda0 = 0.0;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    cfg.beta = 0.0;
    cfg.dropout = 0.2; // exercises the dropout path; gradients stay zero
    cfg.epochs = 1;

    const TrainOutput out = train_model(cfg);

    ModelDims dims;
    dims.in_dim = 3;
    dims.n_labels = 3;
    dims.d = cfg.d;
    dims.n_layers = cfg.layers;
    dims.heads = cfg.heads;
    dims.hidden1 = cfg.hidden1;
    dims.hidden2 = cfg.hidden2;
    Rng init_rng = Rng::stream(cfg.seed, 0);
    const Model fresh =
        Model::init(dims, LabelGraph::complete(3), cfg.inject_value(), init_rng);

    const auto got = out.model.named_parameters();
    const auto want = fresh.named_parameters();
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        INFO(got[i].first);
        CHECK(got[i].second.data() == want[i].second.data());
    }
    for (const EpochLog& e : out.log) CHECK(e.mean.total == 0.0);
}

TEST_CASE("same config and seed produce identical checkpoints and logs") {
    RunConfig cfg = fixture_config();
    cfg.epochs = 2;
    const TrainOutput a = train_model(cfg);
    const TrainOutput b = train_model(cfg);

    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].mean.total == b.log[i].mean.total);
        CHECK(a.log[i].mean.bce == b.log[i].mean.bce);
        CHECK(a.log[i].val_maf1 == b.log[i].val_maf1);
        CHECK(a.log[i].val_tau == b.log[i].val_tau);
    }
    CHECK(a.best_epoch == b.best_epoch);
    CHECK(a.rng_state == b.rng_state);

    // same basename in two directories so the manifests' payload references
    // are identical strings
    fs::create_directories(fixture_dir() + "/ra");
    fs::create_directories(fixture_dir() + "/rb");
    const std::string pa = fixture_dir() + "/ra/ck.json";
    const std::string pb = fixture_dir() + "/rb/ck.json";
    save_checkpoint(a.model, a.standardizer, cfg, a.best_epoch, a.rng_state,
                    a.best_val_maf1, a.dataset.label_names, pa);
    save_checkpoint(b.model, b.standardizer, cfg, b.best_epoch, b.rng_state,
                    b.best_val_maf1, b.dataset.label_names, pb);
    CHECK(read_file(pa) == read_file(pb));
    CHECK(read_file(pa + ".bin") == read_file(pb + ".bin"));
    CHECK(!read_file(pa + ".bin").empty());
}

TEST_CASE("checkpoint round-trip reproduces predictions bit-for-bit") {
    const TrainOutput& run = fixture_run();
    const RunConfig cfg = fixture_config();

    const std::string path = fixture_dir() + "/roundtrip.json";
    save_checkpoint(run.model, run.standardizer, cfg, run.best_epoch,
                    run.rng_state, run.best_val_maf1, run.dataset.label_names,
                    path);
    const LoadedCheckpoint loaded = load_checkpoint(path);

    CHECK(loaded.epoch == run.best_epoch);
    CHECK(loaded.best_val_maf1 == run.best_val_maf1);
    CHECK(loaded.rng_state == run.rng_state);
    CHECK(loaded.label_names == run.dataset.label_names);
    CHECK(loaded.config.lr == cfg.lr);
    CHECK(loaded.config.thresholds == cfg.thresholds);
    CHECK(loaded.config.graph_mode == cfg.graph_mode);
    CHECK(loaded.standardizer.mean == run.standardizer.mean);
    CHECK(loaded.standardizer.scale == run.standardizer.scale);
    CHECK(loaded.model.graph.adjacency == run.model.graph.adjacency);

    const PredictionSet before =
        predict_split(run.model, run.dataset, Split::test);
    const PredictionSet after =
        predict_split(loaded.model, run.dataset, Split::test);
    REQUIRE(before.probabilities.size() == after.probabilities.size());
    for (std::size_t i = 0; i < before.probabilities.size(); ++i) {
        CHECK(before.probabilities[i] == after.probabilities[i]);
    }

    // tampering with the manifest parameter list is caught
    const std::string bad = fixture_dir() + "/bad.json";
    std::string manifest = read_file(path);
    const std::size_t pos = manifest.find("decoder.Wy");
    REQUIRE(pos != std::string::npos);
    manifest.replace(pos, 10, "decoder.Wz");
    {
        std::ofstream out(bad);
        out << manifest;
    }
    {
        std::ofstream payload(bad + ".bin", std::ios::binary);
        payload << read_file(path + ".bin");
    }
    CHECK_THROWS_AS(load_checkpoint(bad), ParseError);
}

TEST_CASE("selected checkpoint is at least as good as the final epoch") {
    const TrainOutput& run = fixture_run();
    REQUIRE(!run.log.empty());
    CHECK(run.best_val_maf1 >= run.log.back().val_maf1);
    REQUIRE(run.best_epoch >= 1);
    REQUIRE(run.best_epoch <= run.log.size());
    CHECK(run.log[run.best_epoch - 1].val_maf1 == run.best_val_maf1);
    double best = -1.0;
    for (const EpochLog& e : run.log) best = std::max(best, e.val_maf1);
    CHECK(run.best_val_maf1 == best);
}

TEST_CASE("training batches do not change inference results") {
    const TrainOutput& run = fixture_run();
    const PredictionSet big =
        predict_split(run.model, run.dataset, Split::test, 1024);
    const PredictionSet small =
        predict_split(run.model, run.dataset, Split::test, 3);
    REQUIRE(big.probabilities.size() == small.probabilities.size());
    for (std::size_t i = 0; i < big.probabilities.size(); ++i) {
        CHECK(big.probabilities[i] == small.probabilities[i]);
    }
    CHECK(big.truth == small.truth);
}

TEST_CASE("saturated identity task evaluates to perfect test metrics") {
    const TrainOutput& run = fixture_run();
    REQUIRE(run.best_val_maf1 == 1.0);
    const MetricReport report =
        evaluate_model(run.model, run.dataset, fixture_config().thresholds);
    CHECK(report.ebf1 == 1.0);
    CHECK(report.mif1 == 1.0);
    CHECK(report.maf1 == 1.0);
    CHECK(report.ha == 1.0);
    REQUIRE(report.median_auc.has_value());
    CHECK(*report.median_auc == 1.0);
    CHECK(report.auc_labels_skipped == 0);
}

TEST_CASE("evaluate_model agrees with direct metric calls") {
    const TrainOutput& run = fixture_run();
    const std::vector<double>& grid = fixture_config().thresholds;
    const MetricReport report = evaluate_model(run.model, run.dataset, grid);

    const PredictionSet val = predict_split(run.model, run.dataset, Split::val);
    PredictionSet rep = predict_split(run.model, run.dataset, Split::test);

    for (const std::string& metric : threshold_metric_names()) {
        const double tau = select_threshold(val, metric, grid);
        CHECK(report.taus.at(metric) == tau);
        rep.apply_threshold(tau);
        double want = 0.0;
        if (metric == "ebF1") want = f1_scores(rep).ebf1;
        else if (metric == "miF1") want = f1_scores(rep).mif1;
        else if (metric == "maF1") want = f1_scores(rep).maf1;
        else want = hamming_accuracy(rep);
        CHECK(parse_row(report, metric) == want);
    }
    const AucSummary auc = auc_per_label(rep);
    CHECK(parse_row(report, "medianAUC") == auc.median);
    CHECK(parse_row(report, "auc_labels_skipped") ==
          static_cast<double>(auc.n_skipped));
}

TEST_CASE("metrics csv and loss log have the documented shape") {
    const TrainOutput& run = fixture_run();
    const MetricReport report =
        evaluate_model(run.model, run.dataset, fixture_config().thresholds,
                       Split::test, true, 7, 20, 30);

    const std::string mpath = fixture_dir() + "/metrics.csv";
    write_metrics_csv(report, mpath);
    std::ifstream min(mpath);
    std::string line;
    REQUIRE(std::getline(min, line));
    CHECK(line == "metric,value");
    std::vector<std::string> names;
    while (std::getline(min, line)) {
        names.push_back(line.substr(0, line.find(',')));
    }
    const std::vector<std::string> want_head = {
        "ebF1",     "miF1",   "maF1",    "HA",     "medianAUC",
        "auc_labels_skipped", "tau_ebF1", "tau_miF1", "tau_maF1", "tau_HA"};
    REQUIRE(names.size() == want_head.size() + 20);
    for (std::size_t i = 0; i < want_head.size(); ++i) {
        CHECK(names[i] == want_head[i]);
    }
    CHECK(names[want_head.size()] == "occurrence_accuracy");
    CHECK(names.back() == "community_nes_precision");

    const std::string lpath = fixture_dir() + "/loss_log.csv";
    write_loss_log(run.log, lpath);
    std::ifstream lin(lpath);
    REQUIRE(std::getline(lin, line));
    CHECK(line == "epoch,bce,intermediate,rank,kl,total,val_maF1,val_tau");
    std::size_t rows = 0;
    while (std::getline(lin, line)) {
        ++rows;
        if (rows == run.log.size()) {
            std::istringstream cells(line);
            std::string cell;
            std::getline(cells, cell, ',');
            CHECK(std::stoull(cell) == run.log.size());
            std::getline(cells, cell, ',');
            CHECK(std::stod(cell) == run.log.back().mean.bce);
        }
    }
    CHECK(rows == run.log.size());
}

TEST_CASE("fixture report matches the stored golden csv byte-for-byte") {
    const TrainOutput& run = fixture_run();
    const MetricReport report =
        evaluate_model(run.model, run.dataset, fixture_config().thresholds,
                       Split::test, true, 7, 20, 30);
    const std::string path = fixture_dir() + "/golden_check.csv";
    write_metrics_csv(report, path);
    CHECK(read_file(path) ==
          read_file(std::string(HOTVAE_TEST_DIR) + "/golden_metrics.csv"));
}

TEST_CASE("eco rows reproduce the standalone ecological report") {
    const TrainOutput& run = fixture_run();
    const std::vector<double>& grid = fixture_config().thresholds;
    const MetricReport report = evaluate_model(run.model, run.dataset, grid,
                                               Split::test, true, 7, 20, 30);

    const PredictionSet val = predict_split(run.model, run.dataset, Split::val);
    PredictionSet rep = predict_split(run.model, run.dataset, Split::test);
    rep.apply_threshold(select_threshold(val, "maF1", grid));
    const EcoReport eco = eco_report(rep, 7, 20, 30);

    CHECK(parse_row(report, "occurrence_accuracy") == eco.occurrence.accuracy);
    CHECK(parse_row(report, "richness_precision") == eco.richness.precision);
    CHECK(parse_row(report, "community_sor_accuracy") ==
          eco.community.sor.accuracy);
    CHECK(parse_row(report, "community_nes_calibration") ==
          eco.community.nes.calibration);
}

TEST_CASE("sixteen samples overfit to near-zero training BCE in 500 steps") {
    // 20 identity-task rows split 16/2/2 so each epoch is one optimizer step.
    RunConfig cfg = default_config();
    cfg.dataset = write_identity_csv("identity20.csv",
                                     {0, 1, 2, 3, 4, 5, 6, 7, 1, 2, 3, 4, 5, 6,
                                      7, 0, 3, 5, 6, 7},
                                     1);
    cfg.format = "csv";
    cfg.d = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.hidden1 = 32;
    cfg.hidden2 = 32;
    cfg.lr = 3e-3;
    cfg.lambda0 = 1.0;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    cfg.beta = 0.0;
    cfg.dropout = 0.0;
    cfg.epochs = 500;
    cfg.batch_size = 16;
    cfg.seed = 5;
    cfg.graph_mode = "complete";
    cfg.train_ratio = 0.8;
    cfg.val_ratio = 0.1;
    cfg.test_ratio = 0.1;

    const TrainOutput out = train_model(cfg);
    CHECK(out.log.back().mean.bce < 0.05);
}

TEST_CASE("depth ablation emits ascending rows that match evaluate") {
    RunConfig cfg = fixture_config();
    cfg.epochs = 3;

    const std::vector<AblationRow> rows = ablate_depth(cfg, {2, 1});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].key == "1");
    CHECK(rows[1].key == "2");
    for (const AblationRow& row : rows) {
        REQUIRE(row.ok);
        RunConfig run = cfg;
        run.layers = static_cast<std::size_t>(std::stoul(row.key));
        const TrainOutput t = train_model(run);
        const MetricReport r = evaluate_model(t.model, t.dataset, run.thresholds);
        CHECK(row.value == r.maf1);
        CHECK(row.text == format_double(r.maf1));
    }

    const std::vector<AblationRow> single = ablate_depth(cfg, {1});
    REQUIRE(single.size() == 1);
    CHECK(single[0].key == "1");

    const std::string path = fixture_dir() + "/ablation_depth.csv";
    write_ablation_csv(rows, "n,maF1", path);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "n,maF1");
    REQUIRE(std::getline(in, line));
    CHECK(line == "1," + rows[0].text);
}

TEST_CASE("graph ablation: all-co-occurring labels make prior equal complete") {
    RunConfig cfg = fixture_config();
    cfg.epochs = 3;

    // every label pair co-occurs in the fixture, so the prior graph is the
    // complete graph and both runs are the same computation
    const std::vector<AblationRow> rows = ablate_graph(cfg);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].key == "prior");
    CHECK(rows[1].key == "complete");
    REQUIRE(rows[0].ok);
    REQUIRE(rows[1].ok);
    CHECK(rows[0].value == rows[1].value);
    CHECK(rows[0].text == rows[1].text);

    RunConfig run = cfg;
    run.graph_mode = "complete";
    const TrainOutput t = train_model(run);
    const MetricReport r = evaluate_model(t.model, t.dataset, run.thresholds);
    REQUIRE(r.median_auc.has_value());
    CHECK(rows[1].value == *r.median_auc);
}

TEST_CASE("a never-co-occurring pair breaks exactly one prior edge") {
    // drop every combination where labels a and c are both on
    const std::string path = write_identity_csv(
        "no_cooccur.csv", {0, 1, 2, 3, 4, 6}, 8);
    const Dataset ds = load_dataset(path, DataFormat::csv);
    const LabelGraph prior =
        build_prior_graph(ds.labels, ds.n_samples, ds.n_labels);
    const LabelGraph complete = LabelGraph::complete(ds.n_labels);
    std::size_t diffs = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (prior.at(i, j) != complete.at(i, j)) {
                ++diffs;
                CHECK(((i == 0 && j == 2) || (i == 2 && j == 0)));
            }
        }
    }
    CHECK(diffs == 2);
}

TEST_CASE("prepare_dataset honours ratio and explicit-index configs") {
    RunConfig cfg = fixture_config();
    cfg.train_idx.clear();
    cfg.val_idx.clear();
    cfg.test_idx.clear();
    const Dataset by_ratio = prepare_dataset(cfg);
    CHECK(by_ratio.split_indices(Split::train).size() == 51);
    CHECK(by_ratio.split_indices(Split::val).size() == 6);
    CHECK(by_ratio.split_indices(Split::test).size() == 7);
    const Dataset again = prepare_dataset(cfg);
    CHECK(by_ratio.split == again.split);

    const std::string tr = fixture_dir() + "/tr.idx";
    const std::string va = fixture_dir() + "/va.idx";
    const std::string te = fixture_dir() + "/te.idx";
    {
        std::ofstream t(tr), v(va), s(te);
        for (int i = 0; i < 48; ++i) t << i << '\n';
        for (int i = 48; i < 56; ++i) v << i << '\n';
        for (int i = 56; i < 64; ++i) s << i << '\n';
    }
    cfg.train_idx = tr;
    cfg.val_idx = va;
    cfg.test_idx = te;
    const Dataset by_files = prepare_dataset(cfg);
    CHECK(by_files.split_indices(Split::train).size() == 48);
    CHECK(by_files.split_indices(Split::val).size() == 8);
    CHECK(by_files.split_indices(Split::test).size() == 8);
    CHECK(by_files.split[60] == Split::test);
}

TEST_CASE("error categories name the exception type") {
    CHECK(error_category(ShapeError("x")) == "ShapeError");
    CHECK(error_category(ParseError("x")) == "ParseError");
    CHECK(error_category(ValueError("x")) == "ValueError");
    CHECK(error_category(NumericError("x")) == "NumericError");
    CHECK(error_category(MetricUnavailable("x")) == "MetricUnavailable");
    CHECK(error_category(std::runtime_error("x")) == "Error");
}
