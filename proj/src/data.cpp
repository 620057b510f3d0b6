#include "hotvae/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hotvae {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& field, const std::string& path,
                    std::size_t line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": not a number: '" + field + "'");
    }
    if (used != field.size()) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": trailing characters in number: '" + field + "'");
    }
    if (!std::isfinite(v)) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": non-finite feature value: '" + field + "'");
    }
    return v;
}

std::uint8_t parse_label(double v, const std::string& path, std::size_t line_no) {
    if (v == 0.0) return 0;
    if (v == 1.0) return 1;
    std::ostringstream msg;
    msg << path << ":" << line_no << ": label value " << v
        << " is not 0 or 1";
    throw ValueError(msg.str());
}

bool starts_with_ci(const std::string& s, const std::string& prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

std::string attribute_name(const std::string& decl, const std::string& path,
                           std::size_t line_no) {
    // decl is the text after "@attribute"; the name is the first token,
    // optionally single-quoted.
    std::string rest = trim(decl);
    if (rest.empty()) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": attribute declaration without a name");
    }
    if (rest.front() == '\'') {
        const std::size_t close = rest.find('\'', 1);
        if (close == std::string::npos) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": unterminated quoted attribute name");
        }
        return rest.substr(1, close - 1);
    }
    std::size_t end = 0;
    while (end < rest.size() &&
           !std::isspace(static_cast<unsigned char>(rest[end]))) {
        ++end;
    }
    return rest.substr(0, end);
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);

    Dataset ds;
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    ++line_no;
    const std::string kPrefix = "label:";
    std::vector<bool> is_label_col;
    for (const std::string& col : split_commas(trim(line))) {
        if (col.rfind(kPrefix, 0) == 0) {
            is_label_col.push_back(true);
            ds.label_names.push_back(col.substr(kPrefix.size()));
        } else {
            is_label_col.push_back(false);
            ds.feature_names.push_back(col);
        }
    }
    ds.n_features = ds.feature_names.size();
    ds.n_labels = ds.label_names.size();

    while (std::getline(in, line)) {
        ++line_no;
        const std::string row = trim(line);
        if (row.empty()) continue;
        const std::vector<std::string> fields = split_commas(row);
        if (fields.size() != is_label_col.size()) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(is_label_col.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const double v = parse_double(fields[c], path, line_no);
            if (is_label_col[c]) {
                ds.labels.push_back(parse_label(v, path, line_no));
            } else {
                ds.features.push_back(v);
            }
        }
        ++ds.n_samples;
    }
    ds.split.assign(ds.n_samples, Split::train);
    return ds;
}

Dataset load_arff(const std::string& path, std::size_t num_labels) {
    if (num_labels == 0) {
        throw ValueError("arff loading requires a positive label count");
    }
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);

    std::vector<std::string> attr_names;
    std::string line;
    std::size_t line_no = 0;
    bool in_data = false;

    Dataset ds;
    std::vector<double> row;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '%') continue;

        if (!in_data) {
            if (starts_with_ci(text, "@relation")) continue;
            if (starts_with_ci(text, "@attribute")) {
                attr_names.push_back(attribute_name(text.substr(10), path, line_no));
                continue;
            }
            if (starts_with_ci(text, "@data")) {
                if (attr_names.size() <= num_labels) {
                    throw ParseError(path + ":" + std::to_string(line_no) + ": " +
                                     std::to_string(attr_names.size()) +
                                     " attributes cannot hold " +
                                     std::to_string(num_labels) + " labels");
                }
                ds.n_features = attr_names.size() - num_labels;
                ds.n_labels = num_labels;
                ds.feature_names.assign(attr_names.begin(),
                                        attr_names.begin() + ds.n_features);
                ds.label_names.assign(attr_names.begin() + ds.n_features,
                                      attr_names.end());
                in_data = true;
                continue;
            }
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": unexpected header line: '" + text + "'");
        }

        const std::size_t total = attr_names.size();
        row.assign(total, 0.0);
        if (text.front() == '{') {
            if (text.back() != '}') {
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": sparse row missing closing brace");
            }
            const std::string body = trim(text.substr(1, text.size() - 2));
            std::vector<bool> seen(total, false);
            if (!body.empty()) {
                for (const std::string& entry : split_commas(body)) {
                    std::istringstream es(entry);
                    long long idx = -1;
                    std::string value_text;
                    if (!(es >> idx >> value_text) || !(es >> std::ws).eof()) {
                        throw ParseError(path + ":" + std::to_string(line_no) +
                                         ": bad sparse entry: '" + entry + "'");
                    }
                    if (idx < 0 || static_cast<std::size_t>(idx) >= total) {
                        throw ParseError(path + ":" + std::to_string(line_no) +
                                         ": sparse index " + std::to_string(idx) +
                                         " out of range for " +
                                         std::to_string(total) + " attributes");
                    }
                    if (seen[static_cast<std::size_t>(idx)]) {
                        throw ParseError(path + ":" + std::to_string(line_no) +
                                         ": duplicate sparse index " +
                                         std::to_string(idx));
                    }
                    seen[static_cast<std::size_t>(idx)] = true;
                    row[static_cast<std::size_t>(idx)] =
                        parse_double(value_text, path, line_no);
                }
            }
        } else {
            const std::vector<std::string> fields = split_commas(text);
            if (fields.size() != total) {
                throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(total) + " values, got " +
                                 std::to_string(fields.size()));
            }
            for (std::size_t c = 0; c < total; ++c) {
                row[c] = parse_double(fields[c], path, line_no);
            }
        }

        for (std::size_t c = 0; c < ds.n_features; ++c) {
            ds.features.push_back(row[c]);
        }
        for (std::size_t c = ds.n_features; c < total; ++c) {
            ds.labels.push_back(parse_label(row[c], path, line_no));
        }
        ++ds.n_samples;
    }
    if (!in_data) throw ParseError(path + ": no @data section");
    ds.split.assign(ds.n_samples, Split::train);
    return ds;
}

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace

std::vector<std::size_t> Dataset::split_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n_samples; ++i) {
        if (split[i] == s) out.push_back(i);
    }
    return out;
}

Dataset load_dataset(const std::string& path, DataFormat format,
                     std::size_t num_labels) {
    Dataset ds = format == DataFormat::csv ? load_csv(path)
                                           : load_arff(path, num_labels);
    std::size_t slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const std::size_t dot = base.find_last_of('.');
    if (dot != std::string::npos) base = base.substr(0, dot);
    ds.name = base;
    return ds;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValueError("cannot open file for writing: " + path);
    for (std::size_t j = 0; j < ds.n_features; ++j) {
        if (j) out << ',';
        out << ds.feature_names[j];
    }
    for (std::size_t j = 0; j < ds.n_labels; ++j) {
        if (ds.n_features + j) out << ',';
        out << "label:" << ds.label_names[j];
    }
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < ds.n_samples; ++i) {
        for (std::size_t j = 0; j < ds.n_features; ++j) {
            if (j) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", ds.feature_at(i, j));
            out << buf;
        }
        for (std::size_t j = 0; j < ds.n_labels; ++j) {
            if (ds.n_features + j) out << ',';
            out << static_cast<int>(ds.label_at(i, j));
        }
        out << '\n';
    }
}

Standardizer fit_standardizer(const Dataset& ds) {
    const std::vector<std::size_t> train = ds.split_indices(Split::train);
    if (train.empty()) throw ValueError("fit_standardizer: train split is empty");

    Standardizer st;
    st.mean.assign(ds.n_features, 0.0);
    st.scale.assign(ds.n_features, 1.0);
    const double n = static_cast<double>(train.size());

    for (std::size_t j = 0; j < ds.n_features; ++j) {
        bool binary = true;
        double sum = 0.0;
        for (std::size_t i : train) {
            const double v = ds.feature_at(i, j);
            if (v != 0.0 && v != 1.0) binary = false;
            sum += v;
        }
        if (binary) continue;
        const double mean = sum / n;
        double sq = 0.0;
        for (std::size_t i : train) {
            const double d = ds.feature_at(i, j) - mean;
            sq += d * d;
        }
        const double std_dev = std::sqrt(sq / n);
        st.mean[j] = mean;
        st.scale[j] = std_dev < 1e-12 ? 1.0 : std_dev;
    }
    return st;
}

Dataset apply_standardizer(const Dataset& ds, const Standardizer& st) {
    if (st.mean.size() != ds.n_features || st.scale.size() != ds.n_features) {
        throw ShapeError("apply_standardizer: standardizer has " +
                         std::to_string(st.mean.size()) + " columns, dataset has " +
                         std::to_string(ds.n_features));
    }
    Dataset out = ds;
    for (std::size_t i = 0; i < out.n_samples; ++i) {
        for (std::size_t j = 0; j < out.n_features; ++j) {
            double& v = out.features[i * out.n_features + j];
            v = (v - st.mean[j]) / st.scale[j];
        }
    }
    return out;
}

Dataset standardize(const Dataset& ds) {
    return apply_standardizer(ds, fit_standardizer(ds));
}

LabelStats label_stats(const Dataset& ds) {
    if (ds.n_samples == 0) throw ValueError("label_stats: empty dataset");
    LabelStats stats;
    stats.samples_per_label.assign(ds.n_labels, 0);

    std::vector<double> per_sample(ds.n_samples, 0.0);
    for (std::size_t i = 0; i < ds.n_samples; ++i) {
        for (std::size_t j = 0; j < ds.n_labels; ++j) {
            if (ds.label_at(i, j)) {
                per_sample[i] += 1.0;
                ++stats.samples_per_label[j];
            }
        }
    }
    const double total =
        std::accumulate(per_sample.begin(), per_sample.end(), 0.0);
    stats.mean_labels_per_sample = total / static_cast<double>(ds.n_samples);
    stats.median_labels_per_sample = median_of(per_sample);
    stats.max_labels_per_sample =
        *std::max_element(per_sample.begin(), per_sample.end());

    std::vector<double> per_label(stats.samples_per_label.begin(),
                                  stats.samples_per_label.end());
    if (!per_label.empty()) {
        stats.mean_samples_per_label =
            std::accumulate(per_label.begin(), per_label.end(), 0.0) /
            static_cast<double>(per_label.size());
        stats.median_samples_per_label = median_of(per_label);
        stats.max_samples_per_label =
            *std::max_element(per_label.begin(), per_label.end());
    }
    return stats;
}

Dataset make_splits(const Dataset& ds, const SplitRatios& ratios,
                    std::uint64_t seed) {
    const double sum = ratios.train + ratios.val + ratios.test;
    if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0 ||
        std::fabs(sum - 1.0) > 1e-9) {
        throw ValueError("make_splits: ratios must be nonnegative and sum to 1");
    }
    const std::size_t n = ds.n_samples;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    std::size_t n_train = static_cast<std::size_t>(
        std::llround(ratios.train * static_cast<double>(n)));
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(ratios.val * static_cast<double>(n)));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);

    Dataset out = ds;
    out.split.assign(n, Split::test);
    for (std::size_t k = 0; k < n_train; ++k) out.split[order[k]] = Split::train;
    for (std::size_t k = n_train; k < n_train + n_val; ++k) {
        out.split[order[k]] = Split::val;
    }
    return out;
}

std::vector<std::size_t> read_index_file(const std::string& path,
                                         std::size_t n_samples) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    std::vector<std::size_t> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty()) continue;
        std::size_t used = 0;
        long long idx = -1;
        try {
            idx = std::stoll(text, &used);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": not an integer: '" + text + "'");
        }
        if (used != text.size()) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": trailing characters: '" + text + "'");
        }
        if (idx < 0 || static_cast<std::size_t>(idx) >= n_samples) {
            throw ValueError(path + ":" + std::to_string(line_no) + ": index " +
                             std::to_string(idx) + " out of range for " +
                             std::to_string(n_samples) + " samples");
        }
        out.push_back(static_cast<std::size_t>(idx));
    }
    return out;
}

Dataset make_splits(const Dataset& ds, const std::string& train_path,
                    const std::string& val_path, const std::string& test_path) {
    Dataset out = ds;
    constexpr std::uint8_t kUnassigned = 255;
    std::vector<std::uint8_t> mark(ds.n_samples, kUnassigned);

    const auto assign = [&](const std::string& path, Split s) {
        for (std::size_t idx : read_index_file(path, ds.n_samples)) {
            if (mark[idx] != kUnassigned) {
                throw ValueError("make_splits: sample " + std::to_string(idx) +
                                 " appears in more than one split file");
            }
            mark[idx] = static_cast<std::uint8_t>(s);
        }
    };
    assign(train_path, Split::train);
    assign(val_path, Split::val);
    assign(test_path, Split::test);

    for (std::size_t i = 0; i < ds.n_samples; ++i) {
        if (mark[i] == kUnassigned) {
            throw ValueError("make_splits: sample " + std::to_string(i) +
                             " is missing from the split files");
        }
        out.split[i] = static_cast<Split>(mark[i]);
    }
    return out;
}

std::vector<double> gather_features(const Dataset& ds,
                                    const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size() * ds.n_features);
    for (std::size_t i : rows) {
        const double* base = ds.features.data() + i * ds.n_features;
        out.insert(out.end(), base, base + ds.n_features);
    }
    return out;
}

std::vector<double> gather_labels(const Dataset& ds,
                                  const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    out.reserve(rows.size() * ds.n_labels);
    for (std::size_t i : rows) {
        for (std::size_t j = 0; j < ds.n_labels; ++j) {
            out.push_back(static_cast<double>(ds.label_at(i, j)));
        }
    }
    return out;
}

std::vector<std::uint8_t> gather_labels_u8(const Dataset& ds,
                                           const std::vector<std::size_t>& rows) {
    std::vector<std::uint8_t> out;
    out.reserve(rows.size() * ds.n_labels);
    for (std::size_t i : rows) {
        const std::uint8_t* base = ds.labels.data() + i * ds.n_labels;
        out.insert(out.end(), base, base + ds.n_labels);
    }
    return out;
}

} // namespace hotvae
