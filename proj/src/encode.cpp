#include "idu/encode.hpp"

#include "idu/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace idu::prep {

using ingest::ColumnKind;

namespace {

constexpr double kStdFloor = 1e-8;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw DataError("dataset file truncated reading " + what);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

}  // namespace

int EncoderSpec::output_width() const {
    int w = 0;
    for (const auto& c : columns) {
        if (c.action == ColumnAction::standardize) w += 1;
        else if (c.action == ColumnAction::one_hot) w += static_cast<int>(c.vocab.size());
    }
    return w;
}

std::vector<std::string> EncoderSpec::output_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns) {
        if (c.action == ColumnAction::standardize) names.push_back(c.name);
        else if (c.action == ColumnAction::one_hot)
            for (const auto& v : c.vocab) names.push_back(c.name + "=" + v);
    }
    return names;
}

int EncoderSpec::class_index(const std::string& name) const {
    auto it = std::find(class_names.begin(), class_names.end(), name);
    return it == class_names.end() ? -1 : static_cast<int>(it - class_names.begin());
}

std::string EncoderSpec::serialize() const {
    std::ostringstream out;
    out << "idu-encoder v1\n";
    for (const auto& c : class_names) out << "class " << c << "\n";
    for (const auto& col : columns) {
        switch (col.action) {
            case ColumnAction::drop:
                out << "column drop " << col.name << "\n";
                break;
            case ColumnAction::standardize:
                out << "column standardize " << col.name << "\n";
                out << "stats " << fmt_double(col.mean) << " " << fmt_double(col.std_dev) << "\n";
                break;
            case ColumnAction::one_hot:
                out << "column onehot " << col.name << "\n";
                for (const auto& v : col.vocab) out << "vocab " << v << "\n";
                break;
        }
    }
    out << "end\n";
    return out.str();
}

EncoderSpec EncoderSpec::deserialize(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "idu-encoder v1")
        throw DataError("encoder spec: bad header");
    EncoderSpec spec;
    spec.fitted = true;
    bool ended = false;
    while (std::getline(in, line)) {
        if (line.rfind("class ", 0) == 0) {
            spec.class_names.push_back(line.substr(6));
        } else if (line.rfind("column ", 0) == 0) {
            std::istringstream ls(line.substr(7));
            std::string action;
            ls >> action;
            std::string name;
            std::getline(ls, name);
            EncoderColumn col;
            col.name = trim(name);
            if (action == "drop") col.action = ColumnAction::drop;
            else if (action == "standardize") col.action = ColumnAction::standardize;
            else if (action == "onehot") col.action = ColumnAction::one_hot;
            else throw DataError("encoder spec: unknown action " + action);
            spec.columns.push_back(col);
        } else if (line.rfind("stats ", 0) == 0) {
            if (spec.columns.empty()) throw DataError("encoder spec: stats before column");
            std::istringstream ls(line.substr(6));
            ls >> spec.columns.back().mean >> spec.columns.back().std_dev;
            if (!ls) throw DataError("encoder spec: bad stats line");
        } else if (line.rfind("vocab ", 0) == 0) {
            if (spec.columns.empty()) throw DataError("encoder spec: vocab before column");
            spec.columns.back().vocab.push_back(line.substr(6));
        } else if (trim(line) == "end") {
            ended = true;
            break;
        } else if (!trim(line).empty()) {
            throw DataError("encoder spec: unexpected line: " + line);
        }
    }
    if (!ended) throw DataError("encoder spec: missing end marker (truncated?)");
    return spec;
}

void EncoderSpec::save(const std::string& path, const std::string& config_digest) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write encoder spec: " + path);
    if (!config_digest.empty()) out << "# config=" << config_digest << "\n";
    out << serialize();
}

EncoderSpec EncoderSpec::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open encoder spec: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    while (text.rfind("#", 0) == 0) {
        const auto nl = text.find('\n');
        if (nl == std::string::npos) break;
        text.erase(0, nl + 1);
    }
    return deserialize(text);
}

std::string EncoderSpec::digest() const { return digest_hex(serialize()); }

std::vector<long> EncodedDataset::class_counts() const {
    std::vector<long> counts(class_names.size(), 0);
    for (int label : labels) counts.at(label)++;
    return counts;
}

FitResult fit_encoder(const std::vector<ingest::FlowRecord>& records,
                      const ingest::DatasetSchema& schema, const std::vector<std::string>& row_labels) {
    if (records.empty()) throw DataError("fit_encoder: empty training set");
    if (records.size() != row_labels.size())
        throw UsageError("fit_encoder: records and labels disagree in length");

    FitResult result;
    EncoderSpec& spec = result.spec;

    std::set<std::string> classes(row_labels.begin(), row_labels.end());
    spec.class_names.assign(classes.begin(), classes.end());  // lexicographic

    for (size_t ci = 0; ci < schema.columns.size(); ++ci) {
        const auto& sc = schema.columns[ci];
        EncoderColumn col;
        col.name = sc.name;
        if (sc.kind == ColumnKind::label || sc.kind == ColumnKind::ignored) {
            col.action = ColumnAction::drop;
        } else if (sc.kind == ColumnKind::categorical) {
            col.action = ColumnAction::one_hot;
            std::set<std::string> vocab;
            for (const auto& rec : records) vocab.insert(rec.values[ci]);
            col.vocab.assign(vocab.begin(), vocab.end());
        } else {
            double sum = 0.0, sumsq = 0.0;
            long n = 0;
            for (const auto& rec : records) {
                double v;
                if (parse_number(rec.values[ci], v) && std::isfinite(v)) {
                    sum += v;
                    sumsq += v * v;
                    ++n;
                }
            }
            if (n == 0) {
                col.action = ColumnAction::drop;
                result.warnings.push_back("column \"" + sc.name + "\" has no finite values; dropped");
            } else {
                col.action = ColumnAction::standardize;
                col.mean = sum / n;
                const double var = std::max(0.0, sumsq / n - col.mean * col.mean);
                col.std_dev = std::max(std::sqrt(var), kStdFloor);
            }
        }
        spec.columns.push_back(std::move(col));
    }
    spec.fitted = true;
    return result;
}

EncodedDataset transform(const std::vector<ingest::FlowRecord>& records,
                         const std::vector<std::string>& row_labels, const EncoderSpec& spec) {
    if (!spec.fitted) throw UsageError("transform: encoder spec not fitted");
    if (records.size() != row_labels.size())
        throw UsageError("transform: records and labels disagree in length");

    const int d = spec.output_width();
    const int C = static_cast<int>(spec.class_names.size());
    const long N = static_cast<long>(records.size());

    EncodedDataset ds;
    ds.column_names = spec.output_names();
    ds.class_names = spec.class_names;
    ds.provenance.encoder_digest = spec.digest();
    ds.labels.resize(N);
    ds.X.dims = {static_cast<int>(N), d};
    ds.X.data.assign(static_cast<size_t>(N) * d, 0.0f);
    ds.Y.dims = {static_cast<int>(N), C};
    ds.Y.data.assign(static_cast<size_t>(N) * C, 0.0f);
    if (N == 0) return ds;

    for (long r = 0; r < N; ++r) {
        const int cls = spec.class_index(row_labels[r]);
        if (cls < 0) throw DataError("transform: label \"" + row_labels[r] + "\" not in encoder class set");
        if (records[r].values.size() != spec.columns.size())
            throw DataError("transform: row width mismatch at line " + std::to_string(records[r].line));
        ds.labels[r] = cls;
        ds.Y.data[static_cast<size_t>(r) * C + cls] = 1.0f;
    }

#pragma omp parallel for schedule(static) if (core::parallel_enabled())
    for (long r = 0; r < N; ++r) {
        const auto& cells = records[r].values;
        float* out = ds.X.data.data() + static_cast<size_t>(r) * d;
        int o = 0;
        for (size_t ci = 0; ci < spec.columns.size(); ++ci) {
            const auto& col = spec.columns[ci];
            if (col.action == ColumnAction::drop) continue;
            if (col.action == ColumnAction::standardize) {
                double v;
                if (parse_number(cells[ci], v) && std::isfinite(v))
                    out[o] = static_cast<float>((v - col.mean) / col.std_dev);
                else
                    out[o] = 0.0f;  // missing value sits at the column mean
                ++o;
            } else {
                auto it = std::lower_bound(col.vocab.begin(), col.vocab.end(), cells[ci]);
                if (it != col.vocab.end() && *it == cells[ci])
                    out[o + static_cast<int>(it - col.vocab.begin())] = 1.0f;
                o += static_cast<int>(col.vocab.size());
            }
        }
    }
    ds.X.ensure_finite("transform");
    return ds;
}

std::pair<std::vector<long>, std::vector<long>> split_indices(
    const std::vector<int>& labels, const std::vector<std::string>& class_names, double ratio,
    bool stratified, uint64_t seed, std::vector<std::string>* warnings) {
    if (ratio <= 0.0 || ratio >= 1.0) throw ConfigError("split: ratio must be in (0,1)");
    const long N = static_cast<long>(labels.size());
    if (N < 2) throw DataError("split: need at least 2 rows");

    std::vector<long> train_idx, test_idx;
    Rng rng(seed);
    if (!stratified) {
        std::vector<long> idx(N);
        for (long i = 0; i < N; ++i) idx[i] = i;
        rng.shuffle(idx);
        const long n_train = std::lround(ratio * static_cast<double>(N));
        train_idx.assign(idx.begin(), idx.begin() + n_train);
        test_idx.assign(idx.begin() + n_train, idx.end());
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
    } else {
        std::map<int, std::vector<long>> by_class;
        for (long i = 0; i < N; ++i) by_class[labels[i]].push_back(i);
        for (auto& [cls, idx] : by_class) {
            rng.shuffle(idx);
            long n_train = std::lround(ratio * static_cast<double>(idx.size()));
            if (idx.size() == 1) {
                n_train = 1;
                if (warnings)
                    warnings->push_back("class \"" + class_names.at(cls) + "\" has a single sample; kept in train");
            }
            train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
            test_idx.insert(test_idx.end(), idx.begin() + n_train, idx.end());
        }
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
    }
    return {std::move(train_idx), std::move(test_idx)};
}

EncodedDataset take_rows(const EncodedDataset& ds, const std::vector<long>& idx) {
    EncodedDataset out;
    out.column_names = ds.column_names;
    out.class_names = ds.class_names;
    out.provenance = ds.provenance;
    const int d = ds.width(), C = ds.n_classes();
    out.X.dims = {static_cast<int>(idx.size()), d};
    out.Y.dims = {static_cast<int>(idx.size()), C};
    out.X.data.resize(idx.size() * static_cast<size_t>(d));
    out.Y.data.resize(idx.size() * static_cast<size_t>(C));
    out.labels.resize(idx.size());
    for (size_t r = 0; r < idx.size(); ++r) {
        std::memcpy(out.X.data.data() + r * d, ds.X.data.data() + static_cast<size_t>(idx[r]) * d,
                    sizeof(float) * d);
        std::memcpy(out.Y.data.data() + r * C, ds.Y.data.data() + static_cast<size_t>(idx[r]) * C,
                    sizeof(float) * C);
        out.labels[r] = ds.labels.at(idx[r]);
    }
    return out;
}

std::pair<EncodedDataset, EncodedDataset> split(const EncodedDataset& ds, double ratio, bool stratified,
                                               uint64_t seed, std::vector<std::string>* warnings) {
    auto [train_idx, test_idx] = split_indices(ds.labels, ds.class_names, ratio, stratified, seed, warnings);
    return {take_rows(ds, train_idx), take_rows(ds, test_idx)};
}

EncodedDataset stratified_fraction(const EncodedDataset& ds, double fraction, uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("fraction must be in (0,1]");
    if (fraction == 1.0) return ds;
    std::map<int, std::vector<long>> by_class;
    for (long i = 0; i < ds.rows(); ++i) by_class[ds.labels[i]].push_back(i);
    Rng rng(seed);
    std::vector<long> keep;
    for (auto& [cls, idx] : by_class) {
        rng.shuffle(idx);
        const long n = std::lround(fraction * static_cast<double>(idx.size()));
        if (n == 0)
            throw DataError("fraction " + std::to_string(fraction) + " empties class \"" +
                            ds.class_names.at(cls) + "\"");
        keep.insert(keep.end(), idx.begin(), idx.begin() + n);
    }
    std::sort(keep.begin(), keep.end());
    return take_rows(ds, keep);
}

EncodedDataset resample(const EncodedDataset& train, double floor_fraction, uint64_t seed) {
    if (floor_fraction <= 0.0 || floor_fraction > 1.0)
        throw ConfigError("resample: floor_fraction must be in (0,1]");
    const auto counts = train.class_counts();
    long majority = 0;
    for (size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0)
            throw DataError("resample: class \"" + train.class_names[c] + "\" has no samples");
        majority = std::max(majority, counts[c]);
    }
    const long floor_count = static_cast<long>(std::ceil(floor_fraction * static_cast<double>(majority) - 1e-9));

    std::map<int, std::vector<long>> by_class;
    for (long i = 0; i < train.rows(); ++i) by_class[train.labels[i]].push_back(i);

    std::vector<long> extra;  // synthesized rows, copies of originals
    Rng rng(seed);
    for (auto& [cls, idx] : by_class) {
        const long need = floor_count - static_cast<long>(idx.size());
        for (long k = 0; k < need; ++k)
            extra.push_back(idx[rng.uniform_u64(idx.size())]);
    }

    const int d = train.width(), C = train.n_classes();
    EncodedDataset out;
    out.column_names = train.column_names;
    out.class_names = train.class_names;
    out.provenance = train.provenance;
    const long M = train.rows() + static_cast<long>(extra.size());
    out.X.dims = {static_cast<int>(M), d};
    out.Y.dims = {static_cast<int>(M), C};
    out.X.data.resize(static_cast<size_t>(M) * d);
    out.Y.data.resize(static_cast<size_t>(M) * C);
    out.labels.resize(M);
    std::memcpy(out.X.data.data(), train.X.data.data(), sizeof(float) * train.X.data.size());
    std::memcpy(out.Y.data.data(), train.Y.data.data(), sizeof(float) * train.Y.data.size());
    std::copy(train.labels.begin(), train.labels.end(), out.labels.begin());
    for (size_t k = 0; k < extra.size(); ++k) {
        const size_t r = train.rows() + k;
        std::memcpy(out.X.data.data() + r * d, train.X.data.data() + static_cast<size_t>(extra[k]) * d,
                    sizeof(float) * d);
        std::memcpy(out.Y.data.data() + r * C, train.Y.data.data() + static_cast<size_t>(extra[k]) * C,
                    sizeof(float) * C);
        out.labels[r] = train.labels[extra[k]];
    }
    return out;
}

void save_dataset(const std::string& path, const EncodedDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset: " + path);
    nlohmann::json meta{{"schema", ds.provenance.schema},
                        {"task", ds.provenance.task},
                        {"class_names", ds.class_names},
                        {"column_names", ds.column_names},
                        {"seed", ds.provenance.seed},
                        {"config_digest", ds.provenance.config_digest},
                        {"encoder_digest", ds.provenance.encoder_digest},
                        {"source_digest", ds.provenance.source_digest},
                        {"source_path", ds.provenance.source_path},
                        {"feature_digest", ds.provenance.feature_digest}};
    const std::string meta_str = meta.dump();
    out.write("IDUE", 4);
    put_u32(out, 1);
    put_u32(out, static_cast<uint32_t>(meta_str.size()));
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    put_u32(out, static_cast<uint32_t>(ds.rows()));
    put_u32(out, static_cast<uint32_t>(ds.width()));
    put_u32(out, static_cast<uint32_t>(ds.n_classes()));
    out.write(reinterpret_cast<const char*>(ds.X.data.data()),
              static_cast<std::streamsize>(sizeof(float) * ds.X.data.size()));
    for (int label : ds.labels) put_u32(out, static_cast<uint32_t>(label));
    if (!out) throw DataError("failed writing dataset: " + path);
}

EncodedDataset load_dataset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset: " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "IDUE", 4) != 0)
        throw DataError(path + ": not an IDUE dataset file");
    const uint32_t version = get_u32(in, "version");
    if (version != 1) throw DataError(path + ": unsupported dataset version " + std::to_string(version));
    const uint32_t meta_len = get_u32(in, "metadata length");
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), meta_len);
    if (in.gcount() != static_cast<std::streamsize>(meta_len)) throw DataError(path + ": truncated metadata");
    nlohmann::json meta = nlohmann::json::parse(meta_str);

    EncodedDataset ds;
    ds.class_names = meta.at("class_names").get<std::vector<std::string>>();
    ds.column_names = meta.at("column_names").get<std::vector<std::string>>();
    ds.provenance.schema = meta.value("schema", "");
    ds.provenance.task = meta.value("task", "class");
    ds.provenance.seed = meta.value("seed", uint64_t{0});
    ds.provenance.config_digest = meta.value("config_digest", "");
    ds.provenance.encoder_digest = meta.value("encoder_digest", "");
    ds.provenance.source_digest = meta.value("source_digest", "");
    ds.provenance.source_path = meta.value("source_path", "");
    ds.provenance.feature_digest = meta.value("feature_digest", "");

    const uint32_t N = get_u32(in, "row count");
    const uint32_t d = get_u32(in, "width");
    const uint32_t C = get_u32(in, "class count");
    ds.X.dims = {static_cast<int>(N), static_cast<int>(d)};
    ds.X.data.resize(static_cast<size_t>(N) * d);
    in.read(reinterpret_cast<char*>(ds.X.data.data()),
            static_cast<std::streamsize>(sizeof(float) * ds.X.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(float) * ds.X.data.size()))
        throw DataError(path + ": truncated matrix");
    ds.labels.resize(N);
    ds.Y.dims = {static_cast<int>(N), static_cast<int>(C)};
    ds.Y.data.assign(static_cast<size_t>(N) * C, 0.0f);
    for (uint32_t r = 0; r < N; ++r) {
        const uint32_t label = get_u32(in, "label");
        if (label >= C) throw DataError(path + ": label index out of range");
        ds.labels[r] = static_cast<int>(label);
        ds.Y.data[static_cast<size_t>(r) * C + label] = 1.0f;
    }
    return ds;
}

}  // namespace idu::prep
