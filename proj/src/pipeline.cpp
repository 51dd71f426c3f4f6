#include "idu/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

namespace idu::pipe {

namespace fs = std::filesystem;
using ingest::AttackClass;
using ingest::Role;

namespace {

double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct LabeledRecords {
    std::vector<ingest::FlowRecord> records;
    std::vector<std::string> labels;  // class or role names
    ingest::DatasetSchema schema;
    ingest::RejectReport rejects;
    long dropped_excluded = 0;
    std::vector<std::string> warnings;
};

// Ingests a raw dataset file and maps every row's tag to a class (and role
// when asked); Excluded-role rows are dropped for the role task.
LabeledRecords ingest_and_label(const Options& opt, const std::string& path) {
    LabeledRecords out;
    const auto schema_name = ingest::schema_name_from_str(opt.schema_name);
    ingest::MappingFile overrides;
    if (!opt.map_file.empty()) overrides = ingest::load_mapping_file(opt.map_file);
    const auto label_map = ingest::label_map_with_overrides(schema_name, overrides);
    const auto role_map = ingest::role_map_with_overrides(overrides);
    const bool role_task = opt.task == "role";

    switch (schema_name) {
        case ingest::SchemaName::kdd99: out.schema = ingest::kdd99_schema(); break;
        case ingest::SchemaName::nslkdd: out.schema = ingest::nslkdd_schema(); break;
        case ingest::SchemaName::cicids2017:
            out.schema = ingest::cicids2017_schema(ingest::read_csv_header(path));
            break;
        case ingest::SchemaName::synergistic:
            throw ConfigError("schema synergistic is produced by --join-ueba, not ingested directly");
    }

    auto loaded = ingest::load_dataset(path, out.schema);
    out.rejects = loaded.rejects;
    const int label_col = out.schema.label_index();
    out.records.reserve(loaded.records.size());
    for (auto& rec : loaded.records) {
        const AttackClass cls = label_map.map_tag(rec.values[label_col]);
        if (role_task) {
            const Role role = role_map.map_class(cls);
            if (role == Role::Excluded) {
                ++out.dropped_excluded;
                continue;
            }
            out.labels.push_back(ingest::role_str(role));
        } else {
            out.labels.push_back(ingest::class_str(cls));
        }
        out.records.push_back(std::move(rec));
    }
    out.records.shrink_to_fit();
    return out;
}

// Runs the ueba join and returns the synergistic records re-ingested through
// the CSV interface, so the in-memory path and the file path are identical.
LabeledRecords join_and_label(const Options& opt, uint64_t seed, const std::string& csv_out) {
    const auto schema_name = ingest::schema_name_from_str(opt.schema_name);
    ingest::MappingFile overrides;
    if (!opt.map_file.empty()) overrides = ingest::load_mapping_file(opt.map_file);
    const auto label_map = ingest::label_map_with_overrides(schema_name, overrides);
    const auto role_map = ingest::role_map_with_overrides(overrides);

    ingest::DatasetSchema base;
    switch (schema_name) {
        case ingest::SchemaName::kdd99: base = ingest::kdd99_schema(); break;
        case ingest::SchemaName::nslkdd: base = ingest::nslkdd_schema(); break;
        case ingest::SchemaName::cicids2017:
            base = ingest::cicids2017_schema(ingest::read_csv_header(opt.data_path));
            break;
        default: throw ConfigError("join: unsupported base schema");
    }

    auto loaded = ingest::load_dataset(opt.data_path, base);
    ingest::RejectReport base_rejects = loaded.rejects;
    const int label_col = base.label_index();
    std::vector<int> feature_cols;
    std::vector<std::string> feature_names;
    for (size_t i = 0; i < base.columns.size(); ++i)
        if (base.columns[i].kind == ingest::ColumnKind::categorical ||
            base.columns[i].kind == ingest::ColumnKind::numeric) {
            feature_cols.push_back(static_cast<int>(i));
            feature_names.push_back(base.columns[i].name);
        }

    std::vector<ueba::LabeledFlow> flows;
    flows.reserve(loaded.records.size());
    for (const auto& rec : loaded.records) {
        ueba::LabeledFlow f;
        f.cls = label_map.map_tag(rec.values[label_col]);
        for (int c : feature_cols) f.features.push_back(rec.values[c]);
        flows.push_back(std::move(f));
    }

    ueba::UebaConfig ucfg;
    ucfg.n_users = opt.ueba_users;
    ucfg.sessions_per_user = opt.ueba_sessions;
    ucfg.malicious_fraction = opt.ueba_malicious;
    ucfg.seed = seed;
    const auto sessions = ueba::sessionize(ueba::generate_users(ucfg));

    ueba::JoinPolicy policy;
    policy.total = opt.join_total;
    policy.benign_malicious_fraction = opt.join_benign_malicious;
    policy.allow_recycle = opt.join_recycle;
    auto joined = ueba::join_synergistic(flows, sessions, policy, role_map, seed);

    const std::string csv_path = csv_out.empty() ? (fs::temp_directory_path() /
                                                    ("idu_synergistic_" + std::to_string(::getpid()) + "_" +
                                                     std::to_string(seed) + ".csv"))
                                                       .string()
                                                 : csv_out;
    ueba::write_synergistic_csv(csv_path, joined.records, feature_names, opt.digest());

    const bool role_task = opt.task == "role";
    const auto header = ingest::read_csv_header(csv_path);
    LabeledRecords out;
    out.warnings = std::move(joined.warnings);
    out.rejects = std::move(base_rejects);
    out.schema = ingest::synergistic_schema(base, header, role_task);
    auto reloaded = ingest::load_dataset(csv_path, out.schema);
    const int syn_label_col = out.schema.label_index();
    for (auto& rec : reloaded.records) {
        out.labels.push_back(rec.values[syn_label_col]);
        out.records.push_back(std::move(rec));
    }
    if (csv_out.empty()) fs::remove(csv_path);
    return out;
}

}  // namespace

std::map<std::string, std::string> Options::flat() const {
    std::map<std::string, std::string> m;
    m["data"] = data_path;
    m["schema"] = schema_name;
    m["task"] = task;
    m["map-file"] = map_file;
    m["join-ueba"] = join_ueba ? "true" : "false";
    m["ueba-users"] = std::to_string(ueba_users);
    m["ueba-sessions"] = std::to_string(ueba_sessions);
    m["ueba-malicious"] = fmt(ueba_malicious);
    m["join-total"] = std::to_string(join_total);
    m["join-benign-malicious"] = fmt(join_benign_malicious);
    m["join-recycle"] = join_recycle ? "true" : "false";
    m["split-ratio"] = fmt(split_ratio);
    m["resample-floor"] = fmt(resample_floor);
    m["trees"] = std::to_string(trees);
    m["max-depth"] = std::to_string(max_depth);
    m["min-leaf"] = std::to_string(min_leaf);
    m["mtry"] = std::to_string(mtry);
    m["k"] = std::to_string(top_k);
    std::string w;
    for (size_t i = 0; i < widths.size(); ++i) w += (i ? "," : "") + std::to_string(widths[i]);
    m["widths"] = w;
    m["dk"] = std::to_string(dk);
    m["group"] = std::to_string(group);
    m["dropout"] = fmt(dropout);
    m["epochs"] = std::to_string(epochs);
    m["batch"] = std::to_string(batch);
    m["lr"] = fmt(lr);
    m["clip"] = fmt(clip);
    m["runs"] = std::to_string(runs);
    m["same-seed"] = same_seed ? "true" : "false";
    std::string f;
    for (size_t i = 0; i < fractions.size(); ++i) f += (i ? "," : "") + fmt(fractions[i]);
    m["fractions"] = f;
    m["seed"] = std::to_string(seed);
    m["deterministic"] = deterministic ? "true" : "false";
    // the output directory is deliberately not part of the fingerprint:
    // identical runs into different directories must digest identically
    return m;
}

std::string Options::dump() const {
    std::ostringstream os;
    os << "# idu resolved run configuration\n";
    for (const auto& [k, v] : flat()) os << k << "=" << v << "\n";
    return os.str();
}

std::string Options::digest() const { return digest_hex(dump()); }

BuiltDataset build_dataset(const Options& opt, uint64_t seed, const std::string& csv_out) {
    if (opt.task != "class" && opt.task != "role")
        throw ConfigError("task must be class or role, got " + opt.task);

    LabeledRecords labeled;
    if (opt.join_ueba) {
        labeled = join_and_label(opt, seed, csv_out);
    } else {
        labeled = ingest_and_label(opt, opt.data_path);
    }
    if (labeled.records.empty()) throw DataError("no usable records after labeling");

    // class indices for the stratified split on raw records
    std::vector<std::string> class_names;
    {
        std::set<std::string> names(labeled.labels.begin(), labeled.labels.end());
        class_names.assign(names.begin(), names.end());
    }
    std::vector<int> label_ids(labeled.labels.size());
    for (size_t i = 0; i < labeled.labels.size(); ++i)
        label_ids[i] = static_cast<int>(
            std::lower_bound(class_names.begin(), class_names.end(), labeled.labels[i]) -
            class_names.begin());

    BuiltDataset built;
    built.rejects = std::move(labeled.rejects);
    built.dropped_excluded_rows = labeled.dropped_excluded;
    built.warnings = std::move(labeled.warnings);
    auto [train_idx, test_idx] =
        prep::split_indices(label_ids, class_names, opt.split_ratio, true, seed, &built.warnings);

    auto gather_records = [&](const std::vector<long>& idx) {
        std::vector<ingest::FlowRecord> recs;
        std::vector<std::string> labels;
        recs.reserve(idx.size());
        for (long i : idx) {
            recs.push_back(labeled.records[i]);
            labels.push_back(labeled.labels[i]);
        }
        return std::pair{std::move(recs), std::move(labels)};
    };
    auto [train_recs, train_labels] = gather_records(train_idx);
    auto [test_recs, test_labels] = gather_records(test_idx);

    auto fitted = prep::fit_encoder(train_recs, labeled.schema, train_labels);
    for (auto& w : fitted.warnings) built.warnings.push_back(std::move(w));
    built.encoder = std::move(fitted.spec);

    built.train = prep::transform(train_recs, train_labels, built.encoder);
    built.test = prep::transform(test_recs, test_labels, built.encoder);
    if (opt.resample_floor > 0.0) built.train = prep::resample(built.train, opt.resample_floor, seed);

    const std::string source_digest =
        opt.join_ueba ? "(synergistic)" : digest_file_hex(opt.data_path);
    for (auto* ds : {&built.train, &built.test}) {
        ds->provenance.source_path = opt.data_path;
        ds->provenance.source_digest = source_digest;
        ds->provenance.task = opt.task;
        ds->provenance.schema = opt.join_ueba ? "synergistic" : opt.schema_name;
        ds->provenance.seed = seed;
        ds->provenance.config_digest = opt.digest();
    }
    return built;
}

forest::FeatureManifest select_features(const Options& opt, const prep::EncodedDataset& train,
                                        uint64_t seed) {
    forest::ForestParams params;
    params.n_trees = opt.trees;
    params.max_depth = opt.max_depth;
    params.min_leaf = opt.min_leaf;
    params.mtry = opt.mtry;
    params.seed = seed;
    const auto model = forest::fit_forest(train.X, train.labels, train.n_classes(), params);
    const int k = std::min(opt.top_k, train.width());
    const auto indices = forest::select_top_k(model, k);

    forest::FeatureManifest manifest;
    manifest.config_digest = opt.digest();
    for (int idx : indices) {
        manifest.indices.push_back(idx);
        manifest.names.push_back(train.column_names.at(idx));
        manifest.importances.push_back(model.importances.at(idx));
    }
    return manifest;
}

Trained train_model(const Options& opt, const prep::EncodedDataset& train_projected, uint64_t seed,
                    std::ostream* log) {
    model::ModelConfig mcfg;
    mcfg.input_dim = train_projected.width();
    mcfg.widths = opt.widths;
    mcfg.attn_dim = opt.dk;
    mcfg.group = opt.group;
    mcfg.dropout = opt.dropout;
    mcfg.n_classes = train_projected.n_classes();
    mcfg.seed = seed;

    Trained result;
    result.params = model::ModelParams::init(mcfg);

    model::TrainConfig tcfg;
    tcfg.epochs = opt.epochs;
    tcfg.batch_size = opt.batch;
    tcfg.lr = opt.lr;
    tcfg.clip_norm = opt.clip;
    tcfg.seed = seed;
    tcfg.deterministic = opt.deterministic;

    const double t0 = wall_seconds();
    result.history = model::train(result.params, train_projected, tcfg, log);
    result.train_wall_s = wall_seconds() - t0;

    result.meta.class_names = train_projected.class_names;
    result.meta.feature_digest = train_projected.provenance.feature_digest;
    result.meta.encoder_digest = train_projected.provenance.encoder_digest;
    result.meta.config_digest = opt.digest();
    result.meta.task = train_projected.provenance.task;
    return result;
}

eval::EvalReport run_once(const Options& opt, uint64_t seed, std::ostream* log) {
    auto built = build_dataset(opt, seed);
    const auto manifest = select_features(opt, built.train, seed);
    auto train_p = forest::project(built.train, manifest.indices);
    auto test_p = forest::project(built.test, manifest.indices);
    train_p.provenance.feature_digest = manifest.digest();
    test_p.provenance.feature_digest = manifest.digest();

    auto trained = train_model(opt, train_p, seed, log);
    auto report = eval::evaluate_model(trained.params, trained.meta, test_p, opt.batch);
    report.train_time_s = trained.train_wall_s;
    report.seed = seed;
    report.config_digest = opt.digest();
    return report;
}

eval::ScaleRow run_fraction(const Options& opt, const BuiltDataset& built,
                            const forest::FeatureManifest& manifest, double fraction,
                            std::ostream* log) {
    eval::RssSampler sampler;
    sampler.start();

    auto subsample = prep::stratified_fraction(built.train, fraction, opt.seed + 1000003);
    auto train_p = forest::project(subsample, manifest.indices);
    auto test_p = forest::project(built.test, manifest.indices);
    train_p.provenance.feature_digest = manifest.digest();
    test_p.provenance.feature_digest = manifest.digest();

    auto trained = train_model(opt, train_p, opt.seed, log);
    auto report = eval::evaluate_model(trained.params, trained.meta, test_p, opt.batch);

    eval::ScaleRow row;
    row.fraction = fraction;
    row.n_samples = train_p.rows();
    row.macro_accuracy = report.macro.accuracy;
    row.micro_accuracy = report.micro_accuracy;
    row.train_s = trained.train_wall_s;
    row.detection_time_s = report.detection_time_s;
    row.latency_per_batch_s = report.latency_per_batch_s;
    row.per_record_latency_s = report.per_record_latency_s;
    row.peak_rss_bytes = sampler.stop();
    const long total = eval::RssSampler::total_system_bytes();
    row.rss_percent_of_total = total > 0 ? 100.0 * static_cast<double>(row.peak_rss_bytes) / total : 0.0;
    return row;
}

void Manifest::add(const std::string& dir, const std::string& file, const std::string& config_digest,
                   const std::string& command) {
    Entry e;
    e.file = file;
    e.digest = digest_file_hex((fs::path(dir) / file).string());
    e.config_digest = config_digest;
    e.command = command;
    for (auto& existing : entries) {
        if (existing.file == file) {
            existing = e;
            return;
        }
    }
    entries.push_back(std::move(e));
}

void Manifest::save(const std::string& dir) const {
    nlohmann::json entries_json = nlohmann::json::array();
    for (const auto& e : entries)
        entries_json.push_back({{"file", e.file},
                                {"digest", e.digest},
                                {"config_digest", e.config_digest},
                                {"command", e.command}});
    nlohmann::json j{{"schema_version", 1}, {"entries", entries_json}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw DataError("cannot write manifest in " + dir);
    out << j.dump(2) << "\n";
}

Manifest Manifest::load_or_empty(const std::string& dir) {
    Manifest m;
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) return m;
    nlohmann::json j;
    in >> j;
    for (const auto& e : j.at("entries"))
        m.entries.push_back({e.at("file"), e.at("digest"), e.at("config_digest"), e.at("command")});
    return m;
}

std::vector<std::string> verify_out_dir(const std::string& dir) {
    std::vector<std::string> failures;
    Manifest m = Manifest::load_or_empty(dir);
    if (m.entries.empty()) {
        failures.push_back("no manifest.json (or empty) in " + dir);
        return failures;
    }
    for (const auto& e : m.entries) {
        const auto path = fs::path(dir) / e.file;
        if (!fs::exists(path)) {
            failures.push_back(e.file + ": missing");
            continue;
        }
        const auto actual = digest_file_hex(path.string());
        if (actual != e.digest)
            failures.push_back(e.file + ": content digest " + actual + " != manifest " + e.digest);
        // cross-check the embedded config digest against the recorded one
        const auto cfg_file = fs::path(dir) / ("run_config." + e.command + ".txt");
        if (fs::exists(cfg_file)) {
            const auto cfg_digest = digest_hex([&] {
                std::ifstream in(cfg_file);
                return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            }());
            if (cfg_digest != e.config_digest)
                failures.push_back(e.file + ": config digest " + e.config_digest +
                                   " != run_config." + e.command + ".txt digest " + cfg_digest);
        }
    }
    return failures;
}

}  // namespace idu::pipe
