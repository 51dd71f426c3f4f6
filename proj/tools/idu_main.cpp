// idu: IDU-Detector pipeline front end.
//
// Subcommands: dump-maps, build-dataset, select, train, eval, predict,
// stability, scale, verify, and a kernel sanity `info`.
// Exit codes: 0 ok, 2 data error, 3 configuration error, 4 numeric abort.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "idu/pipeline.hpp"

namespace fs = std::filesystem;
using namespace idu;

namespace {

struct Cli {
    pipe::Options opt;
    std::string ckpt_path;
    std::string features_path;
    std::string encoder_path;
    std::string train_file;
    std::string test_file;
    std::string record;  // predict input: file with one raw record, or "-"
    bool dry_run = false;
};

void write_run_config(const pipe::Options& opt, const std::string& command, pipe::Manifest& manifest) {
    fs::create_directories(opt.out_dir);
    const std::string name = "run_config." + command + ".txt";
    std::ofstream out(fs::path(opt.out_dir) / name);
    if (!out) throw DataError("cannot write " + name + " in " + opt.out_dir);
    out << opt.dump();
    out.close();
    manifest.add(opt.out_dir, name, opt.digest(), command);
}

std::string g_config_file;  // consumed by the pre-parse merge below

void add_common_flags(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--seed", cli.opt.seed, "master seed");
    cmd->add_flag("--deterministic,!--no-deterministic", cli.opt.deterministic,
                  "bit-reproducible kernels (always on; recorded in config)");
    cmd->add_option("--out", cli.opt.out_dir, "output directory");
    cmd->add_option("--config", g_config_file,
                    "flat key=value file mirroring flag names; flags win over file entries");
}

// Config precedence: CLI flags > config file > defaults. File keys matching an
// option of the invoked subcommand are injected as flags unless that flag was
// given explicitly; unknown keys are ignored.
std::vector<std::string> merge_config_file(CLI::App& app, int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    std::string subcommand;
    for (size_t i = 0; i < args.size(); ++i) {
        if (subcommand.empty() && !args[i].empty() && args[i][0] != '-') subcommand = args[i];
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty() || subcommand.empty()) return args;

    CLI::App* sub = nullptr;
    for (auto* s : app.get_subcommands({})) (void)s;
    try {
        sub = app.get_subcommand(subcommand);
    } catch (const CLI::OptionNotFound&) {
        return args;  // the parser will report the unknown subcommand
    }

    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);
    std::string line;
    std::vector<std::string> injected;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("config file: expected key=value: " + t);
        const std::string key = "--" + trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (!sub->get_option_no_throw(key)) continue;  // not this subcommand's flag
        bool given = false;
        for (const auto& a : args) given = given || a == key || a.rfind(key + "=", 0) == 0;
        if (!given) injected.push_back(key + "=" + value);
    }
    // inject right after the subcommand token
    std::vector<std::string> merged;
    for (const auto& a : args) {
        merged.push_back(a);
        if (a == subcommand)
            for (const auto& inj : injected) merged.push_back(inj);
    }
    return merged;
}

void add_model_flags(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--widths", cli.opt.widths, "block widths")->delimiter(',');
    cmd->add_option("--dk", cli.opt.dk, "attention embedding dim");
    cmd->add_option("--group", cli.opt.group, "attention token group size");
    cmd->add_option("--dropout", cli.opt.dropout, "dropout rate");
    cmd->add_option("--epochs", cli.opt.epochs, "training epochs");
    cmd->add_option("--batch", cli.opt.batch, "batch size");
    cmd->add_option("--lr", cli.opt.lr, "learning rate");
    cmd->add_option("--clip", cli.opt.clip, "global gradient clip norm");
}

void add_dataset_flags(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--data", cli.opt.data_path, "raw dataset file");
    cmd->add_option("--schema", cli.opt.schema_name, "kdd99|nslkdd|cicids2017")
        ->check(CLI::IsMember({"kdd99", "nslkdd", "cicids2017"}));
    cmd->add_option("--task", cli.opt.task, "class|role")->check(CLI::IsMember({"class", "role"}));
    cmd->add_option("--map-file", cli.opt.map_file, "tag/role mapping overrides");
    cmd->add_flag("--join-ueba", cli.opt.join_ueba, "fuse flows with synthetic user sessions");
    cmd->add_option("--ueba-users", cli.opt.ueba_users, "synthetic user count");
    cmd->add_option("--ueba-sessions", cli.opt.ueba_sessions, "sessions per user");
    cmd->add_option("--ueba-malicious", cli.opt.ueba_malicious, "malicious user fraction");
    cmd->add_option("--join-total", cli.opt.join_total, "synergistic record count");
    cmd->add_option("--join-benign-malicious", cli.opt.join_benign_malicious,
                    "fraction of benign flows paired with insider sessions");
    cmd->add_option("--split-ratio", cli.opt.split_ratio, "train fraction");
    cmd->add_option("--resample-floor", cli.opt.resample_floor,
                    "raise every class to this fraction of the majority (0 disables)");
}

void add_forest_flags(CLI::App* cmd, Cli& cli) {
    cmd->add_option("--trees", cli.opt.trees, "forest size");
    cmd->add_option("--max-depth", cli.opt.max_depth, "tree depth cap");
    cmd->add_option("--min-leaf", cli.opt.min_leaf, "minimum samples per leaf");
    cmd->add_option("--mtry", cli.opt.mtry, "features per split (0 = ceil(sqrt(d)))");
    cmd->add_option("--k", cli.opt.top_k, "selected feature count");
}

int cmd_dump_maps(const Cli& cli) {
    ingest::dump_default_maps(cli.opt.out_dir);
    std::cout << "wrote kdd99.map nslkdd.map cicids2017.map roles.map to " << cli.opt.out_dir << "\n";
    return 0;
}

int cmd_build_dataset(Cli& cli) {
    if (cli.opt.data_path.empty()) throw ConfigError("build-dataset: --data is required");
    fs::create_directories(cli.opt.out_dir);
    auto manifest = pipe::Manifest::load_or_empty(cli.opt.out_dir);
    const std::string csv_out =
        cli.opt.join_ueba ? (fs::path(cli.opt.out_dir) / "synergistic.csv").string() : "";

    auto built = pipe::build_dataset(cli.opt, cli.opt.seed, csv_out);
    for (const auto& w : built.warnings) std::cerr << "warning: " << w << "\n";
    if (built.dropped_excluded_rows > 0)
        std::cerr << "note: dropped " << built.dropped_excluded_rows
                  << " rows whose role maps to Excluded\n";

    const auto dir = fs::path(cli.opt.out_dir);
    const auto digest = cli.opt.digest();
    prep::save_dataset((dir / "train.idue").string(), built.train);
    prep::save_dataset((dir / "test.idue").string(), built.test);
    built.encoder.save((dir / "encoder.txt").string(), digest);
    built.rejects.write((dir / "rejects.txt").string(), digest);
    write_run_config(cli.opt, "build-dataset", manifest);
    manifest.add(cli.opt.out_dir, "train.idue", digest, "build-dataset");
    manifest.add(cli.opt.out_dir, "test.idue", digest, "build-dataset");
    manifest.add(cli.opt.out_dir, "encoder.txt", digest, "build-dataset");
    manifest.add(cli.opt.out_dir, "rejects.txt", digest, "build-dataset");
    if (!csv_out.empty()) manifest.add(cli.opt.out_dir, "synergistic.csv", digest, "build-dataset");
    manifest.save(cli.opt.out_dir);

    std::cout << "train rows: " << built.train.rows() << "  test rows: " << built.test.rows()
              << "  width: " << built.train.width() << "\n";
    std::cout << "classes:";
    const auto counts = built.train.class_counts();
    for (size_t c = 0; c < built.train.class_names.size(); ++c)
        std::cout << " " << built.train.class_names[c] << "=" << counts[c];
    std::cout << "\nwrote train.idue test.idue encoder.txt rejects.txt to " << cli.opt.out_dir << "\n";
    return 0;
}

int cmd_select(Cli& cli) {
    const std::string train_file =
        cli.train_file.empty() ? (fs::path(cli.opt.out_dir) / "train.idue").string() : cli.train_file;
    auto train = prep::load_dataset_file(train_file);
    auto manifest_data = pipe::select_features(cli.opt, train, cli.opt.seed);

    fs::create_directories(cli.opt.out_dir);
    auto manifest = pipe::Manifest::load_or_empty(cli.opt.out_dir);
    manifest_data.save((fs::path(cli.opt.out_dir) / "features.txt").string());
    write_run_config(cli.opt, "select", manifest);
    manifest.add(cli.opt.out_dir, "features.txt", cli.opt.digest(), "select");
    manifest.save(cli.opt.out_dir);

    std::cout << "selected " << manifest_data.indices.size() << " of " << train.width()
              << " features; importances descending:\n";
    for (size_t i = 0; i < manifest_data.indices.size() && i < 10; ++i)
        std::cout << "  " << manifest_data.indices[i] << "  " << manifest_data.names[i] << "  "
                  << manifest_data.importances[i] << "\n";
    if (manifest_data.indices.size() > 10) std::cout << "  ...\n";
    return 0;
}

int cmd_train(Cli& cli) {
    const auto dir = fs::path(cli.opt.out_dir);
    const std::string train_file = cli.train_file.empty() ? (dir / "train.idue").string() : cli.train_file;
    const std::string features_file =
        cli.features_path.empty() ? (dir / "features.txt").string() : cli.features_path;

    auto train = prep::load_dataset_file(train_file);
    auto features = forest::FeatureManifest::load(features_file);
    auto projected = forest::project(train, features.indices);
    projected.provenance.feature_digest = features.digest();

    if (cli.dry_run) {
        model::ModelConfig mcfg;
        mcfg.input_dim = projected.width();
        mcfg.widths = cli.opt.widths;
        mcfg.attn_dim = cli.opt.dk;
        mcfg.group = cli.opt.group;
        mcfg.dropout = cli.opt.dropout;
        mcfg.n_classes = projected.n_classes();
        mcfg.seed = cli.opt.seed;
        mcfg.validate();
        std::cout << "input dim: " << mcfg.input_dim << "\nclasses: " << mcfg.n_classes
                  << "\nlearnable parameters: " << mcfg.learnable_params() << "\n";
        return 0;
    }

    auto trained = pipe::train_model(cli.opt, projected, cli.opt.seed, &std::cerr);

    fs::create_directories(cli.opt.out_dir);
    auto manifest = pipe::Manifest::load_or_empty(cli.opt.out_dir);
    model::save_checkpoint((dir / "model.ckpt").string(), trained.params, trained.meta);
    model::write_history_csv((dir / "history.csv").string(), trained.history, cli.opt.digest());
    write_run_config(cli.opt, "train", manifest);
    manifest.add(cli.opt.out_dir, "model.ckpt", cli.opt.digest(), "train");
    manifest.add(cli.opt.out_dir, "history.csv", cli.opt.digest(), "train");
    manifest.save(cli.opt.out_dir);

    std::cout << "trained " << trained.history.history.size() << " epochs in " << trained.train_wall_s
              << "s; final loss " << trained.history.history.back().loss << " acc "
              << trained.history.history.back().train_accuracy << "\nwrote model.ckpt history.csv to "
              << cli.opt.out_dir << "\n";
    return 0;
}

int cmd_eval(Cli& cli) {
    const auto dir = fs::path(cli.opt.out_dir);
    const std::string test_file = cli.test_file.empty() ? (dir / "test.idue").string() : cli.test_file;
    const std::string ckpt_file = cli.ckpt_path.empty() ? (dir / "model.ckpt").string() : cli.ckpt_path;
    const std::string features_file =
        cli.features_path.empty() ? (dir / "features.txt").string() : cli.features_path;

    auto loaded = model::load_checkpoint(ckpt_file);
    auto features = forest::FeatureManifest::load(features_file);
    auto test = prep::load_dataset_file(test_file);
    auto projected = forest::project(test, features.indices);
    projected.provenance.feature_digest = features.digest();

    auto report = eval::evaluate_model(loaded.params, loaded.meta, projected, cli.opt.batch);
    report.seed = cli.opt.seed;
    report.config_digest = cli.opt.digest();  // this command's resolved config

    fs::create_directories(cli.opt.out_dir);
    auto manifest = pipe::Manifest::load_or_empty(cli.opt.out_dir);
    report.save((dir / "report.json").string());
    report.write_predictions_csv((dir / "predictions.csv").string());
    write_run_config(cli.opt, "eval", manifest);
    manifest.add(cli.opt.out_dir, "report.json", report.config_digest, "eval");
    manifest.add(cli.opt.out_dir, "predictions.csv", report.config_digest, "eval");
    manifest.save(cli.opt.out_dir);

    std::cout << "macro accuracy " << report.macro.accuracy << "  micro accuracy "
              << report.micro_accuracy << "  macro f1 " << report.macro.f1 << "\n";
    for (size_t c = 0; c < report.class_names.size(); ++c)
        std::cout << "  " << report.class_names[c] << ": precision " << report.per_class[c].precision
                  << " recall " << report.per_class[c].recall << " far " << report.per_class[c].far
                  << " f1 " << report.per_class[c].f1 << "\n";
    std::cout << "wrote report.json predictions.csv to " << cli.opt.out_dir << "\n";
    return 0;
}

int cmd_predict(Cli& cli) {
    const auto dir = fs::path(cli.opt.out_dir);
    const std::string ckpt_file = cli.ckpt_path.empty() ? (dir / "model.ckpt").string() : cli.ckpt_path;
    const std::string features_file =
        cli.features_path.empty() ? (dir / "features.txt").string() : cli.features_path;
    const std::string encoder_file =
        cli.encoder_path.empty() ? (dir / "encoder.txt").string() : cli.encoder_path;

    auto loaded = model::load_checkpoint(ckpt_file);
    auto features = forest::FeatureManifest::load(features_file);
    if (!loaded.meta.feature_digest.empty() && loaded.meta.feature_digest != features.digest())
        throw model::DigestMismatchError("predict: feature manifest does not match checkpoint");
    auto encoder = prep::EncoderSpec::load(encoder_file);
    if (!loaded.meta.encoder_digest.empty() && loaded.meta.encoder_digest != encoder.digest())
        throw model::DigestMismatchError("predict: encoder spec does not match checkpoint");

    std::string line;
    if (cli.record == "-" || cli.record.empty()) {
        if (!std::getline(std::cin, line)) throw DataError("predict: no record on stdin");
    } else {
        std::ifstream in(cli.record);
        if (!in) throw DataError("predict: cannot open " + cli.record);
        while (std::getline(in, line)) {
            if (!trim(line).empty() && trim(line)[0] != '#') break;
        }
    }
    auto cells = ingest::split_csv_line(line, true);

    // accept a record with or without its label cell
    const size_t want = encoder.columns.size();
    if (cells.size() == want - 1) cells.emplace_back("");
    if (cells.size() != want)
        throw DataError("predict: record has " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(want) + " (or one fewer without the label)");

    ingest::FlowRecord rec{std::move(cells), 1};
    // transform with a placeholder label, then strip it
    auto ds = prep::transform({rec}, {encoder.class_names.front()}, encoder);
    auto projected = forest::project(ds, features.indices);

    core::Tensor X({1, projected.width()});
    X.data = projected.X.data;
    const auto probs = model::forward_infer(loaded.params, X);

    int argmax = 0;
    for (int c = 1; c < probs.cols(); ++c)
        if (probs.at(0, c) > probs.at(0, argmax)) argmax = c;

    nlohmann::json out{{"prediction", loaded.meta.class_names.at(argmax)}, {"task", loaded.meta.task}};
    nlohmann::json pj = nlohmann::json::object();
    for (int c = 0; c < probs.cols(); ++c) pj[loaded.meta.class_names.at(c)] = probs.at(0, c);
    out["probabilities"] = pj;
    if (loaded.meta.task == "role") out["role"] = loaded.meta.class_names.at(argmax);
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_stability(Cli& cli) {
    if (cli.opt.data_path.empty()) throw ConfigError("stability: --data is required");
    fs::create_directories(cli.opt.out_dir);
    auto manifest = pipe::Manifest::load_or_empty(cli.opt.out_dir);
    const auto dir = fs::path(cli.opt.out_dir);

    std::vector<std::string> run_files;
    auto runner = [&](uint64_t seed) {
        std::cerr << "stability run seed " << seed << "\n";
        auto report = pipe::run_once(cli.opt, seed, nullptr);
        const std::string run_dir = (dir / ("runs/run_" + std::to_string(seed))).string();
        fs::create_directories(run_dir);
        report.save(run_dir + "/report.json");
        run_files.push_back("runs/run_" + std::to_string(seed) + "/report.json");
        return report;
    };
    auto summary = eval::stability_run(cli.opt.runs, cli.opt.seed, runner, cli.opt.same_seed);

    summary.save((dir / "stability.json").string());
    summary.write_csv((dir / "stability.csv").string(), cli.opt.digest());
    write_run_config(cli.opt, "stability", manifest);
    manifest.add(cli.opt.out_dir, "stability.json", cli.opt.digest(), "stability");
    manifest.add(cli.opt.out_dir, "stability.csv", cli.opt.digest(), "stability");
    for (const auto& f : run_files) manifest.add(cli.opt.out_dir, f, cli.opt.digest(), "stability");
    manifest.save(cli.opt.out_dir);

    for (const auto& [name, b] : summary.per_metric)
        std::cout << name << ": median " << b.median << " iqr " << b.iqr << " stddev " << b.stddev
                  << " outliers " << b.outliers.size() << "\n";
    if (!summary.failed_runs.empty()) {
        for (const auto& f : summary.failed_runs) std::cerr << "failed: " << f << "\n";
        return 4;
    }
    return 0;
}

int cmd_scale(Cli& cli) {
    if (cli.opt.data_path.empty()) throw ConfigError("scale: --data is required");
    fs::create_directories(cli.opt.out_dir);
    auto manifest = pipe::Manifest::load_or_empty(cli.opt.out_dir);
    const auto dir = fs::path(cli.opt.out_dir);

    std::cerr << "building dataset once, then scaling the training set\n";
    auto built = pipe::build_dataset(cli.opt, cli.opt.seed);
    auto features = pipe::select_features(cli.opt, built.train, cli.opt.seed);

    auto result = eval::scalability_run(cli.opt.fractions, [&](double fraction) {
        std::cerr << "fraction " << fraction << "\n";
        return pipe::run_fraction(cli.opt, built, features, fraction, nullptr);
    });

    result.save((dir / "scaling.json").string());
    result.write_csv((dir / "scaling.csv").string(), cli.opt.digest());
    write_run_config(cli.opt, "scale", manifest);
    manifest.add(cli.opt.out_dir, "scaling.json", cli.opt.digest(), "scale");
    manifest.add(cli.opt.out_dir, "scaling.csv", cli.opt.digest(), "scale");
    manifest.save(cli.opt.out_dir);

    std::cout << "time = " << result.time_fit.slope << " * n + " << result.time_fit.intercept
              << "  (r2 " << result.time_fit.r2 << ")\n";
    for (const auto& row : result.rows)
        std::cout << "  " << row.fraction << ": n=" << row.n_samples << " acc=" << row.macro_accuracy
                  << " train=" << row.train_s << "s rss=" << row.peak_rss_bytes / (1 << 20) << "MiB\n";
    return 0;
}

int cmd_verify(Cli& cli) {
    const auto failures = pipe::verify_out_dir(cli.opt.out_dir);
    if (failures.empty()) {
        std::cout << "verify: all digests match in " << cli.opt.out_dir << "\n";
        return 0;
    }
    for (const auto& f : failures) std::cerr << "verify: " << f << "\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IDU-Detector: intrusion + user-behavior detection pipeline"};
    app.require_subcommand(1);

    Cli cli;
    auto* dump_maps = app.add_subcommand("dump-maps", "write builtin tag/role mapping tables");
    add_common_flags(dump_maps, cli);

    auto* build = app.add_subcommand("build-dataset", "ingest, label, split, encode, resample");
    add_dataset_flags(build, cli);
    add_common_flags(build, cli);

    auto* select = app.add_subcommand("select", "random-forest feature selection");
    add_forest_flags(select, cli);
    add_common_flags(select, cli);
    select->add_option("--train-file", cli.train_file, "encoded training set (.idue)");

    auto* train = app.add_subcommand("train", "train the classifier");
    add_model_flags(train, cli);
    add_common_flags(train, cli);
    train->add_option("--train-file", cli.train_file, "encoded training set (.idue)");
    train->add_option("--features", cli.features_path, "feature manifest");
    train->add_flag("--dry-run", cli.dry_run, "print parameter count and exit");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a test set");
    add_common_flags(eval_cmd, cli);
    eval_cmd->add_option("--test-file", cli.test_file, "encoded test set (.idue)");
    eval_cmd->add_option("--ckpt", cli.ckpt_path, "checkpoint file");
    eval_cmd->add_option("--features", cli.features_path, "feature manifest");
    eval_cmd->add_option("--batch", cli.opt.batch, "inference batch size");

    auto* predict = app.add_subcommand("predict", "classify one raw record");
    add_common_flags(predict, cli);
    predict->add_option("--ckpt", cli.ckpt_path, "checkpoint file");
    predict->add_option("--features", cli.features_path, "feature manifest");
    predict->add_option("--encoder", cli.encoder_path, "encoder spec");
    predict->add_option("--record", cli.record, "file holding one raw record, or - for stdin");

    auto* stability = app.add_subcommand("stability", "repeated train+eval cycles with box statistics");
    add_dataset_flags(stability, cli);
    add_forest_flags(stability, cli);
    add_model_flags(stability, cli);
    add_common_flags(stability, cli);
    stability->add_option("--runs", cli.opt.runs, "number of repeated runs");
    stability->add_flag("--same-seed", cli.opt.same_seed, "reuse the base seed for every run");

    auto* scale = app.add_subcommand("scale", "training-set fraction scaling protocol");
    add_dataset_flags(scale, cli);
    add_forest_flags(scale, cli);
    add_model_flags(scale, cli);
    add_common_flags(scale, cli);
    scale->add_option("--fractions", cli.opt.fractions, "ascending fractions in (0,1]")->delimiter(',');

    auto* verify = app.add_subcommand("verify", "re-derive artifact digests and compare");
    add_common_flags(verify, cli);

    try {
        auto args = merge_config_file(app, argc, argv);
        std::reverse(args.begin(), args.end());  // CLI11 vector parse expects reversed args
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 3;  // bad flags are configuration errors
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }

    try {
        if (dump_maps->parsed()) return cmd_dump_maps(cli);
        if (build->parsed()) return cmd_build_dataset(cli);
        if (select->parsed()) return cmd_select(cli);
        if (train->parsed()) return cmd_train(cli);
        if (eval_cmd->parsed()) return cmd_eval(cli);
        if (predict->parsed()) return cmd_predict(cli);
        if (stability->parsed()) return cmd_stability(cli);
        if (scale->parsed()) return cmd_scale(cli);
        if (verify->parsed()) return cmd_verify(cli);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
