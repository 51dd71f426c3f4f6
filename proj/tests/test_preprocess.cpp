#include <doctest.h>

#include <set>

#include "idu/encode.hpp"
#include "test_util.hpp"

using namespace idu;
using namespace idu::prep;
using ingest::ColumnKind;
using ingest::DatasetSchema;
using ingest::FlowRecord;

namespace {

DatasetSchema toy_schema() {
    DatasetSchema s;
    s.display_name = "toy";
    s.columns = {{"protocol", ColumnKind::categorical},
                 {"bytes", ColumnKind::numeric},
                 {"rate", ColumnKind::numeric},
                 {"label", ColumnKind::label}};
    return s;
}

FlowRecord rec(std::vector<std::string> cells, long line = 1) { return {std::move(cells), line}; }

struct ToyData {
    std::vector<FlowRecord> records;
    std::vector<std::string> labels;
};

ToyData toy_data() {
    ToyData d;
    d.records = {rec({"tcp", "10", "1.5", "a"}), rec({"udp", "20", "2.5", "b"}),
                 rec({"icmp", "30", "3.5", "a"}), rec({"tcp", "40", "4.5", "b"})};
    d.labels = {"a", "b", "a", "b"};
    return d;
}

EncodedDataset toy_dataset(int n_per_class, int n_classes, uint64_t seed = 1) {
    // synthetic encoded dataset with class-dependent features
    Rng rng(seed);
    EncodedDataset ds;
    for (int c = 0; c < n_classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
    ds.column_names = {"f0", "f1"};
    const long N = static_cast<long>(n_per_class) * n_classes;
    ds.X.dims = {static_cast<int>(N), 2};
    ds.X.data.resize(N * 2);
    ds.Y.dims = {static_cast<int>(N), n_classes};
    ds.Y.data.assign(static_cast<size_t>(N) * n_classes, 0.0f);
    ds.labels.resize(N);
    for (long i = 0; i < N; ++i) {
        const int c = static_cast<int>(i % n_classes);
        ds.labels[i] = c;
        ds.Y.data[i * n_classes + c] = 1.0f;
        ds.X.data[i * 2] = static_cast<float>(c + rng.gauss() * 0.1);
        ds.X.data[i * 2 + 1] = static_cast<float>(rng.gauss());
    }
    return ds;
}

}  // namespace

TEST_CASE("fit_encoder: vocabularies sorted lexicographically") {
    auto d = toy_data();
    const auto fit = fit_encoder(d.records, toy_schema(), d.labels);
    const auto& col = fit.spec.columns[0];
    CHECK(col.vocab == std::vector<std::string>{"icmp", "tcp", "udp"});
    const auto names = fit.spec.output_names();
    CHECK(names[0] == "protocol=icmp");
    CHECK(names[1] == "protocol=tcp");
    CHECK(names[2] == "protocol=udp");
    CHECK(fit.spec.output_width() == 5);
    CHECK(fit.spec.class_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("transform: one-hot, standardization, unseen category, missing numeric") {
    auto d = toy_data();
    const auto fit = fit_encoder(d.records, toy_schema(), d.labels);
    const auto ds = transform(d.records, d.labels, fit.spec);
    CHECK(ds.rows() == 4);
    CHECK(ds.width() == 5);
    // row 0 is tcp -> one-hot block (0,1,0)
    CHECK(ds.X.at(0, 0) == 0.0f);
    CHECK(ds.X.at(0, 1) == 1.0f);
    CHECK(ds.X.at(0, 2) == 0.0f);
    // bytes column: mean 25, std sqrt(125)
    const double std_bytes = std::sqrt(125.0);
    CHECK(ds.X.at(0, 3) == doctest::Approx((10.0 - 25.0) / std_bytes));
    // one-hot labels: each row sums to exactly 1
    for (int r = 0; r < 4; ++r) {
        float sum = 0;
        for (int c = 0; c < 2; ++c) sum += ds.Y.at(r, c);
        CHECK(sum == 1.0f);
    }

    // unseen category encodes as an all-zeros block; missing numeric as 0
    const auto held_out = transform({rec({"gre", "", "2.0", "a"})}, {"a"}, fit.spec);
    CHECK(held_out.X.at(0, 0) == 0.0f);
    CHECK(held_out.X.at(0, 1) == 0.0f);
    CHECK(held_out.X.at(0, 2) == 0.0f);
    CHECK(held_out.X.at(0, 3) == 0.0f);

    // unknown label is an error, never silently encoded
    CHECK_THROWS_AS((void)transform({rec({"tcp", "1", "1", "zz"})}, {"zz"}, fit.spec), DataError);
}

TEST_CASE("transform: empty stream gives 0 x d matrix; unfitted spec rejected") {
    auto d = toy_data();
    const auto fit = fit_encoder(d.records, toy_schema(), d.labels);
    const auto empty = transform({}, {}, fit.spec);
    CHECK(empty.rows() == 0);
    CHECK(empty.width() == 5);

    EncoderSpec unfitted;
    CHECK_THROWS_AS((void)transform(d.records, d.labels, unfitted), UsageError);
}

TEST_CASE("constant numeric column transforms to all zeros") {
    DatasetSchema s;
    s.display_name = "const";
    s.columns = {{"x", ColumnKind::numeric}, {"label", ColumnKind::label}};
    std::vector<FlowRecord> recs = {rec({"5", "a"}), rec({"5", "a"}), rec({"5", "b"})};
    std::vector<std::string> labels = {"a", "a", "b"};
    const auto fit = fit_encoder(recs, s, labels);
    CHECK(fit.spec.columns[0].std_dev == doctest::Approx(1e-8));
    const auto ds = transform(recs, labels, fit.spec);
    for (long r = 0; r < 3; ++r) CHECK(ds.X.at(r, 0) == 0.0f);
}

TEST_CASE("all-missing column dropped with warning; non-finite cells are missing") {
    DatasetSchema s;
    s.display_name = "missing";
    s.columns = {{"dead", ColumnKind::numeric}, {"ok", ColumnKind::numeric}, {"label", ColumnKind::label}};
    std::vector<FlowRecord> recs = {rec({"", "1", "a"}), rec({"junk", "2", "a"}), rec({"Infinity", "3", "b"})};
    std::vector<std::string> labels = {"a", "a", "b"};
    const auto fit = fit_encoder(recs, s, labels);
    REQUIRE(fit.warnings.size() == 1);
    CHECK(fit.warnings[0].find("dead") != std::string::npos);
    CHECK(fit.spec.output_width() == 1);
    const auto ds = transform(recs, labels, fit.spec);
    ds.X.ensure_finite("test");
}

TEST_CASE("encoder determinism and no-leakage digests") {
    auto d = toy_data();
    const auto a = fit_encoder(d.records, toy_schema(), d.labels);
    const auto b = fit_encoder(d.records, toy_schema(), d.labels);
    CHECK(a.spec.digest() == b.spec.digest());

    const std::string before = a.spec.digest();
    (void)transform({rec({"gre", "7", "0.4", "a"})}, {"a"}, a.spec);
    CHECK(a.spec.digest() == before);

    // serialize -> deserialize round trip preserves the digest
    const auto round = EncoderSpec::deserialize(a.spec.serialize());
    CHECK(round.digest() == before);
    CHECK(round.output_names() == a.spec.output_names());

    // file round trip with an embedded config digest comment
    testutil::TempDir tmp;
    a.spec.save(tmp.file("encoder.txt"), "cfg42");
    CHECK(testutil::read_file(tmp.file("encoder.txt")).rfind("# config=cfg42", 0) == 0);
    CHECK(EncoderSpec::load(tmp.file("encoder.txt")).digest() == before);

    CHECK_THROWS_AS((void)EncoderSpec::deserialize("idu-encoder v1\nclass a\n"), DataError);  // truncated
}

TEST_CASE("kdd-sized width arithmetic: 38 numeric + vocab sizes") {
    // 41 features, 3 categorical with vocab sizes (3, 66, 11) -> 38 + 80 = 118
    DatasetSchema s;
    s.display_name = "kddish";
    for (int i = 0; i < 41; ++i) {
        ColumnKind kind = ColumnKind::numeric;
        if (i == 1 || i == 2 || i == 3) kind = ColumnKind::categorical;
        s.columns.push_back({"f" + std::to_string(i), kind});
    }
    s.columns.push_back({"label", ColumnKind::label});

    std::vector<FlowRecord> recs;
    std::vector<std::string> labels;
    Rng rng(2);
    const int vocab_sizes[3] = {3, 66, 11};
    for (int r = 0; r < 200; ++r) {
        std::vector<std::string> cells;
        for (int i = 0; i < 41; ++i) {
            if (i >= 1 && i <= 3) {
                const int vs = vocab_sizes[i - 1];
                cells.push_back("v" + std::to_string(r < vs ? r : static_cast<int>(rng.uniform_u64(vs))));
            } else {
                cells.push_back(std::to_string(rng.uniform()));
            }
        }
        cells.push_back("x");
        recs.push_back(rec(std::move(cells)));
        labels.push_back(r % 2 ? "a" : "b");
    }
    const auto fit = fit_encoder(recs, s, labels);
    CHECK(fit.spec.columns[1].vocab.size() == 3);
    CHECK(fit.spec.columns[2].vocab.size() == 66);
    CHECK(fit.spec.columns[3].vocab.size() == 11);
    CHECK(fit.spec.output_width() == 118);
    const auto train_t = transform(recs, labels, fit.spec);
    const auto test_t = transform({recs[0]}, {labels[0]}, fit.spec);
    CHECK(train_t.width() == test_t.width());
}

TEST_CASE("split: plain and stratified") {
    const auto ds = toy_dataset(50, 2);  // 100 rows, 50/50
    SUBCASE("100 rows at 0.8 gives 80/20") {
        auto [train, test] = split(ds, 0.8, false, 7);
        CHECK(train.rows() == 80);
        CHECK(test.rows() == 20);
    }
    SUBCASE("stratified keeps 40/40 and 10/10") {
        auto [train, test] = split(ds, 0.8, true, 7);
        const auto tc = train.class_counts();
        const auto ec = test.class_counts();
        CHECK(tc == std::vector<long>{40, 40});
        CHECK(ec == std::vector<long>{10, 10});
    }
    SUBCASE("same seed gives identical index sets, different seed differs") {
        auto [a_train, a_test] = split(ds, 0.8, true, 7);
        auto [b_train, b_test] = split(ds, 0.8, true, 7);
        CHECK(a_train.X.data == b_train.X.data);
        CHECK(a_test.labels == b_test.labels);
        auto [c_train, c_test] = split(ds, 0.8, true, 8);
        CHECK(a_train.X.data != c_train.X.data);
    }
    SUBCASE("disjoint and exhaustive") {
        auto [train, test] = split(ds, 0.8, true, 7);
        std::multiset<float> all(ds.X.data.begin(), ds.X.data.end());
        std::multiset<float> parts(train.X.data.begin(), train.X.data.end());
        parts.insert(test.X.data.begin(), test.X.data.end());
        CHECK(all == parts);
    }
    SUBCASE("single-sample class goes to train with a warning") {
        auto small = toy_dataset(1, 2);
        std::vector<std::string> warnings;
        auto [train, test] = split(small, 0.5, true, 3, &warnings);
        CHECK(train.rows() == 2);
        CHECK(test.rows() == 0);
        CHECK(warnings.size() == 2);
    }
    CHECK_THROWS_AS((void)split(ds, 1.5, true, 0), ConfigError);
}

TEST_CASE("resample: floor rule on (10000, 500, 50, 5) with floor 0.05") {
    // compact stand-in with the same ratios checked exactly at full scale in acceptance
    EncodedDataset ds;
    ds.class_names = {"a", "b", "c", "d"};
    ds.column_names = {"x"};
    const std::vector<long> counts = {1000, 50, 5, 1};
    long N = 1056;
    ds.X.dims = {static_cast<int>(N), 1};
    ds.Y.dims = {static_cast<int>(N), 4};
    ds.Y.data.assign(N * 4, 0.0f);
    long row = 0;
    for (int c = 0; c < 4; ++c)
        for (long k = 0; k < counts[c]; ++k) {
            ds.X.data.push_back(static_cast<float>(c * 10000 + k));
            ds.labels.push_back(c);
            ds.Y.data[row * 4 + c] = 1.0f;
            ++row;
        }
    const auto out = resample(ds, 0.05, 11);
    const auto oc = out.class_counts();
    CHECK(oc == std::vector<long>{1000, 50, 50, 50});

    // frequency ordering preserved (non-strict)
    for (size_t a = 0; a < counts.size(); ++a)
        for (size_t b = 0; b < counts.size(); ++b)
            if (counts[a] >= counts[b]) CHECK(oc[a] >= oc[b]);

    // every synthesized row equals some original row of its class
    std::set<std::pair<int, float>> originals;
    for (long i = 0; i < ds.rows(); ++i) originals.insert({ds.labels[i], ds.X.data[i]});
    for (long i = ds.rows(); i < out.rows(); ++i)
        CHECK(originals.count({out.labels[i], out.X.data[i]}) == 1);

    // balanced classes untouched by any floor <= 1
    const auto balanced = toy_dataset(500, 2);
    const auto same = resample(balanced, 1.0, 5);
    CHECK(same.rows() == balanced.rows());
    CHECK(same.class_counts() == std::vector<long>{500, 500});

    CHECK_THROWS_AS((void)resample(ds, 0.0, 1), ConfigError);
    EncodedDataset empty_class = toy_dataset(5, 2);
    empty_class.class_names.push_back("ghost");
    CHECK_THROWS_AS((void)resample(empty_class, 0.05, 1), DataError);
}

TEST_CASE("dataset file round trip is byte-identical") {
    testutil::TempDir tmp;
    auto ds = toy_dataset(20, 3);
    ds.provenance.schema = "toy";
    ds.provenance.task = "class";
    ds.provenance.seed = 42;
    ds.provenance.config_digest = "cfg123";
    ds.provenance.encoder_digest = "enc456";
    save_dataset(tmp.file("a.idue"), ds);
    const auto back = load_dataset_file(tmp.file("a.idue"));
    CHECK(back.X.data == ds.X.data);
    CHECK(back.labels == ds.labels);
    CHECK(back.class_names == ds.class_names);
    CHECK(back.provenance.config_digest == "cfg123");
    save_dataset(tmp.file("b.idue"), back);
    CHECK(testutil::read_file(tmp.file("a.idue")) == testutil::read_file(tmp.file("b.idue")));

    testutil::write_file(tmp.file("junk.idue"), "not a dataset");
    CHECK_THROWS_AS((void)load_dataset_file(tmp.file("junk.idue")), DataError);
}
