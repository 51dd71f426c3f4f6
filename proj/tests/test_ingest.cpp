#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "idu/ingest.hpp"
#include "idu/labelmap.hpp"
#include "idu/schema.hpp"

using namespace idu;
using namespace idu::ingest;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("idu_test_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

std::string kdd_row(const std::string& tag, int n_features = 41) {
    std::string row;
    for (int i = 0; i < n_features; ++i) {
        if (i == 1) row += "tcp,";
        else if (i == 2) row += "http,";
        else if (i == 3) row += "SF,";
        else row += "0,";
    }
    row += tag;
    return row;
}

}  // namespace

// Tag tables are enumerated verbatim; every listed tag must map to its class.
TEST_CASE("kdd99 tag table maps exhaustively") {
    const LabelMap m = default_label_map(SchemaName::kdd99);
    const std::vector<std::pair<std::string, AttackClass>> table = {
        {"ipsweep", AttackClass::Probe},   {"nmap", AttackClass::Probe},
        {"portsweep", AttackClass::Probe}, {"smurf", AttackClass::DoS},
        {"neptune", AttackClass::DoS},     {"back", AttackClass::DoS},
        {"pod", AttackClass::DoS},         {"land", AttackClass::DoS},
        {"teardrop", AttackClass::DoS},    {"buffer_overflow", AttackClass::U2R},
        {"rootkit", AttackClass::U2R},     {"loadmodule", AttackClass::U2R},
        {"perl", AttackClass::U2R},        {"ftp_write", AttackClass::R2L},
        {"imap", AttackClass::R2L},        {"multihop", AttackClass::R2L},
        {"phf", AttackClass::R2L},         {"spy", AttackClass::R2L},
        {"warezclient", AttackClass::R2L}, {"guess_passwd", AttackClass::R2L},
        {"warezmaster", AttackClass::R2L}, {"BENIGN", AttackClass::Benign},
    };
    for (const auto& [tag, cls] : table) {
        CAPTURE(tag);
        CHECK(m.map_tag(tag) == cls);
    }
}

TEST_CASE("nslkdd tag table maps exhaustively") {
    const LabelMap m = default_label_map(SchemaName::nslkdd);
    const std::vector<std::pair<std::string, AttackClass>> table = {
        {"satan", AttackClass::Probe},         {"ipsweep", AttackClass::Probe},
        {"nmap", AttackClass::Probe},          {"portsweep", AttackClass::Probe},
        {"mscan", AttackClass::Probe},         {"saint", AttackClass::Probe},
        {"neptune", AttackClass::DoS},         {"worm", AttackClass::DoS},
        {"smurf", AttackClass::DoS},           {"back", AttackClass::DoS},
        {"pod", AttackClass::DoS},             {"land", AttackClass::DoS},
        {"apache2", AttackClass::DoS},         {"mailbomb", AttackClass::DoS},
        {"processtable", AttackClass::DoS},    {"teardrop", AttackClass::DoS},
        {"snmpgetattack", AttackClass::DoS},   {"httptunnel", AttackClass::DoS},
        {"sqlattack", AttackClass::DoS},       {"udpstorm", AttackClass::DoS},
        {"buffer_overflow", AttackClass::U2R}, {"loadmodule", AttackClass::U2R},
        {"rootkit", AttackClass::U2R},         {"perl", AttackClass::U2R},
        {"xterm", AttackClass::U2R},           {"ps", AttackClass::U2R},
        {"guess_passwd", AttackClass::R2L},    {"ftp_write", AttackClass::R2L},
        {"imap", AttackClass::R2L},            {"phf", AttackClass::R2L},
        {"multihop", AttackClass::R2L},        {"warezmaster", AttackClass::R2L},
        {"spy", AttackClass::R2L},             {"named", AttackClass::R2L},
        {"sendmail", AttackClass::R2L},        {"snmpguess", AttackClass::R2L},
        {"xlock", AttackClass::R2L},           {"xsnoop", AttackClass::R2L},
        {"warezclient", AttackClass::R2L},     {"BENIGN", AttackClass::Benign},
    };
    for (const auto& [tag, cls] : table) {
        CAPTURE(tag);
        CHECK(m.map_tag(tag) == cls);
    }
}

TEST_CASE("cicids2017 tag table maps exhaustively") {
    const LabelMap m = default_label_map(SchemaName::cicids2017);
    const std::vector<std::pair<std::string, AttackClass>> table = {
        {"PortScan", AttackClass::Probe},
        {"DoS slowloris", AttackClass::DoS},
        {"DoS Slowhttptest", AttackClass::DoS},
        {"DoS Hulk", AttackClass::DoS},
        {"DoS GoldenEye", AttackClass::DoS},
        {"DDoS", AttackClass::DoS},
        {"Heartbleed", AttackClass::U2R},
        {"Infiltration", AttackClass::R2L},
        {"FTP-Patator", AttackClass::R2L},
        {"SSH-Patator", AttackClass::R2L},
        {"Web Attack - Brute Force", AttackClass::R2L},
        {"Web Attack - XSS", AttackClass::R2L},
        {"Web Attack - Sql Injection", AttackClass::R2L},
        {"BENIGN", AttackClass::Benign},
    };
    for (const auto& [tag, cls] : table) {
        CAPTURE(tag);
        CHECK(m.map_tag(tag) == cls);
    }
}

TEST_CASE("tag normalization") {
    const LabelMap kdd = default_label_map(SchemaName::kdd99);
    CHECK(kdd.map_tag("smurf.") == AttackClass::DoS);
    CHECK(kdd.map_tag("NORMAL.") == AttackClass::Benign);
    CHECK(kdd.map_tag("  neptune. ") == AttackClass::DoS);

    const LabelMap cic = default_label_map(SchemaName::cicids2017);
    CHECK(cic.map_tag("Web Attack \xE2\x80\x93 Brute Force") == AttackClass::R2L);
    CHECK(cic.map_tag("Web Attack \x96 XSS") == AttackClass::R2L);
    CHECK(cic.map_tag(" PortScan ") == AttackClass::Probe);

    // unknown tags abort, never default to Benign
    CHECK_THROWS_AS((void)kdd.map_tag("zeroday"), UnknownTagError);
    CHECK_THROWS_AS((void)cic.map_tag("Bot"), UnknownTagError);
    try {
        (void)kdd.map_tag("zeroday.");
        FAIL("expected UnknownTagError");
    } catch (const UnknownTagError& e) {
        CHECK(e.tag() == "zeroday");
    }
}

TEST_CASE("role map defaults follow the attack-vector classification") {
    const RoleMap m = default_role_map();
    CHECK(m.map_class(AttackClass::Probe) == Role::PotentialIntruder);
    CHECK(m.map_class(AttackClass::U2R) == Role::Intruder);
    CHECK(m.map_class(AttackClass::R2L) == Role::Intruder);
    CHECK(m.map_class(AttackClass::Benign) == Role::NormalUser);
    CHECK(m.map_class(AttackClass::DoS) == Role::Excluded);
    CHECK(m.map_role(kInsiderMaliciousTag) == Role::MaliciousUser);
    CHECK(m.map_role(kInsiderNormalTag) == Role::NormalUser);
    CHECK_THROWS_AS((void)m.map_role("unmapped"), UnknownTagError);
}

TEST_CASE("mapping files override defaults and round-trip the builtin tables") {
    TempDir tmp;
    dump_default_maps(tmp.path.string());

    // round trip: loading the dumped tables reproduces the defaults bit-exactly
    for (auto schema : {SchemaName::kdd99, SchemaName::nslkdd, SchemaName::cicids2017}) {
        const MappingFile mf = load_mapping_file(tmp.file(schema_name_str(schema) + ".map"));
        const LabelMap defaults = default_label_map(schema);
        CHECK(mf.label_entries == defaults.entries);
    }
    const MappingFile roles = load_mapping_file(tmp.file("roles.map"));
    CHECK(roles.role_entries == default_role_map().entries);

    // operator extension: CICIDS Bot traffic and a DoS role override
    write_file(tmp.file("custom.map"), "# operator overrides\nBot=Probe\nDoS=PotentialIntruder\n");
    const MappingFile custom = load_mapping_file(tmp.file("custom.map"));
    const LabelMap cic = label_map_with_overrides(SchemaName::cicids2017, custom);
    CHECK(cic.map_tag("Bot") == AttackClass::Probe);
    const RoleMap rm = role_map_with_overrides(custom);
    CHECK(rm.map_class(AttackClass::DoS) == Role::PotentialIntruder);

    write_file(tmp.file("bad.map"), "x=NotAClass\n");
    CHECK_THROWS_AS((void)load_mapping_file(tmp.file("bad.map")), DataError);
}

TEST_CASE("load_dataset: well-formed kdd99 file") {
    TempDir tmp;
    write_file(tmp.file("mini.csv"), kdd_row("normal.") + "\n" + kdd_row("smurf.") + "\n" + kdd_row("nmap.") + "\n");
    const auto result = load_dataset(tmp.file("mini.csv"), kdd99_schema());
    CHECK(result.records.size() == 3);
    CHECK(result.rejects.rejects.empty());
    CHECK(result.records[1].values.back() == "smurf.");
    CHECK(result.records[2].line == 3);
}

TEST_CASE("load_dataset: short row rejected with line number") {
    TempDir tmp;
    std::string content;
    for (int i = 0; i < 100; ++i) content += kdd_row("normal.") + "\n";
    content += kdd_row("smurf.", 40) + "\n";  // 40 features + tag = 41 cells, one short
    write_file(tmp.file("mini.csv"), content);
    const auto result = load_dataset(tmp.file("mini.csv"), kdd99_schema());
    CHECK(result.records.size() == 100);
    REQUIRE(result.rejects.rejects.size() == 1);
    CHECK(result.rejects.rejects[0].line == 101);

    auto report_path = tmp.file("rejects.txt");
    result.rejects.write(report_path);
    std::ifstream in(report_path);
    std::string line;
    std::getline(in, line);
    CHECK(line.find("101") != std::string::npos);
}

TEST_CASE("load_dataset: >1% rejects is a hard failure") {
    TempDir tmp;
    write_file(tmp.file("bad.csv"), "1,2,3\n4,5\n" + kdd_row("normal.") + "\n");
    CHECK_THROWS_AS((void)load_dataset(tmp.file("bad.csv"), kdd99_schema()), DataError);
}

TEST_CASE("load_dataset: nslkdd difficulty column ignored, label retained") {
    TempDir tmp;
    write_file(tmp.file("nsl.csv"), kdd_row("neptune") + ",21\n");
    const auto schema = nslkdd_schema();
    const auto result = load_dataset(tmp.file("nsl.csv"), schema);
    REQUIRE(result.records.size() == 1);
    const auto& rec = result.records[0];
    CHECK(rec.values.size() == 43);
    CHECK(rec.values[schema.label_index()] == "neptune");
    CHECK(schema.columns.back().kind == ColumnKind::ignored);
    CHECK(default_label_map(SchemaName::nslkdd).map_tag(rec.values[schema.label_index()]) == AttackClass::DoS);
}

TEST_CASE("load_dataset: identical bytes give identical streams and rejects") {
    TempDir tmp;
    std::string content;
    for (int i = 0; i < 150; ++i) content += kdd_row(i % 7 == 0 ? "nmap." : "normal.") + "\n";
    content += "too,short\n";
    write_file(tmp.file("a.csv"), content);
    write_file(tmp.file("b.csv"), content);
    const auto ra = load_dataset(tmp.file("a.csv"), kdd99_schema());
    const auto rb = load_dataset(tmp.file("b.csv"), kdd99_schema());
    REQUIRE(ra.records.size() == rb.records.size());
    for (size_t i = 0; i < ra.records.size(); ++i) {
        CHECK(ra.records[i].values == rb.records[i].values);
        CHECK(ra.records[i].line == rb.records[i].line);
    }
    REQUIRE(ra.rejects.rejects.size() == rb.rejects.rejects.size());
    CHECK(ra.rejects.rejects[0].line == rb.rejects.rejects[0].line);
}

TEST_CASE("cicids2017 schema from header") {
    std::vector<std::string> header;
    for (int i = 0; i < 77; ++i) header.push_back("Feature " + std::to_string(i));
    header.push_back(" Label");
    const auto schema = cicids2017_schema(header);
    CHECK(schema.column_count() == 78);
    CHECK(schema.label_index() == 77);
    CHECK(schema.has_header);

    std::vector<std::string> tiny(5, "x");
    CHECK_THROWS_AS((void)cicids2017_schema(tiny), DataError);
}

TEST_CASE("quoted csv cells parse") {
    auto cells = split_csv_line("a,\"b,c\",\"d\"\"e\",f", true);
    REQUIRE(cells.size() == 4);
    CHECK(cells[1] == "b,c");
    CHECK(cells[2] == "d\"e");
}
