#include "idu/schema.hpp"

#include <set>

namespace idu::ingest {

namespace {

// The 41 KDD-family feature columns in file order.
const char* kKddFeatures[] = {
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};

const std::set<std::string> kKddCategorical = {"protocol_type", "service", "flag"};

// CICIDS2017 identifier/timestamp columns carry no flow semantics.
const std::set<std::string> kCicidsIgnored = {"Flow ID", "Source IP", "Destination IP", "Timestamp"};

std::vector<Column> kdd_feature_columns() {
    std::vector<Column> cols;
    for (const char* name : kKddFeatures)
        cols.push_back({name, kKddCategorical.count(name) ? ColumnKind::categorical : ColumnKind::numeric});
    return cols;
}

}  // namespace

int DatasetSchema::label_index() const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].kind == ColumnKind::label) return static_cast<int>(i);
    return -1;
}

void DatasetSchema::validate() const {
    int labels = 0;
    for (const auto& c : columns) labels += c.kind == ColumnKind::label;
    if (labels != 1)
        throw ConfigError("schema " + display_name + ": expected exactly one label column, found " +
                          std::to_string(labels));
}

std::string schema_name_str(SchemaName n) {
    switch (n) {
        case SchemaName::kdd99: return "kdd99";
        case SchemaName::nslkdd: return "nslkdd";
        case SchemaName::cicids2017: return "cicids2017";
        case SchemaName::synergistic: return "synergistic";
    }
    return "?";
}

SchemaName schema_name_from_str(const std::string& s) {
    if (s == "kdd99") return SchemaName::kdd99;
    if (s == "nslkdd") return SchemaName::nslkdd;
    if (s == "cicids2017") return SchemaName::cicids2017;
    if (s == "synergistic") return SchemaName::synergistic;
    throw ConfigError("unknown schema: " + s);
}

DatasetSchema kdd99_schema() {
    DatasetSchema s;
    s.name = SchemaName::kdd99;
    s.display_name = "kdd99";
    s.columns = kdd_feature_columns();
    s.columns.push_back({"label", ColumnKind::label});
    s.validate();
    return s;
}

DatasetSchema nslkdd_schema() {
    DatasetSchema s;
    s.name = SchemaName::nslkdd;
    s.display_name = "nslkdd";
    s.columns = kdd_feature_columns();
    s.columns.push_back({"label", ColumnKind::label});
    s.columns.push_back({"difficulty", ColumnKind::ignored});
    s.validate();
    return s;
}

DatasetSchema cicids2017_schema(const std::vector<std::string>& header) {
    if (header.size() < 70)
        throw DataError("cicids2017: header has " + std::to_string(header.size()) +
                        " columns, expected at least 70");
    DatasetSchema s;
    s.name = SchemaName::cicids2017;
    s.display_name = "cicids2017";
    s.has_header = true;
    s.quoted_fields = true;
    for (const auto& raw : header) {
        const std::string name = trim(raw);
        ColumnKind kind = ColumnKind::numeric;
        if (name == "Label") kind = ColumnKind::label;
        else if (kCicidsIgnored.count(name)) kind = ColumnKind::ignored;
        s.columns.push_back({name, kind});
    }
    s.validate();
    return s;
}

DatasetSchema synergistic_schema(const DatasetSchema& base, const std::vector<std::string>& header,
                                 bool role_task) {
    DatasetSchema s;
    s.name = SchemaName::synergistic;
    s.display_name = "synergistic(" + base.display_name + ")";
    s.has_header = true;
    s.quoted_fields = true;
    for (const auto& raw : header) {
        const std::string name = trim(raw);
        if (name == "class") {
            s.columns.push_back({name, role_task ? ColumnKind::ignored : ColumnKind::label});
        } else if (name == "role") {
            s.columns.push_back({name, role_task ? ColumnKind::label : ColumnKind::ignored});
        } else if (name.rfind("flow_", 0) == 0) {
            const std::string orig = name.substr(5);
            ColumnKind kind = ColumnKind::numeric;
            bool found = false;
            for (const auto& c : base.columns)
                if (c.name == orig) {
                    kind = c.kind == ColumnKind::categorical ? ColumnKind::categorical : ColumnKind::numeric;
                    found = true;
                    break;
                }
            if (!found) throw DataError("synergistic header column " + name + " not in base schema");
            s.columns.push_back({name, kind});
        } else if (name.rfind("ueba_", 0) == 0) {
            s.columns.push_back({name, ColumnKind::numeric});
        } else {
            throw DataError("synergistic header: unexpected column " + name);
        }
    }
    s.validate();
    return s;
}

}  // namespace idu::ingest
