#pragma once

#include <string>
#include <vector>

#include "idu/common.hpp"

namespace idu::ingest {

enum class SchemaName { kdd99, nslkdd, cicids2017, synergistic };

enum class ColumnKind { categorical, numeric, label, ignored };

struct Column {
    std::string name;
    ColumnKind kind;
};

struct DatasetSchema {
    SchemaName name = SchemaName::kdd99;
    std::string display_name;
    bool has_header = false;
    bool quoted_fields = false;
    std::vector<Column> columns;

    size_t column_count() const { return columns.size(); }
    int label_index() const;
    void validate() const;  // exactly one label column
};

std::string schema_name_str(SchemaName n);
SchemaName schema_name_from_str(const std::string& s);

DatasetSchema kdd99_schema();
DatasetSchema nslkdd_schema();

/// CICIDS2017 carries its own header; the schema is derived from it and
/// validated (>= 70 columns, exactly one "Label").
DatasetSchema cicids2017_schema(const std::vector<std::string>& header);

/// Schema for the synergistic CSV written by the ueba join: flow_<col>
/// columns inherit their kind from the base schema, ueba_* are numeric,
/// and one of class/role is the label depending on the task.
DatasetSchema synergistic_schema(const DatasetSchema& base, const std::vector<std::string>& header,
                                 bool role_task);

}  // namespace idu::ingest
