#pragma once

#include <string>
#include <vector>

#include "idu/labelmap.hpp"
#include "idu/schema.hpp"

namespace idu::ingest {

struct FlowRecord {
    std::vector<std::string> values;  // cells aligned to the schema
    long line = 0;                    // 1-based source line number
};

struct Reject {
    long line;
    std::string reason;
};

struct RejectReport {
    std::vector<Reject> rejects;
    long total_rows = 0;

    // one {line, reason} record per line, after a `# config=` comment
    void write(const std::string& path, const std::string& config_digest = "") const;
};

struct LoadResult {
    std::vector<FlowRecord> records;
    RejectReport rejects;
};

/// Splits one CSV line; honors double quotes when `quoted` is set.
std::vector<std::string> split_csv_line(const std::string& line, bool quoted);

/// First non-comment line of a file, parsed as a quoted CSV header.
std::vector<std::string> read_csv_header(const std::string& path);

/// Streams the file into schema-aligned records. Rows with the wrong cell
/// count are collected into the reject report; more than 1% rejected rows is
/// a hard DataError. Lines starting with '#' are ignored.
LoadResult load_dataset(const std::string& path, const DatasetSchema& schema);

}  // namespace idu::ingest
