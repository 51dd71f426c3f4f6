#include "idu/ingest.hpp"

#include <fstream>
#include <sstream>

namespace idu::ingest {

void RejectReport::write(const std::string& path, const std::string& config_digest) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write reject report: " + path);
    if (!config_digest.empty()) out << "# config=" << config_digest << "\n";
    for (const auto& r : rejects) out << "{\"line\": " << r.line << ", \"reason\": \"" << r.reason << "\"}\n";
}

std::vector<std::string> split_csv_line(const std::string& line, bool quoted) {
    if (!quoted) return split(line, ',');
    std::vector<std::string> out;
    std::string cell;
    bool in_quotes = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

std::vector<std::string> read_csv_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        return split_csv_line(line, true);
    }
    throw DataError("no header line in " + path);
}

LoadResult load_dataset(const std::string& path, const DatasetSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    LoadResult result;
    const size_t want = schema.column_count();
    std::string line;
    long line_no = 0;
    bool header_skipped = !schema.has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header_skipped) {
            header_skipped = true;
            continue;
        }
        ++result.rejects.total_rows;
        auto cells = split_csv_line(line, schema.quoted_fields);
        if (cells.size() != want) {
            result.rejects.rejects.push_back(
                {line_no, "expected " + std::to_string(want) + " cells, got " + std::to_string(cells.size())});
            continue;
        }
        result.records.push_back({std::move(cells), line_no});
    }
    const long total = result.rejects.total_rows;
    const long bad = static_cast<long>(result.rejects.rejects.size());
    if (total > 0 && bad * 100 > total) {
        std::ostringstream os;
        os << path << ": " << bad << " of " << total << " rows rejected (>1%); first rejects:";
        for (size_t i = 0; i < result.rejects.rejects.size() && i < 5; ++i)
            os << " [line " << result.rejects.rejects[i].line << ": " << result.rejects.rejects[i].reason << "]";
        throw DataError(os.str());
    }
    return result;
}

}  // namespace idu::ingest
