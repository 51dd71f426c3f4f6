#include "idu/common.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace idu {

std::string Fnv64::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h_));
    return std::string(buf);
}

std::string digest_hex(std::string_view bytes) {
    Fnv64 f;
    f.update(bytes);
    return f.hex();
}

std::string digest_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for digest: " + path);
    Fnv64 f;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        f.update(buf, static_cast<size_t>(in.gcount()));
    }
    return f.hex();
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool parse_number(std::string_view cell, double& out) {
    std::string t = trim(cell);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

}  // namespace idu
