#include "idu/labelmap.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace idu::ingest {

namespace {

// KDDCup99 tag table.
const std::pair<const char*, AttackClass> kKdd99Tags[] = {
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
    {"warezmaster", AttackClass::R2L}, {"benign", AttackClass::Benign},
    // raw KDD99 files tag normal traffic "normal."
    {"normal", AttackClass::Benign},
};

// NSL-KDD tag table.
const std::pair<const char*, AttackClass> kNslKddTags[] = {
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
    {"warezclient", AttackClass::R2L},     {"benign", AttackClass::Benign},
    {"normal", AttackClass::Benign},
};

// CICIDS2017 tag table; matching is exact after trim + dash unification.
const std::pair<const char*, AttackClass> kCicidsTags[] = {
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

// Replaces UTF-8 en dash (0xE2 0x80 0x93) and the cp1252 byte 0x96 with '-'.
std::string unify_dashes(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
            static_cast<unsigned char>(s[i + 2]) == 0x93) {
            out += '-';
            i += 2;
        } else if (c == 0x96) {
            out += '-';
        } else {
            out += s[i];
        }
    }
    return out;
}

void write_map_file(const std::string& path, const std::string& title,
                    const std::vector<std::pair<std::string, std::string>>& lines) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write mapping file: " + path);
    out << "# " << title << "\n";
    for (const auto& [k, v] : lines) out << k << "=" << v << "\n";
}

}  // namespace

std::string class_str(AttackClass c) {
    switch (c) {
        case AttackClass::Probe: return "Probe";
        case AttackClass::DoS: return "DoS";
        case AttackClass::U2R: return "U2R";
        case AttackClass::R2L: return "R2L";
        case AttackClass::Benign: return "Benign";
    }
    return "?";
}

AttackClass class_from_str(const std::string& s) {
    if (s == "Probe") return AttackClass::Probe;
    if (s == "DoS" || s == "Dos") return AttackClass::DoS;
    if (s == "U2R") return AttackClass::U2R;
    if (s == "R2L") return AttackClass::R2L;
    if (s == "Benign") return AttackClass::Benign;
    throw ConfigError("unknown attack class: " + s);
}

std::string role_str(Role r) {
    switch (r) {
        case Role::NormalUser: return "NormalUser";
        case Role::MaliciousUser: return "MaliciousUser";
        case Role::Intruder: return "Intruder";
        case Role::PotentialIntruder: return "PotentialIntruder";
        case Role::Excluded: return "Excluded";
    }
    return "?";
}

Role role_from_str(const std::string& s) {
    if (s == "NormalUser") return Role::NormalUser;
    if (s == "MaliciousUser") return Role::MaliciousUser;
    if (s == "Intruder") return Role::Intruder;
    if (s == "PotentialIntruder") return Role::PotentialIntruder;
    if (s == "Excluded") return Role::Excluded;
    throw ConfigError("unknown role: " + s);
}

std::string LabelMap::normalize(const std::string& raw) const {
    if (kdd_normalization) {
        std::string t = trim(raw);
        if (!t.empty() && t.back() == '.') t.pop_back();
        return lower(t);
    }
    return trim(unify_dashes(raw));
}

AttackClass LabelMap::map_tag(const std::string& raw) const {
    const std::string key = normalize(raw);
    auto it = entries.find(key);
    if (it == entries.end()) throw UnknownTagError(key);
    return it->second;
}

Role RoleMap::map_role(const std::string& class_or_tag) const {
    auto it = entries.find(class_or_tag);
    if (it == entries.end()) throw UnknownTagError(class_or_tag);
    return it->second;
}

LabelMap default_label_map(SchemaName schema) {
    LabelMap m;
    switch (schema) {
        case SchemaName::kdd99:
            for (const auto& [tag, cls] : kKdd99Tags) m.entries.emplace(tag, cls);
            break;
        case SchemaName::nslkdd:
            for (const auto& [tag, cls] : kNslKddTags) m.entries.emplace(tag, cls);
            break;
        case SchemaName::cicids2017:
            m.kdd_normalization = false;
            for (const auto& [tag, cls] : kCicidsTags) m.entries.emplace(tag, cls);
            break;
        case SchemaName::synergistic:
            // synergistic CSVs carry already-mapped class names
            for (auto cls : {AttackClass::Probe, AttackClass::DoS, AttackClass::U2R, AttackClass::R2L,
                             AttackClass::Benign})
                m.entries.emplace(lower(class_str(cls)), cls);
            break;
    }
    return m;
}

RoleMap default_role_map() {
    RoleMap m;
    m.entries[class_str(AttackClass::Benign)] = Role::NormalUser;
    m.entries[class_str(AttackClass::DoS)] = Role::Excluded;
    m.entries[class_str(AttackClass::Probe)] = Role::PotentialIntruder;
    m.entries[class_str(AttackClass::U2R)] = Role::Intruder;
    m.entries[class_str(AttackClass::R2L)] = Role::Intruder;
    m.entries[kInsiderNormalTag] = Role::NormalUser;
    m.entries[kInsiderMaliciousTag] = Role::MaliciousUser;
    return m;
}

MappingFile load_mapping_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mapping file: " + path);
    MappingFile mf;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        try {
            mf.label_entries[key] = class_from_str(value);
            continue;
        } catch (const ConfigError&) {
        }
        try {
            mf.role_entries[key] = role_from_str(value);
        } catch (const ConfigError&) {
            throw DataError(path + ":" + std::to_string(line_no) + ": \"" + value +
                            "\" is neither an attack class nor a role");
        }
    }
    return mf;
}

LabelMap label_map_with_overrides(SchemaName schema, const MappingFile& overrides) {
    LabelMap m = default_label_map(schema);
    for (const auto& [tag, cls] : overrides.label_entries) m.entries[m.normalize(tag)] = cls;
    return m;
}

RoleMap role_map_with_overrides(const MappingFile& overrides) {
    RoleMap m = default_role_map();
    for (const auto& [key, role] : overrides.role_entries) m.entries[key] = role;
    return m;
}

void dump_default_maps(const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (auto schema : {SchemaName::kdd99, SchemaName::nslkdd, SchemaName::cicids2017}) {
        LabelMap m = default_label_map(schema);
        std::vector<std::pair<std::string, std::string>> lines;
        for (const auto& [tag, cls] : m.entries) lines.emplace_back(tag, class_str(cls));
        write_map_file(dir + "/" + schema_name_str(schema) + ".map",
                       schema_name_str(schema) + " tag to class mapping", lines);
    }
    RoleMap r = default_role_map();
    std::vector<std::pair<std::string, std::string>> lines;
    for (const auto& [key, role] : r.entries) lines.emplace_back(key, role_str(role));
    write_map_file(dir + "/roles.map", "class/session tag to role mapping", lines);
}

}  // namespace idu::ingest
