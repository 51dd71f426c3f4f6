#pragma once

#include <map>
#include <string>
#include <vector>

#include "idu/schema.hpp"

namespace idu::ingest {

enum class AttackClass { Probe, DoS, U2R, R2L, Benign };

enum class Role { NormalUser, MaliciousUser, Intruder, PotentialIntruder, Excluded };

std::string class_str(AttackClass c);
AttackClass class_from_str(const std::string& s);
std::string role_str(Role r);
Role role_from_str(const std::string& s);

/// Session labels emitted by the ueba generator; role-mappable alongside the
/// five attack classes.
inline constexpr const char* kInsiderNormalTag = "normal";
inline constexpr const char* kInsiderMaliciousTag = "insider-malicious";

/// Tag -> attack class. Normalization depends on the dataset family:
/// KDD-family tags are lowercased with one trailing '.' stripped; CICIDS2017
/// tags are trimmed with en-dash variants unified to '-'.
struct LabelMap {
    std::map<std::string, AttackClass> entries;
    bool kdd_normalization = true;

    std::string normalize(const std::string& raw) const;
    AttackClass map_tag(const std::string& raw) const;  // throws UnknownTagError
};

/// Attack class or insider session tag -> role. Defaults: Benign->NormalUser,
/// insider-malicious->MaliciousUser, U2R/R2L->Intruder, Probe->PotentialIntruder,
/// DoS->Excluded (the four-role synergistic task reports no DoS role).
struct RoleMap {
    std::map<std::string, Role> entries;

    Role map_role(const std::string& class_or_tag) const;  // throws UnknownTagError
    Role map_class(AttackClass c) const { return map_role(class_str(c)); }
};

LabelMap default_label_map(SchemaName schema);
RoleMap default_role_map();

/// Mapping files: one `tag=class` or `class=role` per line, `#` comments.
/// Lines whose right-hand side names an attack class extend the label map;
/// lines naming a role extend the role map.
struct MappingFile {
    std::map<std::string, AttackClass> label_entries;
    std::map<std::string, Role> role_entries;
};

MappingFile load_mapping_file(const std::string& path);

/// Applies a mapping file on top of the defaults for `schema`.
LabelMap label_map_with_overrides(SchemaName schema, const MappingFile& overrides);
RoleMap role_map_with_overrides(const MappingFile& overrides);

/// Writes the builtin tag and role tables in mapping-file syntax.
void dump_default_maps(const std::string& dir);

}  // namespace idu::ingest
