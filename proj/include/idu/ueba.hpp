#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "idu/labelmap.hpp"

namespace idu::ueba {

enum class EventKind { logon, logoff, file_access, email, device, http };

std::string event_kind_str(EventKind k);

/// One synthetic user-activity event. Timestamps are seconds and
/// non-decreasing per user; session ids are unique per user.
struct BehaviorRecord {
    int user = 0;
    int session = 0;
    EventKind kind = EventKind::logon;
    double timestamp = 0;
    int device_id = 0;
    double bytes_up = 0;
    double bytes_down = 0;
    int recipients = 0;
    bool off_hours = false;
    bool new_device = false;
    bool geo_change = false;
    bool injected_anomaly = false;
};

/// Fixed-width per-session feature vector.
struct SessionFeatures {
    static constexpr int kWidth = 12;
    std::array<double, kWidth> v{};
    int user = 0;
    int session = 0;
    std::string insider_label;  // kInsiderNormalTag or kInsiderMaliciousTag

    static const std::array<const char*, kWidth>& feature_names();
};

struct UebaConfig {
    int n_users = 200;
    int sessions_per_user = 10;
    double malicious_fraction = 0.1;  // scenario mix (normal, insider-malicious) sums to 1
    uint64_t seed = 0;
};

/// Pure function of the config: identical config gives identical streams.
/// Malicious users exhibit at least one anomaly pattern (off-hours spike,
/// mass file access, or exfiltration-scale upload).
std::vector<BehaviorRecord> generate_users(const UebaConfig& cfg);

/// Number of malicious users for a config (deterministic quota).
int malicious_user_count(const UebaConfig& cfg);

/// Aggregates one feature vector per session; a session is labeled
/// insider-malicious iff it contains an injected anomaly event.
std::vector<SessionFeatures> sessionize(const std::vector<BehaviorRecord>& records);

struct LabeledFlow {
    std::vector<std::string> features;  // raw non-label feature cells
    ingest::AttackClass cls = ingest::AttackClass::Benign;
};

/// Pairing policy for the synergistic join. Quotas are llround(mix * total)
/// per class; benign-flow records pair with insider-malicious sessions for
/// the stated fraction and normal sessions otherwise; attack-class flows
/// always pair with normal sessions.
struct JoinPolicy {
    long total = 20000;
    std::map<ingest::AttackClass, double> class_mix = {
        {ingest::AttackClass::Benign, 0.40}, {ingest::AttackClass::Probe, 0.20},
        {ingest::AttackClass::U2R, 0.20},    {ingest::AttackClass::R2L, 0.20},
        {ingest::AttackClass::DoS, 0.0},
    };
    double benign_malicious_fraction = 0.5;
    bool allow_recycle = true;

    long quota(ingest::AttackClass c) const;
};

struct SynergisticRecord {
    std::vector<std::string> flow_cells;
    std::array<double, SessionFeatures::kWidth> ueba{};
    ingest::AttackClass cls = ingest::AttackClass::Benign;
    ingest::Role role = ingest::Role::NormalUser;
};

struct JoinResult {
    std::vector<SynergisticRecord> records;
    std::vector<std::string> warnings;  // recycled strata
};

/// Sampling is without replacement per stratum; exhausted strata recycle with
/// a warning when the policy allows it, otherwise the starved stratum is
/// named in the error.
JoinResult join_synergistic(const std::vector<LabeledFlow>& flows,
                            const std::vector<SessionFeatures>& sessions, const JoinPolicy& policy,
                            const ingest::RoleMap& roles, uint64_t seed);

/// CSV with header flow_*, ueba_*, class, role; `# config=<digest>` comment first.
void write_synergistic_csv(const std::string& path, const std::vector<SynergisticRecord>& records,
                           const std::vector<std::string>& flow_col_names,
                           const std::string& config_digest);

}  // namespace idu::ueba
