#include "idu/ueba.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace idu::ueba {

using ingest::AttackClass;
using ingest::Role;

namespace {

constexpr double kDay = 86400.0;
constexpr double kHour = 3600.0;

bool is_off_hours(double hour) { return hour < 7.0 || hour >= 19.0; }

double hour_of(double timestamp) { return std::fmod(timestamp, kDay) / kHour; }

enum class Anomaly { off_hours_spike, mass_file_access, exfiltration };

struct SessionSketch {
    double logon_hour;
    bool malicious;
    Anomaly anomaly;
};

}  // namespace

std::string event_kind_str(EventKind k) {
    switch (k) {
        case EventKind::logon: return "logon";
        case EventKind::logoff: return "logoff";
        case EventKind::file_access: return "file_access";
        case EventKind::email: return "email";
        case EventKind::device: return "device";
        case EventKind::http: return "http";
    }
    return "?";
}

const std::array<const char*, SessionFeatures::kWidth>& SessionFeatures::feature_names() {
    static const std::array<const char*, kWidth> names = {
        "logon_hour",   "off_hours_ratio", "event_count",      "distinct_devices",
        "file_ops",     "upload_bytes",    "download_bytes",   "email_count",
        "email_recipients", "http_count",  "new_device_flag",  "geo_change_flag"};
    return names;
}

int malicious_user_count(const UebaConfig& cfg) {
    if (cfg.malicious_fraction < 0.0 || cfg.malicious_fraction > 1.0)
        throw ConfigError("ueba: malicious_fraction must be in [0,1]");
    return static_cast<int>(std::lround(cfg.malicious_fraction * cfg.n_users));
}

std::vector<BehaviorRecord> generate_users(const UebaConfig& cfg) {
    const int quota = malicious_user_count(cfg);
    std::vector<int> order(cfg.n_users);
    for (int i = 0; i < cfg.n_users; ++i) order[i] = i;
    Rng pick = Rng::derive(cfg.seed, 0xA11CE);
    pick.shuffle(order);
    std::set<int> malicious(order.begin(), order.begin() + quota);

    std::vector<BehaviorRecord> out;
    for (int u = 0; u < cfg.n_users; ++u) {
        Rng rng = Rng::derive(cfg.seed, static_cast<uint64_t>(u) + 1);
        const bool mal_user = malicious.count(u) > 0;
        const double base_hour = 8.0 + rng.uniform() * 2.5;
        const int primary_device = static_cast<int>(rng.uniform_u64(3));
        double t = 0.0;

        for (int s = 0; s < cfg.sessions_per_user; ++s) {
            // each of a malicious user's sessions may carry an anomaly; the
            // first always does, so every malicious user exhibits a pattern
            const bool mal_session = mal_user && (s == 0 || rng.uniform() < 0.6);
            const Anomaly anomaly = static_cast<Anomaly>(rng.uniform_u64(3));

            double logon_hour = std::clamp(base_hour + rng.gauss() * 1.2, 6.0, 18.5);
            if (mal_session && anomaly == Anomaly::off_hours_spike)
                logon_hour = static_cast<double>(rng.uniform_u64(5));  // 0..4 am
            t = s * kDay + logon_hour * kHour;

            BehaviorRecord logon;
            logon.user = u;
            logon.session = s;
            logon.kind = EventKind::logon;
            logon.timestamp = t;
            logon.device_id = primary_device;
            logon.off_hours = is_off_hours(logon_hour);
            logon.injected_anomaly = mal_session && anomaly == Anomaly::off_hours_spike;
            out.push_back(logon);

            const int n_mid = 2 + static_cast<int>(rng.uniform_u64(7));
            for (int e = 0; e < n_mid; ++e) {
                const double roll = rng.uniform();
                BehaviorRecord r;
                r.user = u;
                r.session = s;
                t += 60.0 + rng.uniform() * 600.0;
                r.timestamp = t;
                r.device_id = primary_device;
                r.off_hours = is_off_hours(hour_of(t));
                if (roll < 0.4) {
                    r.kind = EventKind::file_access;
                    r.bytes_down = std::floor(rng.uniform() * 2e6);
                    r.bytes_up = std::floor(rng.uniform() * 2e5);
                } else if (roll < 0.7) {
                    r.kind = EventKind::http;
                    r.bytes_down = std::floor(rng.uniform() * 5e5);
                } else if (roll < 0.9) {
                    r.kind = EventKind::email;
                    r.recipients = 1 + static_cast<int>(rng.uniform_u64(4));
                } else {
                    r.kind = EventKind::device;
                    r.new_device = rng.uniform() < 0.05;
                    r.device_id = r.new_device ? 3 + static_cast<int>(rng.uniform_u64(4)) : primary_device;
                }
                out.push_back(r);
            }

            if (mal_session && anomaly == Anomaly::mass_file_access) {
                const int burst = 40 + static_cast<int>(rng.uniform_u64(80));
                for (int e = 0; e < burst; ++e) {
                    BehaviorRecord r;
                    r.user = u;
                    r.session = s;
                    t += 1.0 + rng.uniform() * 5.0;
                    r.timestamp = t;
                    r.kind = EventKind::file_access;
                    r.device_id = primary_device;
                    r.bytes_down = std::floor(rng.uniform() * 4e6);
                    r.off_hours = is_off_hours(hour_of(t));
                    r.injected_anomaly = true;
                    out.push_back(r);
                }
            }
            if (mal_session && anomaly == Anomaly::exfiltration) {
                BehaviorRecord r;
                r.user = u;
                r.session = s;
                t += 120.0;
                r.timestamp = t;
                r.kind = EventKind::file_access;
                r.device_id = primary_device;
                r.bytes_up = std::floor(5e7 * (1.0 + 9.0 * rng.uniform()));
                r.new_device = rng.uniform() < 0.5;
                if (r.new_device) r.device_id = 3 + static_cast<int>(rng.uniform_u64(4));
                r.geo_change = rng.uniform() < 0.5;
                r.off_hours = is_off_hours(hour_of(t));
                r.injected_anomaly = true;
                out.push_back(r);
            }

            BehaviorRecord logoff;
            logoff.user = u;
            logoff.session = s;
            logoff.kind = EventKind::logoff;
            t += 60.0;
            logoff.timestamp = t;
            logoff.device_id = primary_device;
            logoff.off_hours = is_off_hours(hour_of(t));
            out.push_back(logoff);
        }
    }
    return out;
}

std::vector<SessionFeatures> sessionize(const std::vector<BehaviorRecord>& records) {
    std::vector<SessionFeatures> out;
    size_t i = 0;
    while (i < records.size()) {
        const int user = records[i].user;
        const int session = records[i].session;
        SessionFeatures f;
        f.user = user;
        f.session = session;
        std::set<int> devices;
        bool malicious = false;
        bool logon_seen = false;
        double off_hours_events = 0, total = 0;
        while (i < records.size() && records[i].user == user && records[i].session == session) {
            const auto& r = records[i];
            total += 1;
            off_hours_events += r.off_hours ? 1 : 0;
            devices.insert(r.device_id);
            if (r.kind == EventKind::logon && !logon_seen) {
                f.v[0] = hour_of(r.timestamp);
                logon_seen = true;
            }
            if (r.kind == EventKind::file_access) f.v[4] += 1;
            if (r.kind == EventKind::email) {
                f.v[7] += 1;
                f.v[8] += r.recipients;
            }
            if (r.kind == EventKind::http) f.v[9] += 1;
            f.v[5] += r.bytes_up;
            f.v[6] += r.bytes_down;
            if (r.new_device) f.v[10] = 1;
            if (r.geo_change) f.v[11] = 1;
            malicious = malicious || r.injected_anomaly;
            ++i;
        }
        f.v[1] = total > 0 ? off_hours_events / total : 0;
        f.v[2] = total;
        f.v[3] = static_cast<double>(devices.size());
        f.insider_label = malicious ? ingest::kInsiderMaliciousTag : ingest::kInsiderNormalTag;
        out.push_back(f);
    }
    return out;
}

long JoinPolicy::quota(AttackClass c) const {
    auto it = class_mix.find(c);
    if (it == class_mix.end()) return 0;
    return std::lround(it->second * static_cast<double>(total));
}

namespace {

// Without-replacement sampler over an index pool; recycles (reshuffles) when
// allowed, otherwise reports the starved stratum.
class StratumSampler {
public:
    StratumSampler(std::string name, size_t pool_size, bool allow_recycle, Rng rng)
        : name_(std::move(name)), allow_recycle_(allow_recycle), rng_(rng) {
        pool_.resize(pool_size);
        for (size_t i = 0; i < pool_size; ++i) pool_[i] = i;
        rng_.shuffle(pool_);
    }

    size_t draw(std::vector<std::string>& warnings) {
        if (pool_.empty()) throw DataError("join: stratum \"" + name_ + "\" has no source records");
        if (next_ == pool_.size()) {
            if (!allow_recycle_) throw DataError("join: stratum \"" + name_ + "\" exhausted and recycling is off");
            if (!warned_) {
                warnings.push_back("stratum \"" + name_ + "\" exhausted; recycling");
                warned_ = true;
            }
            rng_.shuffle(pool_);
            next_ = 0;
        }
        return pool_[next_++];
    }

private:
    std::string name_;
    bool allow_recycle_;
    Rng rng_;
    std::vector<size_t> pool_;
    size_t next_ = 0;
    bool warned_ = false;
};

}  // namespace

JoinResult join_synergistic(const std::vector<LabeledFlow>& flows,
                            const std::vector<SessionFeatures>& sessions, const JoinPolicy& policy,
                            const ingest::RoleMap& roles, uint64_t seed) {
    if (flows.empty()) throw DataError("join: no flow records");
    if (sessions.empty()) throw DataError("join: no session records");

    std::map<AttackClass, std::vector<size_t>> flows_by_class;
    for (size_t i = 0; i < flows.size(); ++i) flows_by_class[flows[i].cls].push_back(i);
    std::vector<size_t> normal_sessions, malicious_sessions;
    for (size_t i = 0; i < sessions.size(); ++i) {
        if (sessions[i].insider_label == ingest::kInsiderMaliciousTag) malicious_sessions.push_back(i);
        else normal_sessions.push_back(i);
    }

    JoinResult result;
    uint64_t stream = 1;
    auto sampler_for = [&](const std::string& name, size_t n) {
        return StratumSampler(name, n, policy.allow_recycle, Rng::derive(seed, stream++));
    };

    StratumSampler normal_sampler = sampler_for("normal sessions", normal_sessions.size());

    const AttackClass class_order[] = {AttackClass::Benign, AttackClass::Probe, AttackClass::DoS,
                                       AttackClass::U2R, AttackClass::R2L};
    for (AttackClass cls : class_order) {
        const long quota = policy.quota(cls);
        if (quota <= 0) continue;
        auto it = flows_by_class.find(cls);
        const size_t pool = it == flows_by_class.end() ? 0 : it->second.size();
        StratumSampler flow_sampler = sampler_for(ingest::class_str(cls) + " flows", pool);

        long n_malicious = 0;
        if (cls == AttackClass::Benign)
            n_malicious = std::lround(policy.benign_malicious_fraction * static_cast<double>(quota));
        StratumSampler mal_sampler = sampler_for("insider-malicious sessions", malicious_sessions.size());

        for (long k = 0; k < quota; ++k) {
            const size_t fi = it->second[flow_sampler.draw(result.warnings)];
            SynergisticRecord rec;
            rec.flow_cells = flows[fi].features;
            rec.cls = cls;
            if (cls == AttackClass::Benign && k < n_malicious) {
                const size_t si = malicious_sessions[mal_sampler.draw(result.warnings)];
                rec.ueba = sessions[si].v;
                rec.role = roles.map_role(ingest::kInsiderMaliciousTag);
            } else {
                const size_t si = normal_sessions[normal_sampler.draw(result.warnings)];
                rec.ueba = sessions[si].v;
                rec.role = roles.map_class(cls);
            }
            result.records.push_back(std::move(rec));
        }
    }

    Rng final_shuffle = Rng::derive(seed, 0x5F1E1D);
    final_shuffle.shuffle(result.records);
    return result;
}

void write_synergistic_csv(const std::string& path, const std::vector<SynergisticRecord>& records,
                           const std::vector<std::string>& flow_col_names,
                           const std::string& config_digest) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write synergistic csv: " + path);
    out << "# config=" << config_digest << "\n";
    for (const auto& name : flow_col_names) out << "flow_" << name << ",";
    for (const char* name : SessionFeatures::feature_names()) out << "ueba_" << name << ",";
    out << "class,role\n";
    char buf[64];
    for (const auto& r : records) {
        if (r.flow_cells.size() != flow_col_names.size())
            throw ShapeError("synergistic record width mismatch");
        for (const auto& cell : r.flow_cells) out << cell << ",";
        for (double v : r.ueba) {
            std::snprintf(buf, sizeof(buf), "%.10g", v);
            out << buf << ",";
        }
        out << ingest::class_str(r.cls) << "," << ingest::role_str(r.role) << "\n";
    }
}

}  // namespace idu::ueba
