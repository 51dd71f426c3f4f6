#pragma once

// Synthetic KDD-format traffic generator for end-to-end tests: 41 features +
// tag, with strongly class-dependent feature distributions so a correct
// pipeline separates the classes. Not a reproduction of any real dataset.

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "idu/common.hpp"

namespace testutil {

struct KddMix {
    double normal = 0.55;
    double dos = 0.30;
    double probe = 0.09;
    double r2l = 0.045;
    double u2r = 0.015;
};

inline std::string synth_kdd_row(idu::Rng& rng, const std::string& family) {
    std::vector<std::string> f(41, "0");
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    auto rate = [](double v) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    f[1] = "tcp";
    f[2] = "http";
    f[3] = "SF";
    if (family == "normal") {
        f[0] = num(std::floor(rng.uniform() * 10));
        f[4] = num(std::floor(200 + rng.uniform() * 2000));
        f[5] = num(std::floor(500 + rng.uniform() * 5000));
        f[11] = "1";
        f[22] = num(std::floor(1 + rng.uniform() * 8));
        f[23] = num(std::floor(1 + rng.uniform() * 8));
        f[28] = rate(0.9 + rng.uniform() * 0.1);
    } else if (family == "dos") {
        f[1] = rng.uniform() < 0.5 ? "icmp" : "tcp";
        f[2] = f[1] == "icmp" ? "ecr_i" : "private";
        f[3] = rng.uniform() < 0.7 ? "S0" : "REJ";
        f[4] = num(std::floor(rng.uniform() * 1032));
        f[22] = num(std::floor(400 + rng.uniform() * 111));
        f[23] = num(std::floor(400 + rng.uniform() * 111));
        f[24] = rate(0.8 + rng.uniform() * 0.2);
        f[25] = rate(0.8 + rng.uniform() * 0.2);
        f[28] = rate(rng.uniform() * 0.1);
    } else if (family == "probe") {
        f[2] = rng.uniform() < 0.5 ? "private" : "eco_i";
        f[3] = rng.uniform() < 0.5 ? "REJ" : "SF";
        f[4] = num(std::floor(rng.uniform() * 20));
        f[22] = num(std::floor(100 + rng.uniform() * 150));
        f[29] = rate(0.7 + rng.uniform() * 0.3);
        f[31] = num(std::floor(200 + rng.uniform() * 55));
        f[34] = rate(0.6 + rng.uniform() * 0.4);
    } else if (family == "u2r") {
        f[0] = num(std::floor(30 + rng.uniform() * 200));
        f[2] = "telnet";
        f[4] = num(std::floor(300 + rng.uniform() * 2000));
        f[5] = num(std::floor(1000 + rng.uniform() * 8000));
        f[9] = num(std::floor(10 + rng.uniform() * 20));
        f[11] = "1";
        f[13] = "1";
        f[15] = num(std::floor(2 + rng.uniform() * 8));
        f[16] = num(std::floor(1 + rng.uniform() * 4));
        f[22] = "1";
    } else {  // r2l
        f[0] = num(std::floor(5 + rng.uniform() * 60));
        f[2] = rng.uniform() < 0.5 ? "ftp" : "imap4";
        f[4] = num(std::floor(100 + rng.uniform() * 1500));
        f[10] = num(std::floor(3 + rng.uniform() * 5));
        f[11] = rng.uniform() < 0.3 ? "1" : "0";
        f[21] = "1";
        f[22] = num(std::floor(1 + rng.uniform() * 4));
    }
    std::string row;
    for (const auto& cell : f) row += cell + ",";
    return row;
}

inline const char* pick_tag(idu::Rng& rng, const std::string& family, bool nsl) {
    if (family == "normal") return "normal";
    if (family == "dos") {
        const char* tags[] = {"smurf", "neptune", "back", "teardrop"};
        return tags[rng.uniform_u64(4)];
    }
    if (family == "probe") {
        const char* kdd[] = {"ipsweep", "nmap", "portsweep"};
        const char* nslt[] = {"ipsweep", "nmap", "portsweep", "satan"};
        return nsl ? nslt[rng.uniform_u64(4)] : kdd[rng.uniform_u64(3)];
    }
    if (family == "u2r") {
        const char* tags[] = {"buffer_overflow", "rootkit", "loadmodule", "perl"};
        return tags[rng.uniform_u64(4)];
    }
    const char* tags[] = {"guess_passwd", "ftp_write", "imap", "warezclient"};
    return tags[rng.uniform_u64(4)];
}

/// Writes n rows in KDD99 (tag with trailing dot) or NSL-KDD (tag,difficulty)
/// format; returns per-family counts.
inline std::map<std::string, long> write_synth_kdd(const std::string& path, long n, uint64_t seed,
                                                   bool nsl = false, KddMix mix = {}) {
    idu::Rng rng(seed);
    std::ofstream out(path);
    std::map<std::string, long> counts;
    for (long i = 0; i < n; ++i) {
        const double roll = rng.uniform();
        std::string family = "normal";
        double acc = mix.normal;
        if (roll >= acc && roll < acc + mix.dos) family = "dos";
        acc += mix.dos;
        if (roll >= acc && roll < acc + mix.probe) family = "probe";
        acc += mix.probe;
        if (roll >= acc && roll < acc + mix.r2l) family = "r2l";
        acc += mix.r2l;
        if (roll >= acc) family = "u2r";
        ++counts[family];
        out << synth_kdd_row(rng, family) << pick_tag(rng, family, nsl);
        if (nsl) out << "," << (10 + rng.uniform_u64(11));
        else out << ".";
        out << "\n";
    }
    return counts;
}

}  // namespace testutil
