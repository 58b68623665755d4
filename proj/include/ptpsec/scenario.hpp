#pragma once

// Scenario files (YAML) and run outputs (CSV + summary text).

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptpsec/attacks.hpp"
#include "ptpsec/simnet.hpp"

namespace ptpsec {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] int line() const noexcept { return line_; }

private:
    int line_;
};

namespace detail {

class ConfigReader {
public:
    explicit ConfigReader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& n, const std::string& what) const {
        throw ConfigError(source_, n.Mark().line + 1, what);
    }

    void expect_map(const YAML::Node& n, const std::string& what) const {
        if (!n.IsMap()) fail(n, what + " must be a mapping");
    }

    void only_keys(const YAML::Node& n, std::initializer_list<const char*> keys) const {
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& kv : n) {
            const auto k = kv.first.as<std::string>();
            if (!allowed.count(k)) fail(kv.first, "unknown key '" + k + "'");
        }
    }

    template <typename T>
    T scalar(const YAML::Node& n, const std::string& key) const {
        if (!n.IsScalar()) fail(n, "'" + key + "' must be a scalar");
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            fail(n, "'" + key + "' has an invalid value '" + n.Scalar() + "'");
        }
    }

    template <typename T>
    T get(const YAML::Node& parent, const char* key, T fallback) const {
        const auto n = parent[key];
        return n ? scalar<T>(n, key) : fallback;
    }

    std::int64_t integer_in(const YAML::Node& parent, const char* key, std::int64_t fallback, std::int64_t lo,
                            std::int64_t hi) const {
        const auto n = parent[key];
        if (!n) return fallback;
        const auto v = scalar<std::int64_t>(n, key);
        if (v < lo || v > hi) {
            fail(n, std::string("'") + key + "' must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
        return v;
    }

    std::int64_t duration(const YAML::Node& parent, const char* key, double scale, std::int64_t fallback) const {
        const auto n = parent[key];
        if (!n) return fallback;
        const double v = scalar<double>(n, key);
        if (!std::isfinite(v)) fail(n, std::string("'") + key + "' must be finite");
        return static_cast<std::int64_t>(std::llround(v * scale));
    }

    NetworkAddress address(const YAML::Node& n, const std::string& key) const {
        const auto text = scalar<std::string>(n, key);
        const auto a = NetworkAddress::parse(text);
        if (!a) fail(n, "'" + key + "' is not an IPv4 or MAC address: " + text);
        return *a;
    }

    const std::string& source() const { return source_; }

private:
    std::string source_;
};

inline void apply_node_keys(const ConfigReader& r, const YAML::Node& n, NodeConfig& c) {
    if (n["address"]) c.address = r.address(n["address"], "address");
    c.masterCapable = r.get<bool>(n, "master_capable", c.masterCapable);
    if (const auto m = n["security"]) {
        const auto s = r.scalar<std::string>(m, "security");
        const auto mode = parse_security_mode(s);
        if (!mode) r.fail(m, "unknown security mode '" + s + "'");
        c.securityMode = *mode;
    }
    c.windowSize = static_cast<std::uint32_t>(r.integer_in(n, "window", c.windowSize, 1, 1LL << 31));
    if (n["id_bits"]) c.idBits = static_cast<unsigned>(r.integer_in(n, "id_bits", 16, 2, 32));
    auto& q = c.clockQuality;
    q.priority1 = static_cast<std::uint8_t>(r.integer_in(n, "priority1", q.priority1, 0, 255));
    q.clockClass = static_cast<std::uint8_t>(r.integer_in(n, "clock_class", q.clockClass, 0, 255));
    q.clockAccuracy = static_cast<std::uint8_t>(r.integer_in(n, "clock_accuracy", q.clockAccuracy, 0, 255));
    q.offsetScaledLogVariance =
        static_cast<std::uint16_t>(r.integer_in(n, "variance", q.offsetScaledLogVariance, 0, 0xFFFF));
    q.priority2 = static_cast<std::uint8_t>(r.integer_in(n, "priority2", q.priority2, 0, 255));
    q.timeSource = static_cast<std::uint8_t>(r.integer_in(n, "time_source", q.timeSource, 0, 255));
    c.syncIntervalLog = static_cast<std::int8_t>(r.integer_in(n, "sync_interval_log", c.syncIntervalLog, -7, 6));
    c.announceIntervalLog =
        static_cast<std::int8_t>(r.integer_in(n, "announce_interval_log", c.announceIntervalLog, -3, 6));
    c.delayReqIntervalLog =
        static_cast<std::int8_t>(r.integer_in(n, "delay_req_interval_log", c.delayReqIntervalLog, -7, 6));
    c.announceTimeoutIntervals =
        static_cast<unsigned>(r.integer_in(n, "announce_timeout", c.announceTimeoutIntervals, 2, 255));
    c.trueDriftPpb = r.integer_in(n, "drift_ppb", c.trueDriftPpb, -1'000'000, 1'000'000);
    c.initialOffsetNs = r.duration(n, "initial_offset_ms", 1e6, c.initialOffsetNs);
    if (const auto s = n["servo"]) {
        r.expect_map(s, "servo");
        r.only_keys(s, {"gain", "panic_threshold_ms", "max_slew_us_per_s", "max_delay_limit_us"});
        c.servo.gain = r.get<double>(s, "gain", c.servo.gain);
        c.servo.panicThreshold = r.duration(s, "panic_threshold_ms", 1e6, c.servo.panicThreshold);
        c.servo.maxSlewRate = r.duration(s, "max_slew_us_per_s", 1e3, c.servo.maxSlewRate);
        if (s["max_delay_limit_us"]) c.servo.maxDelayLimit = r.duration(s, "max_delay_limit_us", 1e3, 0);
        if (!c.servo.valid()) r.fail(s, "servo gain must be in (0,1] and thresholds positive");
    }
    if (const auto w = n["mgmt_whitelist"]) {
        if (!w.IsSequence()) r.fail(w, "'mgmt_whitelist' must be a list of addresses");
        std::vector<NetworkAddress> list;
        for (const auto& a : w) list.push_back(r.address(a, "mgmt_whitelist"));
        c.mgmtWhitelist = std::move(list);
    }
}

#define PTPSEC_NODE_KEYS                                                                                      \
    "address", "master_capable", "security", "window", "id_bits", "priority1", "clock_class", "clock_accuracy", \
        "variance", "priority2", "time_source", "sync_interval_log", "announce_interval_log",                 \
        "delay_req_interval_log", "announce_timeout", "drift_ppb", "initial_offset_ms", "servo", "mgmt_whitelist"

inline LinkModel read_link(const ConfigReader& r, const YAML::Node& n, LinkModel base) {
    base.baseDelay = r.duration(n, "delay_us", 1e3, base.baseDelay);
    base.jitter = r.duration(n, "jitter_us", 1e3, base.jitter);
    base.mitmTap = r.get<bool>(n, "mitm_tap", base.mitmTap);
    if (base.baseDelay < 0 || base.jitter < 0) r.fail(n, "link delay and jitter must be non-negative");
    return base;
}

}  // namespace detail

// Parses a scenario document. `source` names it in diagnostics.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
    detail::ConfigReader r(source);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(source, e.mark.line + 1, e.msg);
    }
    if (!root.IsMap()) throw ConfigError(source, root.Mark().line + 1, "scenario must be a mapping");
    r.only_keys(root, {"name", "seed", "horizon_s", "sample_interval_ms", "default_link", "links", "defaults",
                       "nodes", "adversary"});

    Scenario sc;
    sc.name = r.get<std::string>(root, "name", "");
    if (sc.name.empty()) r.fail(root, "'name' is required");
    for (char ch : sc.name) {
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') {
            r.fail(root["name"], "'name' may only contain letters, digits, '_' and '-'");
        }
    }
    sc.seed = r.get<std::uint64_t>(root, "seed", sc.seed);
    sc.horizon = r.duration(root, "horizon_s", 1e9, sc.horizon);
    if (sc.horizon <= 0) r.fail(root["horizon_s"], "'horizon_s' must be positive");
    sc.sampleInterval = r.duration(root, "sample_interval_ms", 1e6, sc.sampleInterval);
    if (sc.sampleInterval <= 0) r.fail(root["sample_interval_ms"], "'sample_interval_ms' must be positive");

    if (const auto d = root["default_link"]) {
        r.expect_map(d, "default_link");
        r.only_keys(d, {"delay_us", "jitter_us"});
        sc.defaultLink = detail::read_link(r, d, sc.defaultLink);
    }

    NodeConfig defaults;
    if (const auto d = root["defaults"]) {
        r.expect_map(d, "defaults");
        r.only_keys(d, {PTPSEC_NODE_KEYS});
        detail::apply_node_keys(r, d, defaults);
    }

    const auto nodes = root["nodes"];
    if (!nodes || !nodes.IsSequence() || nodes.size() == 0) r.fail(nodes ? nodes : root, "'nodes' must be a non-empty list");
    std::set<std::string> names;
    for (const auto& n : nodes) {
        r.expect_map(n, "node");
        r.only_keys(n, {"name", PTPSEC_NODE_KEYS});
        NodeConfig c = defaults;
        c.name = r.get<std::string>(n, "name", "");
        if (c.name.empty()) r.fail(n, "node needs a 'name'");
        if (!names.insert(c.name).second) r.fail(n["name"], "duplicate node name '" + c.name + "'");
        if (!n["address"]) r.fail(n, "node '" + c.name + "' needs an 'address'");
        detail::apply_node_keys(r, n, c);
        for (const auto& other : sc.nodes) {
            if (other.address.same_host(c.address)) r.fail(n["address"], "duplicate node address " + to_string(c.address));
        }
        sc.nodes.push_back(std::move(c));
    }

    if (const auto a = root["adversary"]) {
        r.expect_map(a, "adversary");
        r.only_keys(a, {"name", "class", "address", "attack", "params"});
        AdversarySpec adv;
        adv.name = r.get<std::string>(a, "name", adv.name);
        if (names.count(adv.name)) r.fail(a["name"], "adversary name clashes with a node");
        const auto cls_text = r.get<std::string>(a, "class", "");
        const auto cls = parse_adversary_class(cls_text);
        if (!cls) r.fail(a["class"] ? a["class"] : a, "unknown adversary class '" + cls_text + "'");
        adv.cls = *cls;
        if (!a["address"]) r.fail(a, "adversary needs an 'address'");
        adv.address = r.address(a["address"], "address");
        for (const auto& c : sc.nodes) {
            if (c.address.same_host(adv.address)) r.fail(a["address"], "adversary address is used by node " + c.name);
        }
        AttackParams params;
        if (const auto p = a["params"]) {
            r.expect_map(p, "params");
            for (const auto& kv : p) params.set(kv.first.as<std::string>(), r.scalar<std::string>(kv.second, kv.first.as<std::string>()));
        }
        params.set("adversary_name", adv.name);
        const auto attack = r.get<std::string>(a, "attack", "");
        try {
            adv.attack = make_attack(attack, params);
        } catch (const std::invalid_argument& e) {
            r.fail(a["attack"] ? a["attack"] : a, e.what());
        }
        for (const char* ref : {"target", "master", "spoof_as"}) {
            if (params.has(ref) && !names.count(params.str(ref, ""))) {
                r.fail(a["params"][ref], std::string("'") + ref + "' names an unknown node");
            }
        }
        sc.adversary = std::move(adv);
    }

    if (const auto links = root["links"]) {
        if (!links.IsSequence()) r.fail(links, "'links' must be a list");
        for (const auto& l : links) {
            r.expect_map(l, "link");
            r.only_keys(l, {"from", "to", "delay_us", "jitter_us", "mitm_tap", "both_ways"});
            LinkSpec spec;
            spec.from = r.get<std::string>(l, "from", "");
            spec.to = r.get<std::string>(l, "to", "");
            auto known = [&](const std::string& x) {
                return names.count(x) || (sc.adversary && sc.adversary->name == x);
            };
            if (!known(spec.from) || !known(spec.to)) r.fail(l, "link endpoints must name nodes or the adversary");
            spec.model = detail::read_link(r, l, sc.defaultLink);
            if (spec.model.mitmTap &&
                (!sc.adversary || !AdversaryCapability::of(sc.adversary->cls).canDropModifyDelay)) {
                r.fail(l["mitm_tap"], "mitm_tap needs an InBand or InsiderSlave adversary");
            }
            sc.links.push_back(spec);
            if (r.get<bool>(l, "both_ways", false)) sc.links.push_back(LinkSpec{spec.to, spec.from, spec.model});
        }
    }

    // Key material comes from the seed; validate the completed configs.
    Scenario probe = sc;
    provision_keys(probe, probe.seed);
    for (std::size_t i = 0; i < probe.nodes.size(); ++i) {
        try {
            validate(probe.nodes[i]);
        } catch (const std::invalid_argument& e) {
            r.fail(nodes[i], e.what());
        }
    }
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), 0, "cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), path.string());
}

#undef PTPSEC_NODE_KEYS

// --- outputs ---------------------------------------------------------------

inline void write_offsets_csv(std::ostream& os, const MetricsLog& log) {
    os << "time_ns,node,true_offset_ns\n";
    for (const auto& s : log.offsets) os << s.time << ',' << s.node << ',' << s.trueOffset << '\n';
}

inline void write_verdicts_csv(std::ostream& os, const MetricsLog& log) {
    os << "time_ns,node,msg_type,seq_id,verdict,reason,origin\n";
    for (const auto& v : log.verdicts) {
        os << v.time << ',' << v.node << ',' << (v.type ? to_string(*v.type) : std::string_view("UNKNOWN")) << ','
           << v.sequenceId << ',' << (v.verdict == Verdict::Accept ? "accept" : "drop") << ',' << to_string(v.reason)
           << ',' << v.origin << '\n';
    }
}

inline std::int64_t max_abs_offset(const MetricsLog& log, const std::string& node = "") {
    std::int64_t m = 0;
    for (const auto& s : log.offsets) {
        if (node.empty() || s.node == node) m = std::max(m, s.trueOffset < 0 ? -s.trueOffset : s.trueOffset);
    }
    return m;
}

inline void write_summary(std::ostream& os, const Scenario& sc, std::uint64_t seed, const MetricsLog& log) {
    os << "scenario: " << sc.name << '\n' << "seed: " << seed << '\n';
    os << "horizon_s: " << static_cast<double>(sc.horizon) / 1e9 << '\n';
    if (sc.adversary) {
        os << "adversary: " << sc.adversary->name << " (" << to_string(sc.adversary->cls) << ")\n";
        os << "attack_succeeded: " << (log.attackSucceeded.value_or(false) ? "true" : "false") << '\n';
        for (const auto& [k, v] : log.attackStats) os << "attack." << k << ": " << v << '\n';
    } else {
        os << "adversary: none\n";
    }
    os << "max_abs_offset_ns: " << max_abs_offset(log) << '\n';
    for (const auto& n : log.nodes) {
        os << "node." << n.name << ".final_role: " << (n.finalRole == Role::Master ? "master" : "slave") << '\n';
        os << "node." << n.name << ".max_abs_offset_ns: " << max_abs_offset(log, n.name) << '\n';
        const auto series = log.offset_series(n.name);
        if (!series.empty()) os << "node." << n.name << ".final_offset_ns: " << series.back() << '\n';
        if (n.certVerifications + n.certCacheHits > 0) {
            os << "node." << n.name << ".cert_verifications: " << n.certVerifications << '\n';
        }
    }
    std::map<std::string, std::uint64_t> drops;
    std::uint64_t accepted = 0;
    for (const auto& v : log.verdicts) {
        if (v.verdict == Verdict::Accept) {
            ++accepted;
        } else {
            ++drops[to_string(v.reason)];
        }
    }
    os << "verdicts.accept: " << accepted << '\n';
    for (const auto& [reason, n] : drops) os << "drops." << reason << ": " << n << '\n';
    for (const auto& [origin, by_type] : log.sentByOrigin) {
        for (const auto& [type, n] : by_type) os << "sent." << origin << '.' << to_string(type) << ": " << n << '\n';
    }
    os << "copies_sent: " << log.copiesSent << '\n'
       << "delivered: " << log.delivered << '\n'
       << "dropped_by_adversary: " << log.droppedByAdversary << '\n'
       << "undeliverable: " << log.undeliverable << '\n';
}

struct RunFiles {
    std::filesystem::path offsets, verdicts, summary;
};

inline RunFiles write_outputs(const std::filesystem::path& dir, const Scenario& sc, std::uint64_t seed,
                              const MetricsLog& log) {
    std::filesystem::create_directories(dir);
    RunFiles f{dir / (sc.name + "_offsets.csv"), dir / (sc.name + "_verdicts.csv"), dir / (sc.name + "_summary.txt")};
    auto open = [](const std::filesystem::path& p) {
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        return os;
    };
    {
        auto os = open(f.offsets);
        write_offsets_csv(os, log);
    }
    {
        auto os = open(f.verdicts);
        write_verdicts_csv(os, log);
    }
    {
        auto os = open(f.summary);
        write_summary(os, sc, seed, log);
    }
    return f;
}

}  // namespace ptpsec
