#pragma once

// Deterministic discrete-event network: per-link delay and jitter,
// multicast, hardware-style timestamping at delivery, and a single
// adversary whose capability row is enforced on every action.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ptpsec/node.hpp"

namespace ptpsec {

enum class AdversaryClass { OobApplicative, OobNetwork, InBand, InsiderSlave };

inline const char* to_string(AdversaryClass c) {
    switch (c) {
    case AdversaryClass::OobApplicative: return "OobApplicative";
    case AdversaryClass::OobNetwork: return "OobNetwork";
    case AdversaryClass::InBand: return "InBand";
    case AdversaryClass::InsiderSlave: return "InsiderSlave";
    }
    return "?";
}

inline std::optional<AdversaryClass> parse_adversary_class(std::string_view s) {
    for (auto c : {AdversaryClass::OobApplicative, AdversaryClass::OobNetwork, AdversaryClass::InBand,
                   AdversaryClass::InsiderSlave}) {
        if (s == to_string(c)) return c;
    }
    return std::nullopt;
}

struct AdversaryCapability {
    AdversaryClass cls = AdversaryClass::OobApplicative;
    bool canSpoofNetAddr = false;
    bool seesUnicast = false;
    bool canDropModifyDelay = false;
    bool holdsGroupKey = false;

    static constexpr AdversaryCapability of(AdversaryClass c) {
        switch (c) {
        case AdversaryClass::OobApplicative: return {c, false, false, false, false};
        case AdversaryClass::OobNetwork: return {c, true, false, false, false};
        case AdversaryClass::InBand: return {c, true, true, true, false};
        case AdversaryClass::InsiderSlave: return {c, true, true, true, true};
        }
        return {};
    }
};

class CapabilityViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LinkModel {
    std::int64_t baseDelay = 50'000;
    std::int64_t jitter = 0;  // uniform half-width
    bool mitmTap = false;
};

struct OffsetSample {
    std::int64_t time = 0;
    std::string node;
    std::int64_t trueOffset = 0;
};

struct VerdictRecord {
    std::int64_t time = 0;
    std::string node;
    std::optional<MessageType> type;
    std::uint32_t sequenceId = 0;
    Verdict verdict = Verdict::Drop;
    Reason reason = Reason::Malformed;
    std::string origin;  // ground-truth sender
};

struct NodeSummary {
    std::string name;
    Role finalRole = Role::Slave;
    std::uint64_t syncsEmitted = 0;
    std::uint64_t announcesEmitted = 0;
    std::uint64_t certVerifications = 0;
    std::uint64_t certCacheHits = 0;
    std::vector<ElectionEvent> elections;
};

struct MetricsLog {
    std::vector<OffsetSample> offsets;
    std::vector<VerdictRecord> verdicts;
    std::vector<NodeSummary> nodes;
    std::map<std::string, std::map<MessageType, std::uint64_t>> sentByOrigin;
    std::uint64_t copiesSent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t droppedByAdversary = 0;
    std::uint64_t undeliverable = 0;
    std::uint64_t observedByAdversary = 0;
    std::map<std::string, std::int64_t> attackStats;
    std::optional<bool> attackSucceeded;

    [[nodiscard]] std::uint64_t sent(const std::string& origin, MessageType t) const {
        const auto it = sentByOrigin.find(origin);
        if (it == sentByOrigin.end()) return 0;
        const auto jt = it->second.find(t);
        return jt == it->second.end() ? 0 : jt->second;
    }

    [[nodiscard]] const NodeSummary* node(const std::string& name) const {
        for (const auto& n : nodes) {
            if (n.name == name) return &n;
        }
        return nullptr;
    }

    // Accepted messages of a type from an origin at a node.
    [[nodiscard]] std::uint64_t accepted(const std::string& node, const std::string& origin,
                                         MessageType t) const {
        std::uint64_t n = 0;
        for (const auto& v : verdicts) {
            if (v.node == node && v.origin == origin && v.type == t && v.verdict == Verdict::Accept) ++n;
        }
        return n;
    }

    [[nodiscard]] std::vector<std::int64_t> offset_series(const std::string& node) const {
        std::vector<std::int64_t> out;
        for (const auto& s : offsets) {
            if (s.node == node) out.push_back(s.trueOffset);
        }
        return out;
    }

    [[nodiscard]] std::optional<std::int64_t> offset_at(const std::string& node, std::int64_t time) const {
        std::optional<std::int64_t> last;
        for (const auto& s : offsets) {
            if (s.time > time) break;
            if (s.node == node) last = s.trueOffset;
        }
        return last;
    }
};

// What an adversary sees of one packet.
struct ObservedPacket {
    const Packet& packet;
    NetworkAddress claimedSource;
    std::optional<NetworkAddress> dest;  // empty: multicast
    std::optional<PtpMessage> message;   // empty when undecodable
};

struct MitmAction {
    enum class Kind { Pass, Drop, Modify, Delay };
    Kind kind = Kind::Pass;
    Packet modified{};
    std::int64_t delay = 0;

    static MitmAction pass() { return {}; }
    static MitmAction drop() { return {Kind::Drop, {}, 0}; }
    static MitmAction modify(Packet p) { return {Kind::Modify, std::move(p), 0}; }
    static MitmAction delay_by(std::int64_t ns) { return {Kind::Delay, {}, ns}; }
};

class AdversaryContext {
public:
    virtual ~AdversaryContext() = default;

    [[nodiscard]] virtual std::int64_t now() const = 0;
    // Reference time as an adversary synchronised to the true clock sees it.
    [[nodiscard]] std::int64_t true_time() const { return kEpochNs + now(); }
    [[nodiscard]] virtual const NetworkAddress& own_address() const = 0;
    [[nodiscard]] virtual const AdversaryCapability& capability() const = 0;
    // Sending from any address but its own needs canSpoofNetAddr.
    virtual void send(Packet packet, std::optional<NetworkAddress> dest, const NetworkAddress& claimedSource,
                      MessageType type) = 0;
    // Calls Attack::on_wake with the token at the given time.
    virtual void wake_at(std::int64_t time, int token = 0) = 0;
    // Needs holdsGroupKey.
    [[nodiscard]] virtual const GroupKey& group_key() const = 0;
    [[nodiscard]] virtual std::optional<NetworkAddress> address_of(const std::string& node) const = 0;
    virtual std::mt19937_64& rng() = 0;
};

class Attack {
public:
    virtual ~Attack() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    virtual void start(AdversaryContext& ctx) = 0;
    virtual void on_wake(AdversaryContext&, int /*token*/) {}
    virtual void on_observe(AdversaryContext&, const ObservedPacket&) {}
    // Consulted for packets on tapped links.
    virtual MitmAction intercept(AdversaryContext&, const ObservedPacket&) { return MitmAction::pass(); }
    [[nodiscard]] virtual bool succeeded(const MetricsLog& log) const = 0;
    [[nodiscard]] virtual std::map<std::string, std::int64_t> stats() const { return {}; }
};

using AttackFactory = std::function<std::unique_ptr<Attack>()>;

struct AdversarySpec {
    std::string name = "adversary";
    AdversaryClass cls = AdversaryClass::OobApplicative;
    NetworkAddress address{};
    AttackFactory attack;
    std::optional<GroupKey> groupKey;  // provisioned for insiders
};

struct LinkSpec {
    std::string from;
    std::string to;
    LinkModel model{};
};

struct Scenario {
    std::string name = "scenario";
    std::vector<NodeConfig> nodes;
    LinkModel defaultLink{};
    std::vector<LinkSpec> links;
    std::optional<AdversarySpec> adversary;
    std::int64_t horizon = 60 * kNsPerSecond;
    std::int64_t sampleInterval = 100 * kNsPerMs;
    std::uint64_t seed = 1;
};

// Fills in keys the configuration leaves open: per-node Ed25519 keys and
// management-signed certificates for PublicKey masters, the management
// trust anchor, and the group key for Symmetric mode. All derive from seed.
inline void provision_keys(Scenario& sc, std::uint64_t seed) {
    const KeyPair mgmt = KeyPair::from_seed(stream_seed(seed, 0x6d676d74));
    const GroupKey group = GroupKey::from_seed(stream_seed(seed, 0x67726f75));
    for (std::size_t i = 0; i < sc.nodes.size(); ++i) {
        auto& n = sc.nodes[i];
        if (n.securityMode == SecurityMode::PublicKey) {
            if (!n.managementKey) n.managementKey = mgmt.publicKey;
            if (n.masterCapable && !n.keys) n.keys = KeyPair::from_seed(stream_seed(seed, 0x6b657973, i));
            if (n.masterCapable && !n.certificate) {
                n.certificate = make_certificate(announced_dataset(n), n.keys->publicKey, mgmt);
            }
        }
        if (n.securityMode == SecurityMode::Symmetric) {
            if (!n.groupKey) n.groupKey = group;
        }
    }
    if (sc.adversary && sc.adversary->cls == AdversaryClass::InsiderSlave && !sc.adversary->groupKey) {
        sc.adversary->groupKey = group;
        for (const auto& n : sc.nodes) {
            if (n.groupKey) {
                sc.adversary->groupKey = n.groupKey;
                break;
            }
        }
    }
}

class Simulator {
public:
    explicit Simulator(Scenario scenario) : sc_(std::move(scenario)) {}

    // Deterministic given seed.
    MetricsLog run(std::int64_t horizon, std::uint64_t seed);
    MetricsLog run() { return run(sc_.horizon, sc_.seed); }

    [[nodiscard]] const Scenario& scenario() const noexcept { return sc_; }

private:
    Scenario sc_;
};

namespace detail {

class Engine final : public AdversaryContext {
public:
    Engine(Scenario sc, std::uint64_t seed) : sc_(std::move(sc)), rng_(stream_seed(seed, 0x6e6574)) {
        provision_keys(sc_, seed);
        for (std::size_t i = 0; i < sc_.nodes.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (sc_.nodes[j].address.same_host(sc_.nodes[i].address)) {
                    throw std::invalid_argument("duplicate node address " + to_string(sc_.nodes[i].address));
                }
            }
            nodes_.emplace_back(sc_.nodes[i], stream_seed(seed, 0x6e6f6465, i));
            names_.push_back(sc_.nodes[i].name);
        }
        if (sc_.adversary) {
            adv_index_ = nodes_.size();
            names_.push_back(sc_.adversary->name);
            cap_ = AdversaryCapability::of(sc_.adversary->cls);
            adv_rng_.seed(stream_seed(seed, 0x616476));
            if (!sc_.adversary->attack) throw std::invalid_argument("adversary without an attack");
            attack_ = sc_.adversary->attack();
        }
        for (const auto& l : sc_.links) {
            const auto a = index_of(l.from);
            const auto b = index_of(l.to);
            if (!a || !b) throw std::invalid_argument("link references unknown endpoint " + l.from + "->" + l.to);
            if (l.model.mitmTap && (!adv_index_ || !cap_.canDropModifyDelay)) {
                throw CapabilityViolation("MITM tap installed for an adversary without in-band capability");
            }
            links_[{*a, *b}] = l.model;
        }
    }

    MetricsLog run(std::int64_t horizon) {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& c = sc_.nodes[i];
            std::uniform_int_distribution<std::int64_t> phase(0, kNsPerSecond - 1);
            schedule(phase(rng_) % interval_ns(c.announceIntervalLog), TimerEvent{i, TimerKind::Announce});
            schedule(phase(rng_) % interval_ns(c.syncIntervalLog), TimerEvent{i, TimerKind::Sync});
            schedule(phase(rng_) % interval_ns(c.delayReqIntervalLog), TimerEvent{i, TimerKind::Delay});
        }
        schedule(0, SampleEvent{});
        if (attack_) {
            now_ = 0;
            attack_->start(*this);
        }
        while (!queue_.empty()) {
            auto ev = queue_.top();
            queue_.pop();
            if (ev.time > horizon) break;
            if (ev.time < now_) throw std::logic_error("event time went backwards");
            now_ = ev.time;
            Event current = std::move(events_[ev.slot]);
            events_[ev.slot] = std::monostate{};
            free_slots_.push_back(ev.slot);
            std::visit([&](auto& e) { handle(e); }, current);
        }
        for (const auto& n : nodes_) {
            NodeSummary s;
            s.name = n.name();
            s.finalRole = n.role();
            s.syncsEmitted = n.syncs_emitted();
            s.announcesEmitted = n.announces_emitted();
            if (const auto* v = n.verifier()) {
                s.certVerifications = v->verifications();
                s.certCacheHits = v->cache_hits();
            }
            s.elections = n.elections();
            log_.nodes.push_back(std::move(s));
        }
        if (attack_) {
            log_.attackStats = attack_->stats();
            log_.attackSucceeded = attack_->succeeded(log_);
        }
        if (log_.copiesSent != log_.delivered + log_.droppedByAdversary + log_.undeliverable + in_flight_) {
            throw std::logic_error("message accounting mismatch");
        }
        return std::move(log_);
    }

    // --- AdversaryContext -------------------------------------------------

    [[nodiscard]] std::int64_t now() const override { return now_; }
    [[nodiscard]] const NetworkAddress& own_address() const override { return sc_.adversary->address; }
    [[nodiscard]] const AdversaryCapability& capability() const override { return cap_; }

    void send(Packet packet, std::optional<NetworkAddress> dest, const NetworkAddress& claimedSource,
              MessageType type) override {
        if (!claimedSource.same_host(sc_.adversary->address) && !cap_.canSpoofNetAddr) {
            throw CapabilityViolation(std::string(to_string(cap_.cls)) + " adversary cannot spoof source address " +
                                      to_string(claimedSource));
        }
        transmit(*adv_index_, std::move(packet), std::move(dest), claimedSource, type);
    }

    void wake_at(std::int64_t time, int token = 0) override { schedule(std::max(time, now_), WakeEvent{token}); }

    [[nodiscard]] const GroupKey& group_key() const override {
        if (!cap_.holdsGroupKey || !sc_.adversary->groupKey) {
            throw CapabilityViolation(std::string(to_string(cap_.cls)) + " adversary holds no group key");
        }
        return *sc_.adversary->groupKey;
    }

    [[nodiscard]] std::optional<NetworkAddress> address_of(const std::string& node) const override {
        for (const auto& c : sc_.nodes) {
            if (c.name == node) return c.address;
        }
        return std::nullopt;
    }

    std::mt19937_64& rng() override { return adv_rng_; }

private:
    enum class TimerKind { Sync, Announce, Delay };
    struct TimerEvent {
        std::size_t node;
        TimerKind kind;
    };
    struct DeliveryEvent {
        std::size_t from;
        std::size_t to;
        Packet packet;
        NetworkAddress claimedSource;
        std::optional<NetworkAddress> dest;
        bool tapped = false;  // MITM already consulted
    };
    struct WakeEvent {
        int token = 0;
    };
    struct SampleEvent {};
    using Event = std::variant<std::monostate, TimerEvent, DeliveryEvent, WakeEvent, SampleEvent>;

    struct QueueEntry {
        std::int64_t time;
        std::uint64_t order;
        std::size_t slot;
        bool operator>(const QueueEntry& o) const {
            return time != o.time ? time > o.time : order > o.order;
        }
    };

    std::optional<std::size_t> index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) return i;
        }
        return std::nullopt;
    }

    void schedule(std::int64_t time, Event e) {
        std::size_t slot;
        if (!free_slots_.empty()) {
            slot = free_slots_.back();
            free_slots_.pop_back();
            events_[slot] = std::move(e);
        } else {
            slot = events_.size();
            events_.push_back(std::move(e));
        }
        queue_.push(QueueEntry{time, order_++, slot});
    }

    LinkModel link(std::size_t a, std::size_t b) const {
        const auto it = links_.find({a, b});
        return it == links_.end() ? sc_.defaultLink : it->second;
    }

    std::int64_t latency(const LinkModel& l) {
        std::int64_t d = l.baseDelay;
        if (l.jitter > 0) {
            std::uniform_int_distribution<std::int64_t> j(-l.jitter, l.jitter);
            d += j(rng_);
        }
        return std::max<std::int64_t>(d, 0);
    }

    void enqueue_delivery(std::size_t from, std::size_t to, Packet packet, const NetworkAddress& claimed,
                          const std::optional<NetworkAddress>& dest, std::int64_t extra = 0) {
        const LinkModel l = link(from, to);
        std::int64_t at = now_ + latency(l) + extra;
        auto& fifo = last_delivery_[{from, to}];
        at = std::max(at, fifo);
        fifo = at;
        ++log_.copiesSent;
        ++in_flight_;
        schedule(at, DeliveryEvent{from, to, std::move(packet), claimed, dest, false});
    }

    void transmit(std::size_t from, Packet packet, std::optional<NetworkAddress> dest,
                  const NetworkAddress& claimed, MessageType type) {
        ++log_.sentByOrigin[names_[from]][type];
        std::vector<std::size_t> targets;
        if (!dest) {
            for (std::size_t i = 0; i < nodes_.size(); ++i) {
                if (i != from) targets.push_back(i);
            }
            if (adv_index_ && from != *adv_index_) targets.push_back(*adv_index_);
        } else {
            bool found = false;
            for (std::size_t i = 0; i < nodes_.size(); ++i) {
                if (i != from && sc_.nodes[i].address.same_host(*dest)) {
                    targets.push_back(i);
                    found = true;
                }
            }
            if (adv_index_ && from != *adv_index_ &&
                (cap_.seesUnicast || sc_.adversary->address.same_host(*dest))) {
                targets.push_back(*adv_index_);
                found = found || sc_.adversary->address.same_host(*dest);
            }
            if (!found) {
                ++log_.copiesSent;
                ++log_.undeliverable;
            }
        }
        for (auto t : targets) enqueue_delivery(from, t, packet, claimed, dest);
    }

    ObservedPacket observe(const DeliveryEvent& e) const {
        ObservedPacket o{e.packet, e.claimedSource, e.dest, std::nullopt};
        try {
            o.message = decode(e.packet.bytes);
        } catch (const WireError&) {
        }
        return o;
    }

    void handle(std::monostate&) {}

    void handle(TimerEvent& t) {
        auto& n = nodes_[t.node];
        const auto& c = sc_.nodes[t.node];
        std::vector<Outbound> out;
        std::int64_t period = 0;
        switch (t.kind) {
        case TimerKind::Sync:
            out = n.master_tick(now_);
            period = interval_ns(c.syncIntervalLog);
            break;
        case TimerKind::Announce:
            out = n.announce_tick(now_);
            period = interval_ns(c.announceIntervalLog);
            break;
        case TimerKind::Delay:
            out = n.slave_delay_cycle(now_);
            period = interval_ns(c.delayReqIntervalLog);
            break;
        }
        for (auto& o : out) transmit(t.node, std::move(o.packet), o.dest, c.address, o.type);
        schedule(now_ + period, t);
    }

    void handle(DeliveryEvent& e) {
        --in_flight_;
        const bool tap = !e.tapped && adv_index_ && e.from != *adv_index_ && e.to != *adv_index_ &&
                         link(e.from, e.to).mitmTap;
        if (tap) {
            const auto action = attack_->intercept(*this, observe(e));
            if (action.kind != MitmAction::Kind::Pass && !cap_.canDropModifyDelay) {
                throw CapabilityViolation("adversary without in-band capability altered traffic");
            }
            switch (action.kind) {
            case MitmAction::Kind::Pass: break;
            case MitmAction::Kind::Drop:
                ++log_.droppedByAdversary;
                return;
            case MitmAction::Kind::Modify: e.packet = action.modified; break;
            case MitmAction::Kind::Delay:
                if (action.delay > 0) {
                    ++in_flight_;
                    e.tapped = true;
                    schedule(now_ + action.delay, std::move(e));
                    return;
                }
                break;
            }
        }
        ++log_.delivered;
        if (adv_index_ && e.to == *adv_index_) {
            ++log_.observedByAdversary;
            attack_->on_observe(*this, observe(e));
            return;
        }
        auto& node = nodes_[e.to];
        auto outcome = node.receive(e.packet, e.claimedSource, now_);
        VerdictRecord v;
        v.time = now_;
        v.node = node.name();
        v.type = outcome.type;
        v.sequenceId = outcome.sequenceId;
        v.verdict = outcome.verdict;
        v.reason = outcome.reason;
        v.origin = names_[e.from];
        log_.verdicts.push_back(std::move(v));
        for (auto& o : outcome.replies) {
            transmit(e.to, std::move(o.packet), o.dest, sc_.nodes[e.to].address, o.type);
        }
    }

    void handle(WakeEvent& w) { attack_->on_wake(*this, w.token); }

    void handle(SampleEvent&) {
        for (const auto& n : nodes_) {
            log_.offsets.push_back(OffsetSample{now_, n.name(), n.true_offset(now_)});
        }
        schedule(now_ + sc_.sampleInterval, SampleEvent{});
    }

    Scenario sc_;
    std::vector<Node> nodes_;
    std::vector<std::string> names_;
    std::optional<std::size_t> adv_index_;
    AdversaryCapability cap_{};
    std::unique_ptr<Attack> attack_;
    std::map<std::pair<std::size_t, std::size_t>, LinkModel> links_;
    std::map<std::pair<std::size_t, std::size_t>, std::int64_t> last_delivery_;
    std::mt19937_64 rng_;
    std::mt19937_64 adv_rng_;

    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue_;
    std::vector<Event> events_;
    std::vector<std::size_t> free_slots_;
    std::uint64_t order_ = 0;
    std::int64_t now_ = 0;
    std::uint64_t in_flight_ = 0;
    MetricsLog log_;
};

}  // namespace detail

inline MetricsLog Simulator::run(std::int64_t horizon, std::uint64_t seed) {
    if (sc_.sampleInterval <= 0) throw std::invalid_argument("sample interval must be positive");
    detail::Engine engine(sc_, seed);
    return engine.run(horizon);
}

// Convenience wrapper matching run(scenario, horizon, seed).
inline MetricsLog run(const Scenario& scenario, std::int64_t horizon, std::uint64_t seed) {
    return Simulator(scenario).run(horizon, seed);
}

}  // namespace ptpsec
