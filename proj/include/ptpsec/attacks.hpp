#pragma once

// Executable attacks. Each one only decides what to send, drop, modify or
// delay; the simulator enforces whether its adversary class may do so.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptpsec/simnet.hpp"

namespace ptpsec {

// String-valued attack parameters as they come from scenario files.
class AttackParams {
public:
    AttackParams() = default;
    AttackParams(std::initializer_list<std::pair<const std::string, std::string>> init) : values_(init) {}

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }

    [[nodiscard]] std::string str(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }
    [[nodiscard]] std::string required(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw std::invalid_argument("missing attack parameter '" + key + "'");
        return it->second;
    }
    [[nodiscard]] double real(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("attack parameter '" + key + "' is not a number: " + it->second);
        }
    }
    [[nodiscard]] std::int64_t integer(const std::string& key, std::int64_t fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(it->second, &used, 0);
            if (used != it->second.size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument("attack parameter '" + key + "' is not an integer: " + it->second);
        }
    }
    [[nodiscard]] bool flag(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
        if (it->second == "false" || it->second == "0" || it->second == "no") return false;
        throw std::invalid_argument("attack parameter '" + key + "' is not a boolean: " + it->second);
    }
    // Seconds (possibly fractional) to ns.
    [[nodiscard]] std::int64_t seconds_ns(const std::string& key, double fallback) const {
        return static_cast<std::int64_t>(std::llround(real(key, fallback) * 1e9));
    }
    [[nodiscard]] std::int64_t millis_ns(const std::string& key, double fallback) const {
        return static_cast<std::int64_t>(std::llround(real(key, fallback) * 1e6));
    }

    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

namespace attacks {

// Shared plumbing: victim and master identities, activity window, and the
// wire format learned from the master's own traffic.
class AttackBase : public Attack {
public:
    explicit AttackBase(const AttackParams& p)
        : target_(p.str("target", "slave1")),
          master_(p.str("master", "gm")),
          start_(p.seconds_ns("start_s", 0.0)),
          stop_(p.has("stop_s") ? p.seconds_ns("stop_s", 0.0) : std::numeric_limits<std::int64_t>::max()),
          adversary_name_(p.str("adversary_name", "adversary")) {}

    [[nodiscard]] std::map<std::string, std::int64_t> stats() const override { return stats_; }

protected:
    [[nodiscard]] bool active(std::int64_t now) const { return now >= start_ && now < stop_; }

    NetworkAddress addr(AdversaryContext& ctx, const std::string& node) const {
        const auto a = ctx.address_of(node);
        if (!a) throw std::invalid_argument("attack references unknown node '" + node + "'");
        return *a;
    }
    ClockIdentity master_id(AdversaryContext& ctx) const { return clock_id_from_network(addr(ctx, master_)); }

    void learn(AdversaryContext& ctx, const ObservedPacket& o) {
        if (!extended_ && o.claimedSource.same_host(addr(ctx, master_)) && o.message) {
            extended_ = is_extended(o.packet.bytes);
        }
    }

    [[nodiscard]] WireMode mode() const {
        return extended_.value_or(false) ? WireMode::Extended : WireMode::Baseline;
    }
    [[nodiscard]] std::uint32_t id_mask() const { return mode() == WireMode::Extended ? 0xFFFFFFFFu : 0xFFFFu; }

    Packet make(AdversaryContext& ctx, const PtpMessage& msg) const {
        Packet p;
        p.bytes = encode(msg, mode());
        if (ctx.capability().holdsGroupKey) p.icv = hmac_tag(p.bytes, ctx.group_key());
        return p;
    }

    PtpHeader header_as(const ClockIdentity& id, MessageType type, std::uint32_t seq) const {
        PtpHeader h;
        h.messageType = type;
        h.sourceClockIdentity = id;
        h.sourcePortNumber = 1;
        h.sequenceId = seq;
        return h;
    }

    // Sends a SYNC + FOLLOW_UP pair claiming to be `as`, with t1 shifted.
    void send_sync_pair(AdversaryContext& ctx, const ClockIdentity& as, const NetworkAddress& claimed,
                        std::optional<NetworkAddress> dest, std::uint32_t seq, std::int64_t shift,
                        const KeyPair* signer = nullptr) {
        PtpHeader h = header_as(as, MessageType::Sync, seq);
        h.flagField = kFlagTwoStep;
        ctx.send(make(ctx, make_message(h, SyncBody{})), dest, claimed, MessageType::Sync);
        auto fu = make_message(header_as(as, MessageType::FollowUp, seq),
                               FollowUpBody{Timestamp::from_ns(ctx.true_time() + shift), {}});
        if (signer && mode() == WireMode::Extended) {
            std::get<FollowUpBody>(fu.body).signature = sign_followup(fu, *signer);
        }
        ctx.send(make(ctx, fu), dest, claimed, MessageType::FollowUp);
        ++stats_["sync_sent"];
        ++stats_["followup_sent"];
    }

    [[nodiscard]] bool target_accepted(const MetricsLog& log, MessageType t) const {
        return log.accepted(target_, adversary_name_, t) > 0;
    }

    std::string target_;
    std::string master_;
    std::int64_t start_;
    std::int64_t stop_;
    std::string adversary_name_;
    std::optional<bool> extended_;
    std::map<std::string, std::int64_t> stats_;
};

// Phase 1 replays the master's ANNOUNCEs from the attacker's own address so
// the target registers it as the master's address; phase 2 answers the
// DELAY_REQs that then arrive with t4 shifted by hostile_shift.
class DelaySpoof final : public AttackBase {
public:
    explicit DelaySpoof(const AttackParams& p)
        : AttackBase(p),
          shift_(p.millis_ns("shift_ms", 60.0)),
          min_gap_(static_cast<std::int64_t>(1e9 / p.real("rate_pps", 10.0))) {}

    [[nodiscard]] std::string name() const override { return "delay_spoof"; }
    void start(AdversaryContext&) override {}

    void on_observe(AdversaryContext& ctx, const ObservedPacket& o) override {
        learn(ctx, o);
        if (!active(ctx.now()) || !o.message) return;
        const auto& m = *o.message;
        if (m.type() == MessageType::Announce && m.header.sourceClockIdentity == master_id(ctx)) {
            ctx.send(o.packet, std::nullopt, ctx.own_address(), MessageType::Announce);
            ++stats_["announce_replays"];
            ++stats_["packets"];
            return;
        }
        if (m.type() == MessageType::DelayReq && o.dest && o.dest->same_host(ctx.own_address()) &&
            o.claimedSource.same_host(addr(ctx, target_))) {
            if (last_reply_ && ctx.now() - *last_reply_ < min_gap_) return;
            last_reply_ = ctx.now();
            DelayRespBody body;
            body.receiveTimestamp = Timestamp::from_ns(ctx.true_time() + shift_);
            body.requestingClockIdentity = m.header.sourceClockIdentity;
            body.requestingPortNumber = m.header.sourcePortNumber;
            const auto resp = make_message(header_as(master_id(ctx), MessageType::DelayResp, m.header.sequenceId), body);
            ctx.send(make(ctx, resp), o.claimedSource, ctx.own_address(), MessageType::DelayResp);
            ++stats_["delay_resps"];
            ++stats_["packets"];
        }
    }

    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        return log.accepted(target_, adversary_name_, MessageType::DelayResp) > 0;
    }

private:
    std::int64_t shift_;
    std::int64_t min_gap_;
    std::optional<std::int64_t> last_reply_;
};

// Hostile SYNC/FOLLOW_UP pairs at a fixed rate, claiming the master's clock
// ID, from the attacker's own address or (spoof_addr) the master's.
// Sequence IDs are blind: uniform over the ID space.
class SyncSpoof final : public AttackBase {
public:
    explicit SyncSpoof(const AttackParams& p)
        : AttackBase(p),
          shift_(p.millis_ns("shift_ms", 30'000.0)),
          period_(static_cast<std::int64_t>(1e9 / p.real("rate_pps", 1.0))),
          spoof_(p.flag("spoof_addr", false)),
          id_bits_(static_cast<unsigned>(p.integer("id_bits", 0))),
          multicast_(p.flag("multicast", false)) {}

    [[nodiscard]] std::string name() const override { return "sync_spoof"; }
    void start(AdversaryContext& ctx) override { ctx.wake_at(start_); }
    void on_observe(AdversaryContext& ctx, const ObservedPacket& o) override { learn(ctx, o); }

    void on_wake(AdversaryContext& ctx, int) override {
        if (ctx.now() >= stop_) return;
        const std::uint32_t mask = id_bits_ ? static_cast<std::uint32_t>((std::uint64_t{1} << id_bits_) - 1) : id_mask();
        std::uniform_int_distribution<std::uint64_t> dist(0, mask);
        const auto seq = static_cast<std::uint32_t>(dist(ctx.rng()));
        const auto claimed = spoof_ ? addr(ctx, master_) : ctx.own_address();
        const auto dest = multicast_ ? std::nullopt : std::optional<NetworkAddress>(addr(ctx, target_));
        send_sync_pair(ctx, master_id(ctx), claimed, dest, seq, shift_);
        ctx.wake_at(ctx.now() + period_);
    }

    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        return target_accepted(log, MessageType::FollowUp);
    }

private:
    std::int64_t shift_;
    std::int64_t period_;
    bool spoof_;
    unsigned id_bits_;
    bool multicast_;
};

// Strided probing of the ID space: SYNC IDs i*w + (w-1) for
// i = 0 .. R/w - 2 (optionally twice), then K hostile pairs continuing from
// the captured window.
class BlindWindowSnatch final : public AttackBase {
public:
    explicit BlindWindowSnatch(const AttackParams& p)
        : AttackBase(p),
          range_(std::uint64_t{1} << p.integer("id_bits", 16)),
          window_(static_cast<std::uint64_t>(p.integer("window", 50))),
          period_(static_cast<std::int64_t>(1e9 / p.real("rate_pps", 10.0))),
          passes_(static_cast<int>(p.integer("passes", 1))),
          followups_(static_cast<std::uint64_t>(p.integer("followup_k", 10))),
          phase2_period_(static_cast<std::int64_t>(1e9 / p.real("phase2_rate_pps", p.real("rate_pps", 10.0)))),
          shift_(p.millis_ns("shift_ms", 30'000.0)) {
        if (window_ == 0 || window_ > range_ / 2) throw std::invalid_argument("blind_window_snatch: bad window");
        if (passes_ < 1 || passes_ > 2) throw std::invalid_argument("blind_window_snatch: passes must be 1 or 2");
    }

    // Number of snatch probes per pass.
    [[nodiscard]] std::uint64_t probes_per_pass() const { return range_ / window_ - 1; }

    // The ID sent as probe k (0-based) of a pass.
    [[nodiscard]] std::uint32_t probe_id(std::uint64_t k) const {
        return static_cast<std::uint32_t>(k * window_ + (window_ - 1));
    }

    [[nodiscard]] std::string name() const override { return "blind_window_snatch"; }
    void start(AdversaryContext& ctx) override { ctx.wake_at(start_); }
    void on_observe(AdversaryContext& ctx, const ObservedPacket& o) override { learn(ctx, o); }

    void on_wake(AdversaryContext& ctx, int) override {
        if (ctx.now() >= stop_) return;
        const auto claimed = addr(ctx, master_);
        const auto dest = std::optional<NetworkAddress>(addr(ctx, target_));
        const std::uint64_t per_pass = probes_per_pass();
        if (sent_probes_ < per_pass * static_cast<std::uint64_t>(passes_)) {
            const auto id = probe_id(sent_probes_ % per_pass);
            PtpHeader h = header_as(master_id(ctx), MessageType::Sync, id);
            h.flagField = kFlagTwoStep;
            ctx.send(make(ctx, make_message(h, SyncBody{})), dest, claimed, MessageType::Sync);
            last_id_ = id;
            ++sent_probes_;
            stats_["snatch_packets"] = static_cast<std::int64_t>(sent_probes_);
            ctx.wake_at(ctx.now() + period_);
            return;
        }
        if (sent_followups_ < followups_) {
            const auto id = static_cast<std::uint32_t>((last_id_ + 1 + sent_followups_) % range_);
            send_sync_pair(ctx, master_id(ctx), claimed, dest, id, shift_);
            ++sent_followups_;
            stats_["phase2_pairs"] = static_cast<std::int64_t>(sent_followups_);
            ctx.wake_at(ctx.now() + phase2_period_);
        }
    }

    // With no phase 2 the capture itself is the goal.
    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        return target_accepted(log, followups_ ? MessageType::FollowUp : MessageType::Sync);
    }

private:
    std::uint64_t range_;
    std::uint64_t window_;
    std::int64_t period_;
    int passes_;
    std::uint64_t followups_;
    std::int64_t phase2_period_;
    std::int64_t shift_;
    std::uint64_t sent_probes_ = 0;
    std::uint64_t sent_followups_ = 0;
    std::uint32_t last_id_ = 0;
};

// Baseline for the snatching cost: the K-pair spoof repeated at the start of
// every window-sized subrange.
class NaiveWindowSweep final : public AttackBase {
public:
    explicit NaiveWindowSweep(const AttackParams& p)
        : AttackBase(p),
          range_(std::uint64_t{1} << p.integer("id_bits", 16)),
          window_(static_cast<std::uint64_t>(p.integer("window", 50))),
          k_(static_cast<std::uint64_t>(p.integer("followup_k", 10))),
          period_(static_cast<std::int64_t>(1e9 / p.real("rate_pps", 10.0))),
          shift_(p.millis_ns("shift_ms", 30'000.0)) {
        if (window_ == 0 || window_ > range_) throw std::invalid_argument("naive_window_sweep: bad window");
    }

    [[nodiscard]] std::string name() const override { return "naive_window_sweep"; }
    void start(AdversaryContext& ctx) override { ctx.wake_at(start_); }
    void on_observe(AdversaryContext& ctx, const ObservedPacket& o) override { learn(ctx, o); }

    void on_wake(AdversaryContext& ctx, int) override {
        const std::uint64_t total = (range_ / window_) * k_;
        if (ctx.now() >= stop_ || sent_ >= total) return;
        const std::uint64_t sub = sent_ / k_;
        const std::uint64_t j = sent_ % k_;
        const auto id = static_cast<std::uint32_t>((sub * window_ + j) % range_);
        send_sync_pair(ctx, master_id(ctx), addr(ctx, master_), addr(ctx, target_), id, shift_);
        ++sent_;
        stats_["naive_packets"] = static_cast<std::int64_t>(sent_);
        ctx.wake_at(ctx.now() + period_);
    }

    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        return target_accepted(log, MessageType::FollowUp);
    }

private:
    std::uint64_t range_;
    std::uint64_t window_;
    std::uint64_t k_;
    std::int64_t period_;
    std::int64_t shift_;
    std::uint64_t sent_ = 0;
};

// Announces the best possible dataset under the adversary's own identity
// and, once followed, serves hostile time. The insider variant tags with
// the group key; in PublicKey networks it can only offer a self-signed
// certificate.
class RogueMaster final : public AttackBase {
public:
    explicit RogueMaster(const AttackParams& p)
        : AttackBase(p),
          insider_(p.flag("insider", false)),
          shift_(p.millis_ns("shift_ms", 10'000.0)),
          sync_period_(p.seconds_ns("sync_interval_s", 1.0)),
          announce_period_(p.seconds_ns("announce_interval_s", 2.0)) {
        dataset_.priority1 = static_cast<std::uint8_t>(p.integer("priority1", 0));
        dataset_.clockClass = static_cast<std::uint8_t>(p.integer("clock_class", 6));
        dataset_.clockAccuracy = static_cast<std::uint8_t>(p.integer("clock_accuracy", 0x20));
        dataset_.offsetScaledLogVariance = static_cast<std::uint16_t>(p.integer("variance", 0x4E5D));
        dataset_.priority2 = static_cast<std::uint8_t>(p.integer("priority2", 0));
        dataset_.timeSource = static_cast<std::uint8_t>(p.integer("time_source", 0x10));  // ATOMIC_CLOCK
    }

    [[nodiscard]] std::string name() const override { return "rogue_master"; }

    void start(AdversaryContext& ctx) override {
        if (insider_) (void)ctx.group_key();
        own_id_ = clock_id_from_network(ctx.own_address());
        dataset_.grandmasterIdentity = own_id_;
        keys_ = KeyPair::from_seed(ctx.rng()());
        std::uniform_int_distribution<std::uint32_t> dist;
        sync_seq_ = dist(ctx.rng());
        announce_seq_ = dist(ctx.rng());
        ctx.wake_at(start_, kAnnounce);
        ctx.wake_at(start_, kSync);
    }

    void on_observe(AdversaryContext& ctx, const ObservedPacket& o) override {
        learn(ctx, o);
        if (!active(ctx.now()) || !o.message || o.message->type() != MessageType::DelayReq) return;
        if (!o.dest || !o.dest->same_host(ctx.own_address())) return;
        const auto& m = *o.message;
        DelayRespBody body;
        body.receiveTimestamp = Timestamp::from_ns(ctx.true_time() + shift_);
        body.requestingClockIdentity = m.header.sourceClockIdentity;
        body.requestingPortNumber = m.header.sourcePortNumber;
        ctx.send(make(ctx, make_message(header_as(own_id_, MessageType::DelayResp, m.header.sequenceId), body)),
                 o.claimedSource, ctx.own_address(), MessageType::DelayResp);
        ++stats_["delay_resps"];
    }

    void on_wake(AdversaryContext& ctx, int token) override {
        if (!active(ctx.now())) return;
        if (token == kAnnounce) {
            AnnounceBody body = dataset_;
            body.originTimestamp = Timestamp::from_ns(ctx.true_time() + shift_);
            if (mode() == WireMode::Extended) {
                // Self-signed: the only certificate an unauthorised node can make.
                body = attach_certificate(body, make_certificate(body, keys_.publicKey, keys_));
            }
            ctx.send(make(ctx, make_message(header_as(own_id_, MessageType::Announce, announce_seq_ & id_mask()), body)),
                     std::nullopt, ctx.own_address(), MessageType::Announce);
            ++announce_seq_;
            ++stats_["announces"];
            ctx.wake_at(ctx.now() + announce_period_, kAnnounce);
        } else {
            send_sync_pair(ctx, own_id_, ctx.own_address(), std::nullopt, sync_seq_ & id_mask(), shift_, &keys_);
            ++sync_seq_;
            ctx.wake_at(ctx.now() + sync_period_, kSync);
        }
    }

    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        for (const auto& n : log.nodes) {
            for (const auto& e : n.elections) {
                if (e.master && *e.master == own_id_) return true;
            }
        }
        return false;
    }

    [[nodiscard]] const ClockIdentity& identity() const { return own_id_; }

private:
    static constexpr int kAnnounce = 1;
    static constexpr int kSync = 2;

    bool insider_;
    std::int64_t shift_;
    std::int64_t sync_period_;
    std::int64_t announce_period_;
    AnnounceBody dataset_{};
    ClockIdentity own_id_{};
    KeyPair keys_{};
    std::uint32_t sync_seq_ = 0;
    std::uint32_t announce_seq_ = 0;
};

// Fake management SETs that boost the target's dataset until it wins the
// election, then SET_TIME once it announces as master.
class ProxyGrandmaster final : public AttackBase {
public:
    explicit ProxyGrandmaster(const AttackParams& p)
        : AttackBase(p),
          spoof_as_(p.str("spoof_as", "")),
          shift_(p.millis_ns("shift_ms", 10'000.0)) {}

    [[nodiscard]] std::string name() const override { return "proxy_grandmaster"; }

    void start(AdversaryContext& ctx) override { ctx.wake_at(start_); }

    void on_wake(AdversaryContext& ctx, int) override {
        send_set(ctx, MgmtAction::SetPriority1, 0);
        send_set(ctx, MgmtAction::SetPriority2, 0);
        send_set(ctx, MgmtAction::SetClockAccuracy, 0x20);
    }

    void on_observe(AdversaryContext& ctx, const ObservedPacket& o) override {
        if (time_set_ || !active(ctx.now()) || !o.message || o.message->type() != MessageType::Announce) return;
        const auto& m = *o.message;
        if (m.header.sourceClockIdentity != clock_id_from_network(addr(ctx, target_))) return;
        if (std::get<AnnounceBody>(m.body).priority1 != 0) return;
        send_set(ctx, MgmtAction::SetTime, static_cast<std::uint64_t>(ctx.true_time() + shift_));
        time_set_ = true;
    }

    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        bool elected = false;
        if (const auto* n = log.node(target_)) {
            for (const auto& e : n->elections) elected = elected || (e.time >= start_ && e.role == Role::Master);
        }
        return elected && time_set_ && log.accepted(target_, adversary_name_, MessageType::MgmtSet) == sets_;
    }

private:
    void send_set(AdversaryContext& ctx, MgmtAction action, std::uint64_t value) {
        const auto claimed = spoof_as_.empty() ? ctx.own_address() : addr(ctx, spoof_as_);
        PtpHeader h = header_as(clock_id_from_network(claimed), MessageType::MgmtSet, seq_++);
        ctx.send(make(ctx, make_message(h, MgmtSetBody{action, value})), addr(ctx, target_), claimed,
                 MessageType::MgmtSet);
        ++sets_;
        stats_["mgmt_sets"] = static_cast<std::int64_t>(sets_);
    }

    std::string spoof_as_;
    std::int64_t shift_;
    bool time_set_ = false;
    std::uint64_t sets_ = 0;
    std::uint32_t seq_ = 0;
};

// An insider answers every master SYNC it sees with its own pair one ID
// ahead, tagged with the group key. It has no master private key, so in
// PublicKey networks its FOLLOW_UP carries its own signature.
class InsiderSyncMasquerade final : public AttackBase {
public:
    explicit InsiderSyncMasquerade(const AttackParams& p)
        : AttackBase(p), shift_(p.millis_ns("shift_ms", 30'000.0)) {}

    [[nodiscard]] std::string name() const override { return "insider_sync_masquerade"; }

    void start(AdversaryContext& ctx) override {
        (void)ctx.group_key();
        keys_ = KeyPair::from_seed(ctx.rng()());
    }

    void on_observe(AdversaryContext& ctx, const ObservedPacket& o) override {
        learn(ctx, o);
        if (!active(ctx.now()) || !o.message || o.message->type() != MessageType::Sync) return;
        if (o.message->header.sourceClockIdentity != master_id(ctx)) return;
        const auto next = (o.message->header.sequenceId + 1) & id_mask();
        send_sync_pair(ctx, master_id(ctx), addr(ctx, master_), addr(ctx, target_), next, shift_, &keys_);
    }

    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        return target_accepted(log, MessageType::FollowUp);
    }

private:
    std::int64_t shift_;
    KeyPair keys_{};
};

// Records the master's first SYNC/FOLLOW_UP pair after start and re-injects
// it verbatim delay_s later from the master's address.
class ReplayFollowUp final : public AttackBase {
public:
    explicit ReplayFollowUp(const AttackParams& p)
        : AttackBase(p), delay_(p.seconds_ns("delay_s", 100.0)) {}

    [[nodiscard]] std::string name() const override { return "replay_followup"; }
    void start(AdversaryContext&) override {}

    void on_observe(AdversaryContext& ctx, const ObservedPacket& o) override {
        learn(ctx, o);
        if (!active(ctx.now()) || recorded_fu_ || !o.message) return;
        if (o.message->header.sourceClockIdentity != master_id(ctx)) return;
        if (o.message->type() == MessageType::Sync) {
            recorded_sync_ = o.packet;
            sync_seq_ = o.message->header.sequenceId;
        } else if (o.message->type() == MessageType::FollowUp && recorded_sync_ &&
                   o.message->header.sequenceId == sync_seq_) {
            recorded_fu_ = o.packet;
            stats_["recorded_seq"] = sync_seq_;
            ctx.wake_at(ctx.now() + delay_);
        }
    }

    void on_wake(AdversaryContext& ctx, int) override {
        const auto claimed = addr(ctx, master_);
        ctx.send(*recorded_sync_, addr(ctx, target_), claimed, MessageType::Sync);
        ctx.send(*recorded_fu_, addr(ctx, target_), claimed, MessageType::FollowUp);
        ++stats_["replays"];
    }

    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        return target_accepted(log, MessageType::FollowUp);
    }

private:
    std::int64_t delay_;
    std::optional<Packet> recorded_sync_;
    std::optional<Packet> recorded_fu_;
    std::uint32_t sync_seq_ = 0;
};

// Man in the middle on tapped links: delays every packet by delay_ms, or
// (modify) rewrites FOLLOW_UP timestamps by shift_ms.
class MitmTap final : public AttackBase {
public:
    explicit MitmTap(const AttackParams& p, bool modify)
        : AttackBase(p),
          modify_(modify),
          delay_(p.millis_ns("delay_ms", 5.0)),
          shift_(p.millis_ns("shift_ms", 30'000.0)) {}

    [[nodiscard]] std::string name() const override { return modify_ ? "mitm_modify" : "mitm_delay"; }
    void start(AdversaryContext&) override {}

    MitmAction intercept(AdversaryContext& ctx, const ObservedPacket& o) override {
        if (!active(ctx.now())) return MitmAction::pass();
        if (!modify_) {
            ++stats_["delayed"];
            return MitmAction::delay_by(delay_);
        }
        if (!o.message || o.message->type() != MessageType::FollowUp) return MitmAction::pass();
        PtpMessage m = *o.message;
        auto& ts = std::get<FollowUpBody>(m.body).preciseOriginTimestamp;
        ts = Timestamp::from_ns(static_cast<std::int64_t>(ts.to_ns_wide()) + shift_);
        Packet p = o.packet;
        p.bytes = encode(m, is_extended(o.packet.bytes) ? WireMode::Extended : WireMode::Baseline);
        ++stats_["modified"];
        return MitmAction::modify(std::move(p));
    }

    [[nodiscard]] bool succeeded(const MetricsLog& log) const override {
        if (!modify_) return stats_.count("delayed") != 0;
        for (const auto& v : log.verdicts) {
            if (v.node == target_ && v.type == MessageType::FollowUp && v.verdict == Verdict::Accept &&
                v.reason == Reason::Step) {
                return true;
            }
        }
        return false;
    }

private:
    bool modify_;
    std::int64_t delay_;
    std::int64_t shift_;
};

}  // namespace attacks

// Attack names usable from scenario files.
inline const std::vector<std::string>& attack_names() {
    static const std::vector<std::string> names = {
        "delay_spoof",     "sync_spoof",       "blind_window_snatch",
        "naive_window_sweep", "rogue_master",  "proxy_grandmaster",
        "insider_sync_masquerade", "replay_followup", "mitm_delay", "mitm_modify",
    };
    return names;
}

inline AttackFactory make_attack(const std::string& name, const AttackParams& params) {
    using namespace attacks;
    auto bind = [&params](auto tag) -> AttackFactory {
        using T = typename decltype(tag)::type;
        T probe(params);  // validates parameters up front
        (void)probe;
        return [params] { return std::make_unique<T>(params); };
    };
    if (name == "delay_spoof") return bind(std::type_identity<DelaySpoof>{});
    if (name == "sync_spoof") return bind(std::type_identity<SyncSpoof>{});
    if (name == "blind_window_snatch") return bind(std::type_identity<BlindWindowSnatch>{});
    if (name == "naive_window_sweep") return bind(std::type_identity<NaiveWindowSweep>{});
    if (name == "rogue_master") return bind(std::type_identity<RogueMaster>{});
    if (name == "proxy_grandmaster") return bind(std::type_identity<ProxyGrandmaster>{});
    if (name == "insider_sync_masquerade") return bind(std::type_identity<InsiderSyncMasquerade>{});
    if (name == "replay_followup") return bind(std::type_identity<ReplayFollowUp>{});
    if (name == "mitm_delay") return [params] { return std::make_unique<MitmTap>(params, false); };
    if (name == "mitm_modify") return [params] { return std::make_unique<MitmTap>(params, true); };
    throw std::invalid_argument("unknown attack '" + name + "'");
}

// Snatching cost formulas over an ID space of size range and window w.
struct SnatchCost {
    static constexpr std::uint64_t single_pass(std::uint64_t range, std::uint64_t w, std::uint64_t k) {
        return range / w + k;
    }
    static constexpr std::uint64_t double_pass(std::uint64_t range, std::uint64_t w, std::uint64_t k) {
        return 2 * (range / w) + k;
    }
    static constexpr std::uint64_t naive(std::uint64_t range, std::uint64_t w, std::uint64_t k) {
        return (range / w) * k;
    }
    // Seconds to sweep the whole space once at the given send rate.
    static constexpr double sweep_seconds(double range, double w, double rate_pps) {
        return range / w / rate_pps;
    }
};

}  // namespace ptpsec
