#pragma once

// Master and slave protocol state machine of one PTP node. The node owns a
// simulated clock and reacts to timer ticks and received packets by
// returning the packets it emits; transport and timing are the caller's.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ptpsec/bmc.hpp"
#include "ptpsec/identity.hpp"
#include "ptpsec/security.hpp"
#include "ptpsec/session.hpp"
#include "ptpsec/timemath.hpp"
#include "ptpsec/wire.hpp"

namespace ptpsec {

// Simulated clocks start at this instant (2020-09-13).
inline constexpr std::int64_t kEpochNs = 1'600'000'000LL * kNsPerSecond;

// Each level includes the defenses of all levels before it, except that
// PublicKey replaces the group-key ICV with signatures.
enum class SecurityMode { None, Binding, Session16, Session32, Symmetric, PublicKey };

inline const char* to_string(SecurityMode m) {
    switch (m) {
    case SecurityMode::None: return "None";
    case SecurityMode::Binding: return "Binding";
    case SecurityMode::Session16: return "Session16";
    case SecurityMode::Session32: return "Session32";
    case SecurityMode::Symmetric: return "Symmetric";
    case SecurityMode::PublicKey: return "PublicKey";
    }
    return "?";
}

inline std::optional<SecurityMode> parse_security_mode(std::string_view s) {
    for (auto m : {SecurityMode::None, SecurityMode::Binding, SecurityMode::Session16,
                   SecurityMode::Session32, SecurityMode::Symmetric, SecurityMode::PublicKey}) {
        if (s == to_string(m)) return m;
    }
    return std::nullopt;
}

constexpr bool uses_binding(SecurityMode m) { return m >= SecurityMode::Binding; }
constexpr bool uses_session(SecurityMode m) { return m >= SecurityMode::Session16; }
constexpr bool uses_extended(SecurityMode m) { return m >= SecurityMode::Session32; }
constexpr WireMode wire_mode_for(SecurityMode m) {
    return uses_extended(m) ? WireMode::Extended : WireMode::Baseline;
}

// Packet as carried by the simulated transport. The ICV stands in for the
// authentication TLV of the group-key scheme.
struct Packet {
    Bytes bytes;
    std::optional<HmacTag> icv;
};

struct Outbound {
    Packet packet;
    std::optional<NetworkAddress> dest;  // empty: multicast
    MessageType type = MessageType::Sync;
    std::uint32_t sequenceId = 0;
};

enum class Verdict { Accept, Drop };

enum class Reason {
    Ok,
    Bookmarked,
    Step,
    Slew,
    Applied,
    Malformed,
    ModeMismatch,
    NotParent,
    NotMaster,
    BindingMismatch,
    WindowReject,
    NoPendingSync,
    WrongRequester,
    ChallengeMismatch,
    BadIcv,
    BadSignature,
    CertRejected,
    NoMasterKey,
    RejectDelay,
    NegativeDelay,
    NotWhitelisted,
};

inline const char* to_string(Reason r) {
    switch (r) {
    case Reason::Ok: return "ok";
    case Reason::Bookmarked: return "bookmarked";
    case Reason::Step: return "step";
    case Reason::Slew: return "slew";
    case Reason::Applied: return "applied";
    case Reason::Malformed: return "malformed";
    case Reason::ModeMismatch: return "mode_mismatch";
    case Reason::NotParent: return "not_parent";
    case Reason::NotMaster: return "not_master";
    case Reason::BindingMismatch: return "binding_mismatch";
    case Reason::WindowReject: return "window_reject";
    case Reason::NoPendingSync: return "no_pending_sync";
    case Reason::WrongRequester: return "wrong_requester";
    case Reason::ChallengeMismatch: return "challenge_mismatch";
    case Reason::BadIcv: return "bad_icv";
    case Reason::BadSignature: return "bad_signature";
    case Reason::CertRejected: return "cert_rejected";
    case Reason::NoMasterKey: return "no_master_key";
    case Reason::RejectDelay: return "reject_delay";
    case Reason::NegativeDelay: return "negative_delay";
    case Reason::NotWhitelisted: return "not_whitelisted";
    }
    return "?";
}

struct ReceiveOutcome {
    Verdict verdict = Verdict::Drop;
    Reason reason = Reason::Malformed;
    std::optional<MessageType> type;  // empty when undecodable
    std::uint32_t sequenceId = 0;
    std::vector<Outbound> replies;
};

struct ClockQuality {
    std::uint8_t priority1 = 128;
    std::uint8_t clockClass = 248;
    std::uint8_t clockAccuracy = 0xFE;
    std::uint16_t offsetScaledLogVariance = 0xFFFF;
    std::uint8_t priority2 = 128;
    std::uint8_t timeSource = 0xA0;
};

struct NodeConfig {
    std::string name;
    NetworkAddress address{};
    ClockQuality clockQuality{};
    bool masterCapable = true;
    SecurityMode securityMode = SecurityMode::None;
    std::uint32_t windowSize = 50;
    std::optional<unsigned> idBits;  // overrides the mode's ID width
    std::optional<KeyPair> keys;
    std::optional<MasterCertificate> certificate;
    std::optional<PublicKey> managementKey;  // certificate trust anchor
    std::optional<GroupKey> groupKey;
    std::optional<std::vector<NetworkAddress>> mgmtWhitelist;
    std::int8_t syncIntervalLog = 0;
    std::int8_t announceIntervalLog = 1;
    std::int8_t delayReqIntervalLog = 0;
    unsigned announceTimeoutIntervals = 3;
    std::int64_t trueDriftPpb = 0;
    std::int64_t initialOffsetNs = 0;
    ServoState servo{};

    [[nodiscard]] IdSpace id_space() const {
        if (idBits) return IdSpace{*idBits};
        return uses_extended(securityMode) ? IdSpace::bits32() : IdSpace::bits16();
    }
};

inline std::int64_t interval_ns(std::int8_t log2_seconds) {
    return log2_seconds >= 0 ? kNsPerSecond << log2_seconds : kNsPerSecond >> -log2_seconds;
}

// Throws std::invalid_argument describing the first violated invariant.
inline void validate(const NodeConfig& c) {
    auto fail = [&](const std::string& what) { throw std::invalid_argument(c.name + ": " + what); };
    if (!c.servo.valid()) fail("servo gain must be in (0,1] and thresholds positive");
    const auto space = c.id_space();
    if (!space.valid()) fail("idBits must be in [2,32]");
    if (!uses_extended(c.securityMode) && space.bits > 16) fail("baseline wire carries at most 16 ID bits");
    if (c.windowSize < 1 || c.windowSize > space.size() / 2) fail("window size out of range");
    if (c.securityMode == SecurityMode::PublicKey) {
        if (c.masterCapable && (!c.keys || !c.certificate)) fail("PublicKey mode master needs keys and certificate");
        if (!c.managementKey) fail("PublicKey mode needs the management verification key");
    }
    if (c.securityMode == SecurityMode::Symmetric && !c.groupKey) fail("Symmetric mode needs the group key");
    if (c.syncIntervalLog < -7 || c.syncIntervalLog > 6 || c.announceIntervalLog < -3 ||
        c.announceIntervalLog > 6 || c.delayReqIntervalLog < -7 || c.delayReqIntervalLog > 6) {
        fail("message interval out of range");
    }
}

// The dataset a node announces as master, certificate fields left empty.
inline AnnounceBody announced_dataset(const NodeConfig& c) {
    AnnounceBody a;
    a.priority1 = c.clockQuality.priority1;
    a.clockClass = c.clockQuality.clockClass;
    a.clockAccuracy = c.clockQuality.clockAccuracy;
    a.offsetScaledLogVariance = c.clockQuality.offsetScaledLogVariance;
    a.priority2 = c.clockQuality.priority2;
    a.timeSource = c.clockQuality.timeSource;
    a.grandmasterIdentity = clock_id_from_network(c.address);
    return a;
}

struct ParentDataset {
    ClockIdentity masterClockId{};
    NetworkAddress masterAddr{};
    std::optional<PublicKey> masterPublicKey;
    std::optional<SequenceWindow> syncWindow;  // empty until the first accepted message
    std::optional<bool> extendedSeqCapable;
};

struct ElectionEvent {
    std::int64_t time = 0;
    Role role = Role::Master;
    std::optional<ClockIdentity> master;
};

class Node {
public:
    Node(NodeConfig config, std::uint64_t seed)
        : cfg_(std::move(config)),
          clock_id_(clock_id_from_network(cfg_.address)),
          space_(cfg_.id_space()),
          rng_(seed),
          challenges_(space_),
          servo_(cfg_.servo) {
        validate(cfg_);
        if (cfg_.managementKey) verifier_.emplace(*cfg_.managementKey);
        if (uses_session(cfg_.securityMode)) {
            sync_counter_ = init_counter(stream_seed(seed, 0x53594e43), space_);
            announce_counter_ = init_counter(stream_seed(seed, 0x414e4e43), space_);
        }
        role_ = cfg_.masterCapable ? Role::Master : Role::Slave;
    }

    // --- clock -----------------------------------------------------------

    [[nodiscard]] std::int64_t free_running(std::int64_t now) const {
        return kEpochNs + now + static_cast<std::int64_t>(static_cast<__int128>(now) * cfg_.trueDriftPpb / kNsPerSecond) +
               cfg_.initialOffsetNs;
    }
    [[nodiscard]] std::int64_t clock_reading(std::int64_t now) const {
        return free_running(now) + servo_.currentOffset;
    }
    [[nodiscard]] std::int64_t true_offset(std::int64_t now) const {
        return clock_reading(now) - (kEpochNs + now);
    }

    // --- master side -------------------------------------------------------

    // One sync interval: SYNC with a placeholder origin timestamp, then the
    // FOLLOW_UP carrying the egress time t1 (signed in PublicKey mode).
    std::vector<Outbound> master_tick(std::int64_t now) {
        std::vector<Outbound> out;
        if (role_ != Role::Master) return out;
        const std::uint32_t seq = sync_counter_;
        sync_counter_ = (sync_counter_ + 1) & space_.mask();

        PtpHeader h = header(MessageType::Sync, seq, cfg_.syncIntervalLog);
        h.flagField |= kFlagTwoStep;
        out.push_back(emit(make_message(h, SyncBody{}), std::nullopt));

        const Timestamp t1 = Timestamp::from_ns(clock_reading(now));
        PtpHeader fh = header(MessageType::FollowUp, seq, cfg_.syncIntervalLog);
        auto fu = make_message(fh, FollowUpBody{t1, {}});
        if (cfg_.securityMode == SecurityMode::PublicKey) {
            std::get<FollowUpBody>(fu.body).signature = sign_followup(fu, *cfg_.keys);
        }
        out.push_back(emit(fu, std::nullopt));
        ++syncs_emitted_;
        return out;
    }

    // Announce interval: refresh the election and, as master, announce.
    std::vector<Outbound> announce_tick(std::int64_t now) {
        std::vector<Outbound> out;
        elect(now);
        if (role_ != Role::Master || !cfg_.masterCapable) return out;
        const std::uint32_t seq = announce_counter_;
        announce_counter_ = (announce_counter_ + 1) & space_.mask();
        AnnounceBody body = own_dataset();
        body.originTimestamp = Timestamp::from_ns(clock_reading(now));
        if (cfg_.securityMode == SecurityMode::PublicKey) {
            body = attach_certificate(body, *cfg_.certificate);
        }
        out.push_back(emit(make_message(header(MessageType::Announce, seq, cfg_.announceIntervalLog), body),
                           std::nullopt));
        ++announces_emitted_;
        return out;
    }

    // --- slave side ----------------------------------------------------------

    // Emits a DELAY_REQ to the master's address. In session modes its
    // sequenceId is a fresh random challenge; otherwise a plain counter.
    std::vector<Outbound> slave_delay_cycle(std::int64_t now) {
        std::vector<Outbound> out;
        if (role_ != Role::Slave || !parent_ || !last_sync_) return out;
        const auto dest = master_address();
        if (!dest) return out;
        std::uint32_t seq;
        if (uses_session(cfg_.securityMode)) {
            seq = challenges_.issue(MessageType::DelayReq, rng_);
        } else {
            seq = delay_counter_;
            delay_counter_ = (delay_counter_ + 1) & 0xFFFF;
            challenges_.issue_fixed(MessageType::DelayReq, seq);
        }
        const std::int64_t t3 = clock_reading(now);
        pending_delay_ = PendingDelay{t3, last_sync_->masterToSlave + (servo_.currentOffset - last_sync_->servoAtT2)};
        PtpHeader h = header(MessageType::DelayReq, seq, 0x7F);
        out.push_back(emit(make_message(h, DelayReqBody{Timestamp::from_ns(t3)}), dest));
        return out;
    }

    // Dispatches one received packet through the gates for its type.
    ReceiveOutcome receive(const Packet& packet, const NetworkAddress& observedAddr, std::int64_t now) {
        ReceiveOutcome r;
        PtpMessage msg;
        try {
            msg = decode(packet.bytes, uses_extended(cfg_.securityMode) ? DecodeView::Native : DecodeView::Legacy);
        } catch (const WireError&) {
            return r;
        }
        r.type = msg.type();
        r.sequenceId = msg.header.sequenceId;
        const bool extended = is_extended(packet.bytes);
        if (uses_extended(cfg_.securityMode) && !extended) {
            return finish(r, Verdict::Drop, Reason::ModeMismatch);
        }
        switch (msg.type()) {
        case MessageType::Announce: return on_announce(r, msg, packet, observedAddr, now);
        case MessageType::Sync:
        case MessageType::FollowUp:
        case MessageType::DelayResp: return slave_handle(r, msg, packet, observedAddr, now, extended);
        case MessageType::DelayReq: return on_delay_req(r, msg, packet, observedAddr, now);
        case MessageType::MgmtSet: return handle_mgmt(r, msg, observedAddr, now);
        }
        return r;
    }

    // --- observers -----------------------------------------------------------

    [[nodiscard]] const NodeConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const std::string& name() const noexcept { return cfg_.name; }
    [[nodiscard]] const ClockIdentity& clock_id() const noexcept { return clock_id_; }
    [[nodiscard]] Role role() const noexcept { return role_; }
    [[nodiscard]] const std::optional<ParentDataset>& parent() const noexcept { return parent_; }
    [[nodiscard]] const ServoState& servo() const noexcept { return servo_; }
    [[nodiscard]] std::optional<std::int64_t> mean_path_delay() const noexcept { return mean_path_delay_; }
    [[nodiscard]] const std::vector<ElectionEvent>& elections() const noexcept { return elections_; }
    [[nodiscard]] const CertificateVerifier* verifier() const noexcept {
        return verifier_ ? &*verifier_ : nullptr;
    }
    [[nodiscard]] std::uint32_t next_sync_sequence() const noexcept { return sync_counter_; }
    [[nodiscard]] std::uint32_t next_announce_sequence() const noexcept { return announce_counter_; }
    [[nodiscard]] std::uint64_t syncs_emitted() const noexcept { return syncs_emitted_; }
    [[nodiscard]] std::uint64_t announces_emitted() const noexcept { return announces_emitted_; }
    [[nodiscard]] std::optional<ForeignMasterRecord> foreign_record(const ClockIdentity& id) const {
        const auto it = records_.find(id);
        if (it == records_.end()) return std::nullopt;
        return it->second.record;
    }

    [[nodiscard]] AnnounceBody own_dataset() const { return announced_dataset(cfg_); }

    // The address DELAY_REQs go to: derived from the master's clock ID when
    // binding is on, otherwise the source of its last accepted ANNOUNCE.
    [[nodiscard]] std::optional<NetworkAddress> master_address() const {
        if (!parent_) return std::nullopt;
        if (uses_binding(cfg_.securityMode)) {
            return network_from_clock_id(parent_->masterClockId, cfg_.address.kind, cfg_.address.port);
        }
        return parent_->masterAddr;
    }

private:
    struct SyncBookmark {
        std::uint32_t sequenceId = 0;
        std::int64_t t2 = 0;
    };
    static constexpr std::size_t kMaxBookmarks = 4;
    struct SyncSample {
        std::int64_t masterToSlave = 0;  // t2 - t1
        std::int64_t servoAtT2 = 0;      // servo correction when t2 was taken
    };
    struct PendingDelay {
        std::int64_t t3 = 0;
        std::int64_t masterToSlave = 0;  // t2 - t1 as the clock stood at t3
    };
    struct RecordState {
        ForeignMasterRecord record;
        std::optional<SequenceWindow> window;
    };

    PtpHeader header(MessageType type, std::uint32_t seq, std::int8_t logInterval) const {
        PtpHeader h;
        h.messageType = type;
        h.sourceClockIdentity = clock_id_;
        h.sourcePortNumber = 1;
        h.sequenceId = seq;
        h.logMessageInterval = logInterval;
        return h;
    }

    Outbound emit(const PtpMessage& msg, std::optional<NetworkAddress> dest) const {
        Outbound o;
        o.packet.bytes = encode(msg, wire_mode_for(cfg_.securityMode));
        if (cfg_.securityMode == SecurityMode::Symmetric) {
            o.packet.icv = hmac_tag(o.packet.bytes, *cfg_.groupKey);
        }
        o.dest = std::move(dest);
        o.type = msg.type();
        o.sequenceId = msg.header.sequenceId;
        return o;
    }

    static ReceiveOutcome& finish(ReceiveOutcome& r, Verdict v, Reason why) {
        r.verdict = v;
        r.reason = why;
        return r;
    }

    bool icv_ok(const Packet& p) const {
        return p.icv && hmac_check(p.bytes, *p.icv, *cfg_.groupKey);
    }

    [[nodiscard]] SequenceWindow fresh_window(std::uint32_t after) const {
        return SequenceWindow{(after + 1) & space_.mask(), cfg_.windowSize, space_};
    }

    // Window gate without side effects: returns the window to commit.
    [[nodiscard]] std::optional<SequenceWindow> window_gate(const std::optional<SequenceWindow>& win,
                                                            std::uint32_t seq) const {
        if (!uses_session(cfg_.securityMode)) return win;
        if (seq > space_.mask()) return std::nullopt;
        if (!win) return fresh_window(seq);
        const auto v = window_accept(*win, seq);
        if (!v.accepted) return std::nullopt;
        return v.window;
    }

    ReceiveOutcome on_announce(ReceiveOutcome& r, const PtpMessage& msg, const Packet& packet,
                               const NetworkAddress& from, std::int64_t now) {
        const auto& src = msg.header.sourceClockIdentity;
        if (src == clock_id_) return finish(r, Verdict::Drop, Reason::NotParent);
        if (uses_binding(cfg_.securityMode) && !verify_binding(src, from)) {
            return finish(r, Verdict::Drop, Reason::BindingMismatch);
        }
        auto& state = records_[src];
        const auto next_window = window_gate(state.window, msg.header.sequenceId);
        if (uses_session(cfg_.securityMode) && !next_window) {
            return finish(r, Verdict::Drop, Reason::WindowReject);
        }
        const auto& body = std::get<AnnounceBody>(msg.body);
        CertState cert = CertState::Unverified;
        if (cfg_.securityMode == SecurityMode::Symmetric && !icv_ok(packet)) {
            return finish(r, Verdict::Drop, Reason::BadIcv);
        }
        if (cfg_.securityMode == SecurityMode::PublicKey) {
            const bool ok = verifier_->verify(src, certificate_from_announce(body));
            cert = ok ? CertState::Verified : CertState::Rejected;
            state.record.announce = body;
            state.record.sourceClockId = src;
            state.record.sourceAddr = from;
            state.record.certState = cert;
            if (!ok) {
                state.record.lastSeen = now;
                return finish(r, Verdict::Drop, Reason::CertRejected);
            }
        }
        state.window = next_window;
        state.record.announce = body;
        state.record.sourceClockId = src;
        state.record.sourceAddr = from;
        state.record.lastSeen = now;
        state.record.certState = cert;
        if (parent_ && parent_->masterClockId == src && !uses_binding(cfg_.securityMode)) {
            parent_->masterAddr = from;
        }
        elect(now);
        return finish(r, Verdict::Accept, Reason::Ok);
    }

    // Gate order for SYNC / FOLLOW_UP / DELAY_RESP:
    // parent -> binding -> window/challenge -> ICV/signature -> commit -> servo.
    ReceiveOutcome slave_handle(ReceiveOutcome& r, const PtpMessage& msg, const Packet& packet,
                                const NetworkAddress& from, std::int64_t now, bool extended) {
        const auto& src = msg.header.sourceClockIdentity;
        if (role_ != Role::Slave || !parent_ || parent_->masterClockId != src) {
            return finish(r, Verdict::Drop, Reason::NotParent);
        }
        if (parent_->extendedSeqCapable && *parent_->extendedSeqCapable != extended) {
            return finish(r, Verdict::Drop, Reason::ModeMismatch);
        }
        if (uses_binding(cfg_.securityMode) && !verify_binding(src, from)) {
            return finish(r, Verdict::Drop, Reason::BindingMismatch);
        }
        const auto seq = msg.header.sequenceId;
        const bool public_key = cfg_.securityMode == SecurityMode::PublicKey;
        const bool symmetric = cfg_.securityMode == SecurityMode::Symmetric;

        if (msg.type() == MessageType::Sync) {
            const auto next_window = window_gate(parent_->syncWindow, seq);
            if (uses_session(cfg_.securityMode) && !next_window) {
                return finish(r, Verdict::Drop, Reason::WindowReject);
            }
            if (symmetric && !icv_ok(packet)) return finish(r, Verdict::Drop, Reason::BadIcv);
            // SYNC is unsigned in PublicKey mode; its window advances only
            // once the matching FOLLOW_UP verifies. Several bookmarks are
            // kept so an unsigned SYNC cannot displace the master's.
            if (!public_key) parent_->syncWindow = next_window;
            parent_->extendedSeqCapable = extended;
            std::erase_if(bookmarks_, [seq](const SyncBookmark& b) { return b.sequenceId == seq; });
            bookmarks_.push_back(SyncBookmark{seq, clock_reading(now)});
            if (bookmarks_.size() > kMaxBookmarks) bookmarks_.erase(bookmarks_.begin());
            return finish(r, Verdict::Accept, Reason::Bookmarked);
        }

        if (msg.type() == MessageType::FollowUp) {
            const auto mark = std::find_if(bookmarks_.begin(), bookmarks_.end(),
                                           [seq](const SyncBookmark& b) { return b.sequenceId == seq; });
            if (mark == bookmarks_.end()) return finish(r, Verdict::Drop, Reason::NoPendingSync);
            const auto next_window = window_gate(parent_->syncWindow, seq);
            if (public_key && uses_session(cfg_.securityMode) && !next_window) {
                return finish(r, Verdict::Drop, Reason::WindowReject);
            }
            if (symmetric && !icv_ok(packet)) return finish(r, Verdict::Drop, Reason::BadIcv);
            if (public_key) {
                if (!parent_->masterPublicKey) return finish(r, Verdict::Drop, Reason::NoMasterKey);
                if (!verify_followup(msg, *parent_->masterPublicKey)) {
                    return finish(r, Verdict::Drop, Reason::BadSignature);
                }
                parent_->syncWindow = next_window;
            }
            const auto t2 = mark->t2;
            bookmarks_.erase(mark);
            const auto t1 = std::get<FollowUpBody>(msg.body).preciseOriginTimestamp.to_ns_wide();
            const __int128 ms_wide = static_cast<__int128>(t2) - t1;
            if (ms_wide > INT64_MAX / 2 || ms_wide < INT64_MIN / 2) {
                return finish(r, Verdict::Drop, Reason::Malformed);
            }
            const auto ms = static_cast<std::int64_t>(ms_wide);
            last_sync_ = SyncSample{ms, servo_.currentOffset};
            const std::int64_t delay = mean_path_delay_.value_or(0);
            const std::int64_t offset = ms - delay;
            // The slew cap is a rate: each update may move the clock by at
            // most one nominal sync interval's worth.
            const auto result = servo_update(servo_, offset, delay, interval_ns(cfg_.syncIntervalLog));
            if (result.action == ServoAction::RejectDelay) {
                return finish(r, Verdict::Drop, Reason::RejectDelay);
            }
            servo_ = result.state;
            return finish(r, Verdict::Accept, result.action == ServoAction::Step ? Reason::Step : Reason::Slew);
        }

        // DELAY_RESP
        const auto& body = std::get<DelayRespBody>(msg.body);
        if (body.requestingClockIdentity != clock_id_) {
            return finish(r, Verdict::Drop, Reason::WrongRequester);
        }
        if (!pending_delay_ || !challenges_.outstanding(MessageType::DelayReq) ||
            *challenges_.outstanding(MessageType::DelayReq) != seq) {
            return finish(r, Verdict::Drop, Reason::ChallengeMismatch);
        }
        if (symmetric && !icv_ok(packet)) return finish(r, Verdict::Drop, Reason::BadIcv);
        challenges_.check(MessageType::DelayReq, seq);
        const auto pending = *pending_delay_;
        pending_delay_.reset();
        const __int128 sm = body.receiveTimestamp.to_ns_wide() - static_cast<__int128>(pending.t3);
        const __int128 sample = (static_cast<__int128>(pending.masterToSlave) + sm) / 2;
        if (sample < 0) return finish(r, Verdict::Drop, Reason::NegativeDelay);
        if (sample > INT64_MAX) return finish(r, Verdict::Drop, Reason::Malformed);
        const auto delay = static_cast<std::int64_t>(sample);
        if (servo_.maxDelayLimit && delay > *servo_.maxDelayLimit) {
            return finish(r, Verdict::Drop, Reason::RejectDelay);
        }
        mean_path_delay_ = delay;
        return finish(r, Verdict::Accept, Reason::Ok);
    }

    ReceiveOutcome on_delay_req(ReceiveOutcome& r, const PtpMessage& msg, const Packet& packet,
                                const NetworkAddress& from, std::int64_t now) {
        if (role_ != Role::Master || !cfg_.masterCapable) return finish(r, Verdict::Drop, Reason::NotMaster);
        if (cfg_.securityMode == SecurityMode::Symmetric && !icv_ok(packet)) {
            return finish(r, Verdict::Drop, Reason::BadIcv);
        }
        DelayRespBody body;
        body.receiveTimestamp = Timestamp::from_ns(clock_reading(now));
        body.requestingClockIdentity = msg.header.sourceClockIdentity;
        body.requestingPortNumber = msg.header.sourcePortNumber;
        PtpHeader h = header(MessageType::DelayResp, msg.header.sequenceId, cfg_.delayReqIntervalLog);
        r.replies.push_back(emit(make_message(h, body), from));
        return finish(r, Verdict::Accept, Reason::Ok);
    }

    // Management SETs are applied iff the source is whitelisted (or no
    // whitelist is configured).
    ReceiveOutcome handle_mgmt(ReceiveOutcome& r, const PtpMessage& msg, const NetworkAddress& from,
                               std::int64_t now) {
        if (cfg_.mgmtWhitelist) {
            bool listed = false;
            for (const auto& a : *cfg_.mgmtWhitelist) listed = listed || a.same_host(from);
            if (!listed) return finish(r, Verdict::Drop, Reason::NotWhitelisted);
        }
        const auto& body = std::get<MgmtSetBody>(msg.body);
        auto& q = cfg_.clockQuality;
        switch (body.action) {
        case MgmtAction::SetClockAccuracy: q.clockAccuracy = static_cast<std::uint8_t>(body.value); break;
        case MgmtAction::SetPriority1: q.priority1 = static_cast<std::uint8_t>(body.value); break;
        case MgmtAction::SetPriority2: q.priority2 = static_cast<std::uint8_t>(body.value); break;
        case MgmtAction::SetTime: {
            const auto target = static_cast<std::int64_t>(body.value);
            servo_.currentOffset += target - clock_reading(now);
            break;
        }
        }
        elect(now);
        return finish(r, Verdict::Accept, Reason::Applied);
    }

    void elect(std::int64_t now) {
        const std::int64_t timeout =
            interval_ns(cfg_.announceIntervalLog) * static_cast<std::int64_t>(cfg_.announceTimeoutIntervals);
        std::vector<ForeignMasterRecord> live;
        for (auto it = records_.begin(); it != records_.end();) {
            if (now - it->second.record.lastSeen > timeout) {
                it = records_.erase(it);
            } else {
                live.push_back(it->second.record);
                ++it;
            }
        }
        const bool require_certs = cfg_.securityMode == SecurityMode::PublicKey;
        const std::optional<AnnounceBody> own =
            cfg_.masterCapable ? std::optional<AnnounceBody>(own_dataset()) : std::nullopt;
        const auto result = run_election(live, own, require_certs);
        if (result.chosenMaster && require_certs &&
            live[*result.recordIndex].certState != CertState::Verified) {
            throw std::logic_error("elected master without a verified certificate");
        }

        const bool changed = result.role != role_ ||
                             (result.chosenMaster && (!parent_ || parent_->masterClockId != *result.chosenMaster)) ||
                             (!result.chosenMaster && parent_);
        if (!changed) return;
        role_ = result.role;
        bookmarks_.clear();
        pending_delay_.reset();
        last_sync_.reset();
        mean_path_delay_.reset();
        if (result.chosenMaster) {
            const auto& rec = live[*result.recordIndex];
            ParentDataset p;
            p.masterClockId = rec.sourceClockId;
            p.masterAddr = rec.sourceAddr;
            if (require_certs) p.masterPublicKey = rec.announce.publicKey;
            parent_ = p;
        } else {
            parent_.reset();
        }
        elections_.push_back(ElectionEvent{now, role_, result.chosenMaster});
    }

    NodeConfig cfg_;
    ClockIdentity clock_id_;
    IdSpace space_;
    std::mt19937_64 rng_;
    ChallengeState challenges_;
    ServoState servo_;
    std::optional<CertificateVerifier> verifier_;

    Role role_ = Role::Master;
    std::optional<ParentDataset> parent_;
    std::map<ClockIdentity, RecordState> records_;
    std::vector<ElectionEvent> elections_;

    std::uint32_t sync_counter_ = 0;
    std::uint32_t announce_counter_ = 0;
    std::uint32_t delay_counter_ = 0;
    std::uint64_t syncs_emitted_ = 0;
    std::uint64_t announces_emitted_ = 0;

    std::vector<SyncBookmark> bookmarks_;
    std::optional<SyncSample> last_sync_;
    std::optional<PendingDelay> pending_delay_;
    std::optional<std::int64_t> mean_path_delay_;
};

}  // namespace ptpsec
