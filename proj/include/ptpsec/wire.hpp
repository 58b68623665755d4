#pragma once

// PTP message codec. Baseline (IEEE 1588-2008 layout) and extended mode,
// where the SECURITY flag marks a 32-bit sequence ID whose two most
// significant bytes live in the first two reserved header octets and where
// ANNOUNCE/FOLLOW_UP carry certificate and signature fields.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ptpsec {

using Bytes = std::vector<std::uint8_t>;
using PublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

inline constexpr std::size_t kHeaderSize = 34;
inline constexpr std::size_t kTimestampSize = 10;
inline constexpr std::size_t kAnnounceBaselineSize = 64;
inline constexpr std::size_t kAnnounceExtendedSize = 160;
inline constexpr std::size_t kFollowUpBaselineSize = 44;
inline constexpr std::size_t kFollowUpExtendedSize = 108;
inline constexpr std::size_t kSyncSize = 44;
inline constexpr std::size_t kDelayReqSize = 44;
inline constexpr std::size_t kDelayRespSize = 54;
inline constexpr std::size_t kMgmtSetSize = 44;

// flagField bits, as the 16-bit big-endian value (octet 0 in the high byte).
inline constexpr std::uint16_t kFlagTwoStep = 0x0200;
inline constexpr std::uint16_t kFlagUnicast = 0x0400;
inline constexpr std::uint16_t kFlagSecurity = 0x8000;

// Header offsets of the fields the extension touches.
inline constexpr std::size_t kOffsetFlags = 6;
inline constexpr std::size_t kOffsetSeqIdHigh = 16;
inline constexpr std::size_t kOffsetSeqIdLow = 30;

enum class WireMode { Baseline, Extended };

enum class WireErrc {
    SequenceOverflow,
    FieldRange,
    Truncated,
    UnknownMessageType,
    BadLengthField,
    BadHex,
};

inline std::string_view to_string(WireErrc e) {
    switch (e) {
    case WireErrc::SequenceOverflow: return "SequenceOverflow";
    case WireErrc::FieldRange: return "FieldRange";
    case WireErrc::Truncated: return "Truncated";
    case WireErrc::UnknownMessageType: return "UnknownMessageType";
    case WireErrc::BadLengthField: return "BadLengthField";
    case WireErrc::BadHex: return "BadHex";
    }
    return "?";
}

class WireError : public std::runtime_error {
public:
    WireError(WireErrc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] WireErrc code() const noexcept { return code_; }

private:
    WireErrc code_;
};

struct Timestamp {
    static constexpr std::uint64_t kMaxSeconds = (std::uint64_t{1} << 48) - 1;
    static constexpr std::uint32_t kNanosPerSecond = 1'000'000'000;

    std::uint64_t seconds = 0;     // 48 bits on the wire
    std::uint32_t nanoseconds = 0;

    [[nodiscard]] bool valid() const noexcept {
        return seconds <= kMaxSeconds && nanoseconds < kNanosPerSecond;
    }

    // Non-negative ns count to timestamp. Throws FieldRange for negatives.
    static Timestamp from_ns(std::int64_t ns) {
        if (ns < 0) {
            throw WireError(WireErrc::FieldRange, "negative timestamp");
        }
        return Timestamp{static_cast<std::uint64_t>(ns / kNanosPerSecond),
                         static_cast<std::uint32_t>(ns % kNanosPerSecond)};
    }

    // Full-range value; 48-bit seconds overflow int64 ns, hence 128 bits.
    [[nodiscard]] __int128 to_ns_wide() const noexcept {
        return static_cast<__int128>(seconds) * kNanosPerSecond + nanoseconds;
    }

    friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

struct ClockIdentity {
    std::array<std::uint8_t, 8> octets{};

    friend bool operator==(const ClockIdentity&, const ClockIdentity&) = default;
    friend auto operator<=>(const ClockIdentity&, const ClockIdentity&) = default;
};

inline std::string to_string(const ClockIdentity& id);

enum class MessageType : std::uint8_t {
    Sync = 0x0,
    DelayReq = 0x1,
    FollowUp = 0x8,
    DelayResp = 0x9,
    Announce = 0xB,
    MgmtSet = 0xD,
};

inline std::string_view to_string(MessageType t) {
    switch (t) {
    case MessageType::Sync: return "SYNC";
    case MessageType::DelayReq: return "DELAY_REQ";
    case MessageType::FollowUp: return "FOLLOW_UP";
    case MessageType::DelayResp: return "DELAY_RESP";
    case MessageType::Announce: return "ANNOUNCE";
    case MessageType::MgmtSet: return "MGMT_SET";
    }
    return "?";
}

struct PtpHeader {
    MessageType messageType = MessageType::Sync;
    std::uint8_t version = 2;          // 4 bits
    std::uint8_t domainNumber = 0;
    std::uint16_t flagField = 0;       // SECURITY bit is owned by the codec
    std::int64_t correctionField = 0;
    ClockIdentity sourceClockIdentity{};
    std::uint16_t sourcePortNumber = 1;
    std::uint32_t sequenceId = 0;      // logical; baseline carries 16 bits
    std::int8_t logMessageInterval = 0;

    friend bool operator==(const PtpHeader&, const PtpHeader&) = default;
};

struct SyncBody {
    Timestamp originTimestamp{};
    friend bool operator==(const SyncBody&, const SyncBody&) = default;
};

struct DelayReqBody {
    Timestamp originTimestamp{};
    friend bool operator==(const DelayReqBody&, const DelayReqBody&) = default;
};

struct FollowUpBody {
    Timestamp preciseOriginTimestamp{};
    Signature signature{};  // extended mode only; all-zero in baseline
    friend bool operator==(const FollowUpBody&, const FollowUpBody&) = default;
};

struct DelayRespBody {
    Timestamp receiveTimestamp{};
    ClockIdentity requestingClockIdentity{};
    std::uint16_t requestingPortNumber = 0;
    friend bool operator==(const DelayRespBody&, const DelayRespBody&) = default;
};

struct AnnounceBody {
    Timestamp originTimestamp{};
    std::int16_t currentUtcOffset = 37;
    std::uint8_t priority1 = 128;
    std::uint8_t clockClass = 248;
    std::uint8_t clockAccuracy = 0xFE;
    std::uint16_t offsetScaledLogVariance = 0xFFFF;
    std::uint8_t priority2 = 128;
    ClockIdentity grandmasterIdentity{};
    std::uint16_t stepsRemoved = 0;
    std::uint8_t timeSource = 0xA0;
    PublicKey publicKey{};                 // extended mode only
    Signature managementSignature{};       // extended mode only

    friend bool operator==(const AnnounceBody&, const AnnounceBody&) = default;
};

enum class MgmtAction : std::uint16_t {
    SetClockAccuracy = 1,
    SetPriority1 = 2,
    SetPriority2 = 3,
    SetTime = 4,
};

struct MgmtSetBody {
    MgmtAction action = MgmtAction::SetClockAccuracy;
    std::uint64_t value = 0;
    friend bool operator==(const MgmtSetBody&, const MgmtSetBody&) = default;
};

using MessageBody =
    std::variant<SyncBody, DelayReqBody, FollowUpBody, DelayRespBody, AnnounceBody, MgmtSetBody>;

struct PtpMessage {
    PtpHeader header{};
    MessageBody body{SyncBody{}};

    [[nodiscard]] MessageType type() const noexcept { return header.messageType; }

    friend bool operator==(const PtpMessage&, const PtpMessage&) = default;
};

// Wire size of a message of the given type in the given mode.
constexpr std::size_t message_size(MessageType t, WireMode mode) noexcept {
    const bool ext = mode == WireMode::Extended;
    switch (t) {
    case MessageType::Sync: return kSyncSize;
    case MessageType::DelayReq: return kDelayReqSize;
    case MessageType::FollowUp: return ext ? kFollowUpExtendedSize : kFollowUpBaselineSize;
    case MessageType::DelayResp: return kDelayRespSize;
    case MessageType::Announce: return ext ? kAnnounceExtendedSize : kAnnounceBaselineSize;
    case MessageType::MgmtSet: return kMgmtSetSize;
    }
    return 0;
}

// Builds a message whose header type matches the body alternative.
template <typename Body>
PtpMessage make_message(PtpHeader header, Body body);

namespace detail {

class Writer {
public:
    explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        u8(static_cast<std::uint8_t>(v >> 8));
        u8(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v) {
        u16(static_cast<std::uint16_t>(v >> 16));
        u16(static_cast<std::uint16_t>(v));
    }
    void u48(std::uint64_t v) {
        u16(static_cast<std::uint16_t>(v >> 32));
        u32(static_cast<std::uint32_t>(v));
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v >> 32));
        u32(static_cast<std::uint32_t>(v));
    }
    void zeros(std::size_t n) { out_.insert(out_.end(), n, 0); }
    template <std::size_t N>
    void raw(const std::array<std::uint8_t, N>& a) { out_.insert(out_.end(), a.begin(), a.end()); }

    void timestamp(const Timestamp& ts) {
        u48(ts.seconds);
        u32(ts.nanoseconds);
    }

    Bytes& bytes() { return out_; }

private:
    Bytes out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint16_t u16() {
        const auto hi = u8();
        return static_cast<std::uint16_t>((hi << 8) | u8());
    }
    std::uint32_t u32() {
        const std::uint32_t hi = u16();
        return (hi << 16) | u16();
    }
    std::uint64_t u48() {
        const std::uint64_t hi = u16();
        return (hi << 32) | u32();
    }
    std::uint64_t u64() {
        const std::uint64_t hi = u32();
        return (hi << 32) | u32();
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    template <std::size_t N>
    std::array<std::uint8_t, N> raw() {
        need(N);
        std::array<std::uint8_t, N> a{};
        for (auto& b : a) b = in_[pos_++];
        return a;
    }
    Timestamp timestamp() {
        Timestamp ts;
        ts.seconds = u48();
        ts.nanoseconds = u32();
        return ts;
    }
    [[nodiscard]] std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) {
            throw WireError(WireErrc::Truncated, "need " + std::to_string(pos_ + n) +
                                                     " bytes, have " + std::to_string(in_.size()));
        }
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

template <std::size_t N>
bool all_zero(const std::array<std::uint8_t, N>& a) {
    for (auto b : a) {
        if (b != 0) return false;
    }
    return true;
}

inline void check_timestamp(const Timestamp& ts, const char* field) {
    if (!ts.valid()) {
        throw WireError(WireErrc::FieldRange, field);
    }
}

inline bool body_matches_type(const PtpMessage& msg) {
    switch (msg.header.messageType) {
    case MessageType::Sync: return std::holds_alternative<SyncBody>(msg.body);
    case MessageType::DelayReq: return std::holds_alternative<DelayReqBody>(msg.body);
    case MessageType::FollowUp: return std::holds_alternative<FollowUpBody>(msg.body);
    case MessageType::DelayResp: return std::holds_alternative<DelayRespBody>(msg.body);
    case MessageType::Announce: return std::holds_alternative<AnnounceBody>(msg.body);
    case MessageType::MgmtSet: return std::holds_alternative<MgmtSetBody>(msg.body);
    }
    return false;
}

inline std::uint8_t control_field(MessageType t) {
    switch (t) {
    case MessageType::Sync: return 0;
    case MessageType::DelayReq: return 1;
    case MessageType::FollowUp: return 2;
    case MessageType::DelayResp: return 3;
    case MessageType::MgmtSet: return 4;
    case MessageType::Announce: return 5;
    }
    return 5;
}

inline void write_announce_fields(Writer& w, const AnnounceBody& a) {
    w.timestamp(a.originTimestamp);
    w.u16(static_cast<std::uint16_t>(a.currentUtcOffset));
    w.u8(0);  // reserved
    w.u8(a.priority1);
    w.u8(a.clockClass);
    w.u8(a.clockAccuracy);
    w.u16(a.offsetScaledLogVariance);
    w.u8(a.priority2);
    w.raw(a.grandmasterIdentity.octets);
    w.u16(a.stepsRemoved);
    w.u8(a.timeSource);
}

inline void read_announce_fields(Reader& r, AnnounceBody& a) {
    a.originTimestamp = r.timestamp();
    a.currentUtcOffset = static_cast<std::int16_t>(r.u16());
    r.skip(1);
    a.priority1 = r.u8();
    a.clockClass = r.u8();
    a.clockAccuracy = r.u8();
    a.offsetScaledLogVariance = r.u16();
    a.priority2 = r.u8();
    a.grandmasterIdentity.octets = r.raw<8>();
    a.stepsRemoved = r.u16();
    a.timeSource = r.u8();
}

}  // namespace detail

template <typename Body>
PtpMessage make_message(PtpHeader header, Body body) {
    if constexpr (std::is_same_v<Body, SyncBody>) header.messageType = MessageType::Sync;
    else if constexpr (std::is_same_v<Body, DelayReqBody>) header.messageType = MessageType::DelayReq;
    else if constexpr (std::is_same_v<Body, FollowUpBody>) header.messageType = MessageType::FollowUp;
    else if constexpr (std::is_same_v<Body, DelayRespBody>) header.messageType = MessageType::DelayResp;
    else if constexpr (std::is_same_v<Body, AnnounceBody>) header.messageType = MessageType::Announce;
    else header.messageType = MessageType::MgmtSet;
    return PtpMessage{header, MessageBody{std::move(body)}};
}

// Announce body image without the PTP header, as covered by the
// management certificate. The extension signature is never part of it.
inline Bytes encode_announce_body(const AnnounceBody& a, bool include_public_key) {
    detail::Writer w(30 + 32);
    detail::write_announce_fields(w, a);
    if (include_public_key) w.raw(a.publicKey);
    return std::move(w.bytes());
}

inline Bytes encode(const PtpMessage& msg, WireMode mode) {
    using namespace detail;
    const auto& h = msg.header;
    if (!body_matches_type(msg)) {
        throw WireError(WireErrc::FieldRange, "body does not match messageType");
    }
    if (h.version > 0x0F) {
        throw WireError(WireErrc::FieldRange, "version exceeds 4 bits");
    }
    const bool ext = mode == WireMode::Extended;
    if (!ext && h.sequenceId > 0xFFFF) {
        throw WireError(WireErrc::SequenceOverflow,
                        "sequenceId " + std::to_string(h.sequenceId) + " needs extended mode");
    }

    const std::size_t size = message_size(h.messageType, mode);
    Writer w(size);
    w.u8(static_cast<std::uint8_t>(h.messageType) & 0x0F);
    w.u8(h.version & 0x0F);
    w.u16(static_cast<std::uint16_t>(size));
    w.u8(h.domainNumber);
    w.u8(0);
    const std::uint16_t flags =
        ext ? static_cast<std::uint16_t>(h.flagField | kFlagSecurity)
            : static_cast<std::uint16_t>(h.flagField & ~kFlagSecurity);
    w.u16(flags);
    w.u64(static_cast<std::uint64_t>(h.correctionField));
    w.u16(ext ? static_cast<std::uint16_t>(h.sequenceId >> 16) : 0);
    w.zeros(2);
    w.raw(h.sourceClockIdentity.octets);
    w.u16(h.sourcePortNumber);
    w.u16(static_cast<std::uint16_t>(h.sequenceId & 0xFFFF));
    w.u8(control_field(h.messageType));
    w.u8(static_cast<std::uint8_t>(h.logMessageInterval));

    std::visit(
        [&](const auto& b) {
            using B = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<B, SyncBody> || std::is_same_v<B, DelayReqBody>) {
                check_timestamp(b.originTimestamp, "originTimestamp");
                w.timestamp(b.originTimestamp);
            } else if constexpr (std::is_same_v<B, FollowUpBody>) {
                check_timestamp(b.preciseOriginTimestamp, "preciseOriginTimestamp");
                w.timestamp(b.preciseOriginTimestamp);
                if (ext) {
                    w.raw(b.signature);
                } else if (!all_zero(b.signature)) {
                    throw WireError(WireErrc::FieldRange, "signature requires extended mode");
                }
            } else if constexpr (std::is_same_v<B, DelayRespBody>) {
                check_timestamp(b.receiveTimestamp, "receiveTimestamp");
                w.timestamp(b.receiveTimestamp);
                w.raw(b.requestingClockIdentity.octets);
                w.u16(b.requestingPortNumber);
            } else if constexpr (std::is_same_v<B, AnnounceBody>) {
                check_timestamp(b.originTimestamp, "originTimestamp");
                write_announce_fields(w, b);
                if (ext) {
                    w.raw(b.publicKey);
                    w.raw(b.managementSignature);
                } else if (!all_zero(b.publicKey) || !all_zero(b.managementSignature)) {
                    throw WireError(WireErrc::FieldRange, "certificate requires extended mode");
                }
            } else {
                const auto action = static_cast<std::uint16_t>(b.action);
                if (action < 1 || action > 4) {
                    throw WireError(WireErrc::FieldRange, "unknown management action");
                }
                w.u16(action);
                w.u64(b.value);
            }
        },
        msg.body);
    return std::move(w.bytes());
}

enum class DecodeView {
    // Honors the SECURITY flag: 32-bit sequenceId and extension fields.
    Native,
    // What a baseline-only implementation sees: 16-bit sequenceId, reserved
    // bytes and trailing extension fields ignored.
    Legacy,
};

inline bool is_extended(std::span<const std::uint8_t> bytes) {
    return bytes.size() > kOffsetFlags && (bytes[kOffsetFlags] & (kFlagSecurity >> 8)) != 0;
}

inline PtpMessage decode(std::span<const std::uint8_t> bytes, DecodeView view = DecodeView::Native) {
    using namespace detail;
    Reader r(bytes);
    PtpMessage msg;
    auto& h = msg.header;

    const std::uint8_t type_nibble = r.u8() & 0x0F;
    switch (type_nibble) {
    case 0x0: case 0x1: case 0x8: case 0x9: case 0xB: case 0xD:
        h.messageType = static_cast<MessageType>(type_nibble);
        break;
    default:
        throw WireError(WireErrc::UnknownMessageType, "messageType " + std::to_string(type_nibble));
    }
    h.version = r.u8() & 0x0F;
    const std::uint16_t length = r.u16();
    h.domainNumber = r.u8();
    r.skip(1);
    h.flagField = r.u16();
    h.correctionField = static_cast<std::int64_t>(r.u64());
    const std::uint16_t seq_high = r.u16();
    r.skip(2);
    h.sourceClockIdentity.octets = r.raw<8>();
    h.sourcePortNumber = r.u16();
    const std::uint16_t seq_low = r.u16();
    r.skip(1);  // controlField, derived from messageType
    h.logMessageInterval = static_cast<std::int8_t>(r.u8());

    const bool ext = view == DecodeView::Native && (h.flagField & kFlagSecurity) != 0;
    const WireMode mode = ext ? WireMode::Extended : WireMode::Baseline;
    h.sequenceId = ext ? (std::uint32_t{seq_high} << 16) | seq_low : seq_low;

    const std::size_t expected = message_size(h.messageType, mode);
    if (view == DecodeView::Native) {
        if (length != expected) {
            throw WireError(WireErrc::BadLengthField, "messageLength " + std::to_string(length) +
                                                          ", expected " + std::to_string(expected));
        }
    } else if (length < expected) {
        throw WireError(WireErrc::BadLengthField, "messageLength " + std::to_string(length) +
                                                      " below baseline " + std::to_string(expected));
    }
    if (bytes.size() < length) {
        throw WireError(WireErrc::Truncated, "have " + std::to_string(bytes.size()) +
                                                 " bytes, messageLength " + std::to_string(length));
    }

    switch (h.messageType) {
    case MessageType::Sync: msg.body = SyncBody{r.timestamp()}; break;
    case MessageType::DelayReq: msg.body = DelayReqBody{r.timestamp()}; break;
    case MessageType::FollowUp: {
        FollowUpBody b;
        b.preciseOriginTimestamp = r.timestamp();
        if (ext) b.signature = r.raw<64>();
        msg.body = b;
        break;
    }
    case MessageType::DelayResp: {
        DelayRespBody b;
        b.receiveTimestamp = r.timestamp();
        b.requestingClockIdentity.octets = r.raw<8>();
        b.requestingPortNumber = r.u16();
        msg.body = b;
        break;
    }
    case MessageType::Announce: {
        AnnounceBody b;
        read_announce_fields(r, b);
        if (ext) {
            b.publicKey = r.raw<32>();
            b.managementSignature = r.raw<64>();
        }
        msg.body = b;
        break;
    }
    case MessageType::MgmtSet: {
        MgmtSetBody b;
        const auto action = r.u16();
        if (action < 1 || action > 4) {
            throw WireError(WireErrc::FieldRange, "unknown management action");
        }
        b.action = static_cast<MgmtAction>(action);
        b.value = r.u64();
        msg.body = b;
        break;
    }
    }
    // The decoded message re-encodes with the same flag state.
    if (ext) h.flagField &= static_cast<std::uint16_t>(~kFlagSecurity);
    return msg;
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    return out;
}

inline Bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0) {
        throw WireError(WireErrc::BadHex, "odd digit count");
    }
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = nibble(hex[i]);
        const int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) {
            throw WireError(WireErrc::BadHex, "non-hex digit at " + std::to_string(i));
        }
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

inline std::string to_string(const ClockIdentity& id) {
    static constexpr char digits[] = "0123456789ABCDEF";
    std::string s;
    for (std::size_t i = 0; i < id.octets.size(); ++i) {
        if (i) s.push_back(':');
        s.push_back(digits[id.octets[i] >> 4]);
        s.push_back(digits[id.octets[i] & 0x0F]);
    }
    return s;
}

}  // namespace ptpsec
