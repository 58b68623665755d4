#pragma once

// Cryptographic layer: management-signed master certificates carried in
// ANNOUNCE, signed FOLLOW_UP, and the shared group-key HMAC used as the
// symmetric baseline. Signatures are Ed25519 (libsodium).

#include <sodium.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "ptpsec/session.hpp"
#include "ptpsec/wire.hpp"

namespace ptpsec {

static_assert(crypto_sign_PUBLICKEYBYTES == 32);
static_assert(crypto_sign_BYTES == 64);

inline void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
        return true;
    }();
    (void)ready;
}

struct KeyPair {
    PublicKey publicKey{};
    std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> privateKey{};

    // Deterministic key pair; scenario seeds make runs reproducible.
    static KeyPair from_seed(std::uint64_t seed) {
        ensure_sodium();
        std::array<std::uint8_t, crypto_sign_SEEDBYTES> material{};
        for (std::size_t i = 0; i < material.size(); i += 8) {
            const auto word = stream_seed(seed, 0x6b6579, i);
            for (std::size_t j = 0; j < 8; ++j) material[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
        }
        KeyPair kp;
        crypto_sign_seed_keypair(kp.publicKey.data(), kp.privateKey.data(), material.data());
        return kp;
    }

    [[nodiscard]] Signature sign(std::span<const std::uint8_t> message) const {
        Signature sig{};
        crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), privateKey.data());
        return sig;
    }
};

inline bool verify_signature(std::span<const std::uint8_t> message, const Signature& sig,
                             const PublicKey& pub) {
    ensure_sodium();
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), pub.data()) == 0;
}

struct MasterCertificate {
    AnnounceBody announceFields{};  // volatile fields zeroed
    PublicKey masterPublicKey{};
    Signature managementSignature{};

    friend bool operator==(const MasterCertificate&, const MasterCertificate&) = default;
};

// originTimestamp and stepsRemoved are zeroed (reserved is always zero on
// the wire); the master key is folded in and the signature slot cleared.
inline AnnounceBody canonical_announce(const AnnounceBody& body, const PublicKey& masterPub) {
    AnnounceBody c = body;
    c.originTimestamp = Timestamp{};
    c.stepsRemoved = 0;
    c.publicKey = masterPub;
    c.managementSignature = Signature{};
    return c;
}

inline Bytes certificate_signed_bytes(const MasterCertificate& cert) {
    return encode_announce_body(canonical_announce(cert.announceFields, cert.masterPublicKey), true);
}

inline MasterCertificate make_certificate(const AnnounceBody& body, const PublicKey& masterPub,
                                          const KeyPair& mgmt) {
    MasterCertificate cert;
    cert.announceFields = canonical_announce(body, masterPub);
    cert.announceFields.publicKey = PublicKey{};
    cert.masterPublicKey = masterPub;
    cert.managementSignature = mgmt.sign(certificate_signed_bytes(cert));
    return cert;
}

inline bool verify_certificate(const MasterCertificate& cert, const PublicKey& mgmtPub) {
    return verify_signature(certificate_signed_bytes(cert), cert.managementSignature, mgmtPub);
}

// Announce body as transmitted: dataset plus the certificate extension.
inline AnnounceBody attach_certificate(AnnounceBody body, const MasterCertificate& cert) {
    body.publicKey = cert.masterPublicKey;
    body.managementSignature = cert.managementSignature;
    return body;
}

inline MasterCertificate certificate_from_announce(const AnnounceBody& body) {
    MasterCertificate cert;
    cert.announceFields = canonical_announce(body, PublicKey{});
    cert.masterPublicKey = body.publicKey;
    cert.managementSignature = body.managementSignature;
    return cert;
}

// Verifies each sender's certificate once and afterwards only compares
// bytes; any change in the certificate triggers a fresh verification.
class CertificateVerifier {
public:
    explicit CertificateVerifier(PublicKey mgmtPub) : mgmt_pub_(mgmtPub) {}

    bool verify(const ClockIdentity& sender, const MasterCertificate& cert) {
        auto it = cache_.find(sender);
        if (it != cache_.end() && it->second.cert == cert) {
            ++cache_hits_;
            return it->second.valid;
        }
        ++verifications_;
        const bool ok = verify_certificate(cert, mgmt_pub_);
        cache_[sender] = Entry{cert, ok};
        return ok;
    }

    [[nodiscard]] std::uint64_t verifications() const noexcept { return verifications_; }
    [[nodiscard]] std::uint64_t cache_hits() const noexcept { return cache_hits_; }
    [[nodiscard]] const PublicKey& management_key() const noexcept { return mgmt_pub_; }

private:
    struct Entry {
        MasterCertificate cert;
        bool valid = false;
    };

    PublicKey mgmt_pub_;
    std::map<ClockIdentity, Entry> cache_;
    std::uint64_t verifications_ = 0;
    std::uint64_t cache_hits_ = 0;
};

// Signed image: the whole extended FOLLOW_UP with the signature zero-filled.
inline Bytes followup_signed_bytes(const PtpMessage& msg) {
    if (msg.type() != MessageType::FollowUp) {
        throw std::invalid_argument("followup_signed_bytes: not a FOLLOW_UP");
    }
    PtpMessage canonical = msg;
    std::get<FollowUpBody>(canonical.body).signature = Signature{};
    return encode(canonical, WireMode::Extended);
}

inline Signature sign_followup(const PtpMessage& msg, const KeyPair& master) {
    return master.sign(followup_signed_bytes(msg));
}

inline bool verify_followup(const PtpMessage& msg, const PublicKey& masterPub) {
    if (msg.type() != MessageType::FollowUp) return false;
    return verify_signature(followup_signed_bytes(msg), std::get<FollowUpBody>(msg.body).signature,
                            masterPub);
}

struct GroupKey {
    std::array<std::uint8_t, 32> secret{};

    static GroupKey from_seed(std::uint64_t seed) {
        GroupKey k;
        for (std::size_t i = 0; i < k.secret.size(); i += 8) {
            const auto word = stream_seed(seed, 0x67726f7570, i);
            for (std::size_t j = 0; j < 8; ++j) k.secret[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
        }
        return k;
    }

    friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

using HmacTag = std::array<std::uint8_t, crypto_auth_hmacsha256_BYTES>;

// HMAC-SHA256 over the encoded message. Nothing ties the tag to the claimed
// source: any key holder can tag a message for any identity.
inline HmacTag hmac_tag(std::span<const std::uint8_t> msg, const GroupKey& key) {
    ensure_sodium();
    HmacTag tag{};
    crypto_auth_hmacsha256(tag.data(), msg.data(), msg.size(), key.secret.data());
    return tag;
}

inline bool hmac_check(std::span<const std::uint8_t> msg, const HmacTag& tag, const GroupKey& key) {
    ensure_sodium();
    return crypto_auth_hmacsha256_verify(tag.data(), msg.data(), msg.size(), key.secret.data()) == 0;
}

struct CryptoBenchmark {
    std::int64_t signMedianNs = 0;
    std::int64_t verifyMedianNs = 0;
    std::size_t iterations = 0;
};

// Wall-clock medians of signing and verifying a 44-byte FOLLOW_UP image.
inline CryptoBenchmark benchmark_crypto(std::size_t iterations) {
    if (iterations < 100) {
        throw std::invalid_argument("benchmark_crypto: at least 100 iterations required");
    }
    using Clock = std::chrono::steady_clock;
    const KeyPair key = KeyPair::from_seed(0xBE7C);
    PtpHeader h;
    h.sequenceId = 1;
    auto msg = make_message(h, FollowUpBody{Timestamp{1'600'000'000, 123}, {}});
    Bytes payload = encode(msg, WireMode::Baseline);

    std::vector<std::int64_t> sign_ns(iterations), verify_ns(iterations);
    Signature sig{};
    for (std::size_t i = 0; i < iterations; ++i) {
        payload[kOffsetSeqIdLow + 1] = static_cast<std::uint8_t>(i);
        const auto t0 = Clock::now();
        sig = key.sign(payload);
        const auto t1 = Clock::now();
        const bool ok = verify_signature(payload, sig, key.publicKey);
        const auto t2 = Clock::now();
        if (!ok) throw std::runtime_error("benchmark_crypto: self-verification failed");
        sign_ns[i] = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
        verify_ns[i] = std::chrono::duration_cast<std::chrono::nanoseconds>(t2 - t1).count();
    }
    auto median = [](std::vector<std::int64_t>& v) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    return CryptoBenchmark{median(sign_ns), median(verify_ns), iterations};
}

}  // namespace ptpsec
