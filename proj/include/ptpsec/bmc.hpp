#pragma once

// Best-master-clock dataset comparison and election.

#include <compare>
#include <cstdint>
#include <optional>
#include <tuple>
#include <vector>

#include "ptpsec/identity.hpp"
#include "ptpsec/wire.hpp"

namespace ptpsec {

enum class CertState { Unverified, Verified, Rejected };

struct ForeignMasterRecord {
    AnnounceBody announce{};
    ClockIdentity sourceClockId{};
    NetworkAddress sourceAddr{};
    std::int64_t lastSeen = 0;  // sim-time ns
    CertState certState = CertState::Unverified;
};

// Lower dataset wins: the result is `less` when a is the better clock.
// Clock identity breaks every tie, so this is a strict total order on
// distinct identities.
inline std::strong_ordering bmc_compare(const AnnounceBody& a, const AnnounceBody& b) {
    auto key = [](const AnnounceBody& x) {
        return std::tie(x.priority1, x.clockClass, x.clockAccuracy, x.offsetScaledLogVariance,
                        x.priority2, x.grandmasterIdentity);
    };
    return key(a) <=> key(b);
}

enum class Role { Master, Slave };

struct ElectionResult {
    Role role = Role::Master;
    std::optional<ClockIdentity> chosenMaster;  // empty when self wins
    std::optional<std::size_t> recordIndex;

    friend bool operator==(const ElectionResult&, const ElectionResult&) = default;
};

// records must already be filtered for staleness. With requireCerts only
// Verified records compete. A node that is not master-capable passes no
// own dataset and ends up Slave whenever any record is eligible.
inline ElectionResult run_election(const std::vector<ForeignMasterRecord>& records,
                                   const std::optional<AnnounceBody>& own, bool requireCerts) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (requireCerts && r.certState != CertState::Verified) continue;
        if (!best || bmc_compare(r.announce, records[*best].announce) == std::strong_ordering::less) {
            best = i;
        }
    }
    if (!best) {
        return ElectionResult{own ? Role::Master : Role::Slave, std::nullopt, std::nullopt};
    }
    if (own && bmc_compare(*own, records[*best].announce) == std::strong_ordering::less) {
        return ElectionResult{Role::Master, std::nullopt, std::nullopt};
    }
    return ElectionResult{Role::Slave, records[*best].sourceClockId, best};
}

}  // namespace ptpsec
