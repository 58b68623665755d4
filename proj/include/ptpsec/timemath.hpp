#pragma once

// Four-timestamp delay/offset arithmetic and the threshold-limited slave
// servo. All time values are integer nanoseconds.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>

#include "ptpsec/wire.hpp"

namespace ptpsec {

class ArithmeticOverflow : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

inline constexpr std::int64_t kNsPerSecond = 1'000'000'000;
inline constexpr std::int64_t kNsPerMs = 1'000'000;

// t1: master send, t2: slave receive, t3: slave send, t4: master receive.
struct ExchangeSample {
    Timestamp t1{};
    Timestamp t2{};
    Timestamp t3{};
    Timestamp t4{};
};

namespace detail {

inline std::int64_t narrow_checked(__int128 v) {
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min()) {
        throw ArithmeticOverflow("timestamp arithmetic exceeds 64-bit nanoseconds");
    }
    return static_cast<std::int64_t>(v);
}

}  // namespace detail

// ((t2 - t1) + (t4 - t3)) / 2, truncated toward zero.
inline std::int64_t compute_delay(const ExchangeSample& s) {
    const __int128 ms = s.t2.to_ns_wide() - s.t1.to_ns_wide();
    const __int128 sm = s.t4.to_ns_wide() - s.t3.to_ns_wide();
    detail::narrow_checked(ms);
    detail::narrow_checked(sm);
    return detail::narrow_checked((ms + sm) / 2);
}

// ((t2 - t1) - (t4 - t3)) / 2, truncated toward zero. Positive means the
// slave clock is ahead of the master.
inline std::int64_t compute_offset(const ExchangeSample& s) {
    const __int128 ms = s.t2.to_ns_wide() - s.t1.to_ns_wide();
    const __int128 sm = s.t4.to_ns_wide() - s.t3.to_ns_wide();
    detail::narrow_checked(ms);
    detail::narrow_checked(sm);
    return detail::narrow_checked((ms - sm) / 2);
}

struct ServoState {
    // Correction accumulated on the local clock, in ns. The disciplined
    // clock reads free-running time plus this value.
    std::int64_t currentOffset = 0;
    double rateAdjust = 0.0;  // ppm, held constant
    double gain = 0.1;
    std::int64_t panicThreshold = kNsPerSecond;
    std::int64_t maxSlewRate = 500'000;  // ns per second of elapsed time
    std::optional<std::int64_t> maxDelayLimit;

    [[nodiscard]] bool valid() const noexcept {
        return gain > 0.0 && gain <= 1.0 && maxSlewRate > 0 && panicThreshold > 0;
    }

    friend bool operator==(const ServoState&, const ServoState&) = default;
};

enum class ServoAction { Step, Slew, RejectDelay };

inline const char* to_string(ServoAction a) {
    switch (a) {
    case ServoAction::Step: return "Step";
    case ServoAction::Slew: return "Slew";
    case ServoAction::RejectDelay: return "RejectDelay";
    }
    return "?";
}

struct ServoResult {
    ServoState state;
    ServoAction action = ServoAction::Slew;
    std::int64_t adjustment = 0;  // applied change to currentOffset
};

inline ServoResult servo_update(const ServoState& state, std::int64_t measuredOffset,
                                std::int64_t measuredDelay, std::int64_t elapsed) {
    if (elapsed <= 0) {
        throw std::invalid_argument("servo_update: elapsed must be positive");
    }
    ServoResult r{state, ServoAction::Slew, 0};
    if (state.maxDelayLimit && measuredDelay > *state.maxDelayLimit) {
        r.action = ServoAction::RejectDelay;
        return r;
    }
    const __int128 magnitude = measuredOffset < 0 ? -static_cast<__int128>(measuredOffset)
                                                  : static_cast<__int128>(measuredOffset);
    if (magnitude > state.panicThreshold) {
        r.action = ServoAction::Step;
        r.adjustment = detail::narrow_checked(-static_cast<__int128>(measuredOffset));
    } else {
        const __int128 cap = static_cast<__int128>(state.maxSlewRate) * elapsed / kNsPerSecond;
        __int128 move = std::llround(state.gain * static_cast<double>(measuredOffset));
        if (move > cap) move = cap;
        if (move < -cap) move = -cap;
        r.adjustment = static_cast<std::int64_t>(-move);
    }
    r.state.currentOffset =
        detail::narrow_checked(static_cast<__int128>(state.currentOffset) + r.adjustment);
    return r;
}

}  // namespace ptpsec
