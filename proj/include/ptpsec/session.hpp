#pragma once

// Sequence-ID session semantics: randomized per-type counters, the
// advance-on-accept receive window, and delay-request challenges.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>

#include "ptpsec/wire.hpp"

namespace ptpsec {

// Width of the sequence ID space. 16 and 32 are the protocol widths; smaller
// widths exist so the snatching cost formulas can be measured exhaustively.
struct IdSpace {
    unsigned bits = 16;

    static constexpr IdSpace bits16() { return IdSpace{16}; }
    static constexpr IdSpace bits32() { return IdSpace{32}; }

    [[nodiscard]] constexpr std::uint64_t size() const noexcept { return std::uint64_t{1} << bits; }
    [[nodiscard]] constexpr std::uint32_t mask() const noexcept {
        return static_cast<std::uint32_t>(size() - 1);
    }
    [[nodiscard]] constexpr bool valid() const noexcept { return bits >= 2 && bits <= 32; }

    friend constexpr bool operator==(IdSpace, IdSpace) = default;
};

// SplitMix64 finalizer; derives independent stream seeds from one base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return mix_seed(mix_seed(mix_seed(base) ^ a) ^ b);
}

// Uniform starting counter for one (master, message type) stream.
inline std::uint32_t init_counter(std::uint64_t seed, IdSpace space = IdSpace::bits16()) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> dist(0, space.size() - 1);
    return static_cast<std::uint32_t>(dist(rng));
}

struct SequenceWindow {
    std::uint32_t expected = 0;  // next acceptable ID
    std::uint32_t size = 50;
    IdSpace space = IdSpace::bits16();

    [[nodiscard]] bool valid() const noexcept {
        return space.valid() && size >= 1 && size <= space.size() / 2 && expected <= space.mask();
    }

    // Forward modular distance from expected; accepted iff below size.
    [[nodiscard]] std::uint32_t distance(std::uint32_t received) const noexcept {
        return (received - expected) & space.mask();
    }

    [[nodiscard]] bool contains(std::uint32_t received) const noexcept {
        return received <= space.mask() && distance(received) < size;
    }

    friend bool operator==(const SequenceWindow&, const SequenceWindow&) = default;
};

struct WindowVerdict {
    bool accepted = false;
    SequenceWindow window;
};

// Accepts received in [expected, expected + size - 1] modulo the ID space
// and advances expected past it. Rejection leaves the window unchanged.
inline WindowVerdict window_accept(const SequenceWindow& win, std::uint32_t received) {
    if (!win.contains(received)) {
        return {false, win};
    }
    SequenceWindow next = win;
    next.expected = (received + 1) & win.space.mask();
    return {true, next};
}

class ChallengeState {
public:
    explicit ChallengeState(IdSpace space = IdSpace::bits16()) : space_(space) {}

    // Records and returns a fresh uniform ID for the type, replacing any
    // earlier outstanding challenge of that type.
    template <typename Rng>
    std::uint32_t issue(MessageType type, Rng& rng) {
        std::uniform_int_distribution<std::uint64_t> dist(0, space_.size() - 1);
        const auto id = static_cast<std::uint32_t>(dist(rng));
        outstanding_[type] = id;
        return id;
    }

    // Records a caller-chosen ID (the predictable counter of the unhardened
    // protocol).
    void issue_fixed(MessageType type, std::uint32_t id) { outstanding_[type] = id & space_.mask(); }

    // Accepts iff the echo matches the outstanding challenge; clears it on
    // acceptance.
    bool check(MessageType type, std::uint32_t echoed) {
        const auto it = outstanding_.find(type);
        if (it == outstanding_.end() || it->second != echoed) return false;
        outstanding_.erase(it);
        return true;
    }

    [[nodiscard]] std::optional<std::uint32_t> outstanding(MessageType type) const {
        const auto it = outstanding_.find(type);
        if (it == outstanding_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] IdSpace space() const noexcept { return space_; }

private:
    IdSpace space_;
    std::map<MessageType, std::uint32_t> outstanding_;
};

template <typename Rng>
std::uint32_t issue_challenge(ChallengeState& state, MessageType type, Rng& rng) {
    return state.issue(type, rng);
}

inline bool check_challenge(ChallengeState& state, MessageType type, std::uint32_t echoed) {
    return state.check(type, echoed);
}

}  // namespace ptpsec
