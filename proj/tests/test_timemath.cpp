#include <gtest/gtest.h>

#include <random>

#include "ptpsec/timemath.hpp"

using namespace ptpsec;

namespace {

ExchangeSample ns_sample(std::int64_t t1, std::int64_t t2, std::int64_t t3, std::int64_t t4) {
    return {Timestamp::from_ns(t1), Timestamp::from_ns(t2), Timestamp::from_ns(t3), Timestamp::from_ns(t4)};
}

}  // namespace

TEST(ComputeDelay, HandWorkedCases) {
    EXPECT_EQ(compute_delay(ns_sample(0, 6, 10, 14)), 5);
    EXPECT_EQ(compute_delay(ns_sample(100, 150, 200, 230)), 40);
    EXPECT_EQ(compute_delay(ns_sample(77, 77, 77, 77)), 0);
}

TEST(ComputeOffset, HandWorkedCases) {
    EXPECT_EQ(compute_offset(ns_sample(100, 150, 200, 230)), 10);
    // Built from ground truth o = 7, d = 5: t2 = t1 + d + o, t4 = t3 + d - o.
    EXPECT_EQ(compute_offset(ns_sample(0, 12, 20, 18)), 7);
    EXPECT_EQ(compute_delay(ns_sample(0, 12, 20, 18)), 5);
    // (0, 12, 20, 25) is not such a sample: it gives offset 3, delay 8.
    EXPECT_EQ(compute_offset(ns_sample(0, 12, 20, 25)), 3);
    EXPECT_EQ(compute_delay(ns_sample(0, 12, 20, 25)), 8);
    EXPECT_EQ(compute_offset(ns_sample(77, 77, 77, 77)), 0);
}

TEST(ComputeOffset, TruncatesTowardZero) {
    // ms = 3, sm = 0 -> offset 1.5 -> 1; ms = 0, sm = 3 -> -1.5 -> -1
    EXPECT_EQ(compute_offset(ns_sample(0, 3, 10, 10)), 1);
    EXPECT_EQ(compute_offset(ns_sample(0, 0, 10, 13)), -1);
}

// Ground truth (offset o, delay d) -> timestamps -> recovered exactly.
TEST(ComputeOffset, InversionProperty) {
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<std::int64_t> off(-5'000'000'000LL, 5'000'000'000LL);
    std::uniform_int_distribution<std::int64_t> del(0, 1'000'000'000LL);
    std::uniform_int_distribution<std::int64_t> base(10'000'000'000LL, 4'000'000'000'000'000'000LL);
    for (int i = 0; i < 20000; ++i) {
        const auto o = off(rng), d = del(rng), t1 = base(rng), t3 = t1 + del(rng);
        const auto s = ns_sample(t1, t1 + d + o, t3, t3 + d - o);
        ASSERT_EQ(compute_delay(s), d);
        ASSERT_EQ(compute_offset(s), o);
    }
}

TEST(ComputeDelay, OverflowIsReported) {
    ExchangeSample s{{0, 0}, {Timestamp::kMaxSeconds, 0}, {0, 0}, {0, 0}};
    EXPECT_THROW(compute_delay(s), ArithmeticOverflow);
    EXPECT_THROW(compute_offset(s), ArithmeticOverflow);
}

TEST(Servo, PanicThresholdSteps) {
    ServoState s;
    const auto r = servo_update(s, 30 * kNsPerSecond, 0, kNsPerSecond);
    EXPECT_EQ(r.action, ServoAction::Step);
    EXPECT_EQ(r.adjustment, -30 * kNsPerSecond);
    EXPECT_EQ(r.state.currentOffset, -30 * kNsPerSecond);
}

TEST(Servo, SlewIsCappedPerElapsedSecond) {
    ServoState s;
    auto r = servo_update(s, 800 * kNsPerMs, 0, kNsPerSecond);
    EXPECT_EQ(r.action, ServoAction::Slew);
    EXPECT_EQ(r.adjustment, -500'000);
    r = servo_update(s, -800 * kNsPerMs, 0, 2 * kNsPerSecond);
    EXPECT_EQ(r.adjustment, 1'000'000);
    // Below the cap the proportional term applies unchanged.
    r = servo_update(s, 1'000'000, 0, kNsPerSecond);
    EXPECT_EQ(r.adjustment, -100'000);
}

TEST(Servo, ZeroOffsetIsFixedPoint) {
    ServoState s;
    s.currentOffset = 1234;
    const auto r = servo_update(s, 0, 500, kNsPerSecond);
    EXPECT_EQ(r.action, ServoAction::Slew);
    EXPECT_EQ(r.adjustment, 0);
    EXPECT_EQ(r.state, s);
}

TEST(Servo, DelayLimitRejectsWithoutTouchingState) {
    ServoState s;
    s.maxDelayLimit = 1'000'000;
    const auto r = servo_update(s, 50 * kNsPerSecond, 1'000'001, kNsPerSecond);
    EXPECT_EQ(r.action, ServoAction::RejectDelay);
    EXPECT_EQ(r.state, s);
    EXPECT_EQ(servo_update(s, 10, 1'000'000, kNsPerSecond).action, ServoAction::Slew);
}

TEST(Servo, ElapsedMustBePositive) {
    EXPECT_THROW(servo_update(ServoState{}, 1, 0, 0), std::invalid_argument);
    EXPECT_THROW(servo_update(ServoState{}, 1, 0, -5), std::invalid_argument);
}

TEST(Servo, ThresholdBoundaryIsInclusiveSlew) {
    ServoState s;
    EXPECT_EQ(servo_update(s, kNsPerSecond, 0, kNsPerSecond).action, ServoAction::Slew);
    EXPECT_EQ(servo_update(s, -kNsPerSecond - 1, 0, kNsPerSecond).action, ServoAction::Step);
}
