#include <gtest/gtest.h>

#include <cstdlib>

#include "ptpsec/simnet.hpp"

using namespace ptpsec;

namespace {

constexpr std::int64_t kUs = 1'000;
constexpr std::int64_t kMs = 1'000'000;
constexpr std::int64_t kSec = 1'000'000'000;

NodeConfig node(const std::string& name, std::uint8_t host, bool master, SecurityMode mode) {
    NodeConfig c;
    c.name = name;
    c.address = NetworkAddress::ipv4(10, 0, 0, host);
    c.masterCapable = master;
    c.securityMode = mode;
    if (master) {
        c.clockQuality.priority1 = 1;
        c.clockQuality.clockClass = 6;
    } else {
        c.initialOffsetNs = 3 * kMs;
    }
    return c;
}

Scenario two_nodes(SecurityMode mode = SecurityMode::None, std::int64_t jitter = 0) {
    Scenario sc;
    sc.nodes = {node("gm", 1, true, mode), node("slave1", 2, false, mode)};
    sc.defaultLink = LinkModel{50 * kUs, jitter, false};
    sc.horizon = 60 * kSec;
    sc.seed = 7;
    return sc;
}

// Test adversary whose behaviour is given by callbacks.
struct ProbeAttack : Attack {
    std::function<void(AdversaryContext&)> on_start;
    std::function<MitmAction(AdversaryContext&, const ObservedPacket&)> on_tap;
    std::map<std::string, std::int64_t>* seen = nullptr;

    std::string name() const override { return "probe"; }
    void start(AdversaryContext& ctx) override {
        if (on_start) on_start(ctx);
    }
    void on_observe(AdversaryContext&, const ObservedPacket& p) override {
        if (seen && p.message) ++(*seen)[std::string(to_string(p.message->type()))];
    }
    MitmAction intercept(AdversaryContext& ctx, const ObservedPacket& p) override {
        return on_tap ? on_tap(ctx, p) : MitmAction::pass();
    }
    bool succeeded(const MetricsLog&) const override { return false; }
};

void add_adversary(Scenario& sc, AdversaryClass cls, std::function<std::unique_ptr<ProbeAttack>()> make) {
    AdversarySpec a;
    a.name = "eve";
    a.cls = cls;
    a.address = NetworkAddress::ipv4(10, 0, 0, 66);
    a.attack = [make] { return std::unique_ptr<Attack>(make()); };
    sc.adversary = a;
}

std::int64_t final_offset(const MetricsLog& log, const std::string& name) {
    const auto s = log.offset_series(name);
    return s.empty() ? 0 : s.back();
}

}  // namespace

TEST(Simnet, DeterministicForSeed) {
    const auto sc = two_nodes(SecurityMode::None, 2 * kUs);
    const auto a = Simulator(sc).run(30 * kSec, 7);
    const auto b = Simulator(sc).run(30 * kSec, 7);
    ASSERT_EQ(a.offsets.size(), b.offsets.size());
    for (std::size_t i = 0; i < a.offsets.size(); ++i) ASSERT_EQ(a.offsets[i].trueOffset, b.offsets[i].trueOffset);
    ASSERT_EQ(a.verdicts.size(), b.verdicts.size());
    for (std::size_t i = 0; i < a.verdicts.size(); ++i) {
        ASSERT_EQ(a.verdicts[i].time, b.verdicts[i].time);
        ASSERT_EQ(a.verdicts[i].reason, b.verdicts[i].reason);
    }
    const auto c = Simulator(sc).run(30 * kSec, 8);
    EXPECT_NE(a.offsets.back().trueOffset, c.offsets.back().trueOffset);
}

TEST(Simnet, ConvergesWithoutDrift) {
    for (auto mode : {SecurityMode::None, SecurityMode::Session32, SecurityMode::Symmetric, SecurityMode::PublicKey}) {
        const auto log = Simulator(two_nodes(mode)).run(60 * kSec, 7);
        EXPECT_LT(std::abs(final_offset(log, "slave1")), 10 * kUs) << to_string(mode);
        EXPECT_EQ(log.node("slave1")->finalRole, Role::Slave);
        EXPECT_EQ(final_offset(log, "gm"), 0);
    }
}

TEST(Simnet, SampleCadence) {
    const auto log = Simulator(two_nodes()).run(10 * kSec, 7);
    EXPECT_EQ(log.offset_series("slave1").size(), 101u);
    EXPECT_EQ(log.offset_at("slave1", 0), 3 * kMs);
}

TEST(Simnet, AsymmetricPathBiasesByHalfTheDifference) {
    auto sc = two_nodes();
    sc.links.push_back(LinkSpec{"gm", "slave1", LinkModel{150 * kUs, 0, false}});
    const auto log = Simulator(sc).run(120 * kSec, 7);
    // Estimated offset = true offset + (d_ms - d_sm)/2, driven to zero.
    EXPECT_NEAR(static_cast<double>(final_offset(log, "slave1")), -50.0 * kUs, 2.0 * kUs);
}

TEST(Simnet, MitmDelayShiftsHalf) {
    auto sc = two_nodes();
    sc.links.push_back(LinkSpec{"gm", "slave1", LinkModel{50 * kUs, 0, true}});
    add_adversary(sc, AdversaryClass::InBand, [] {
        auto a = std::make_unique<ProbeAttack>();
        a->on_tap = [](AdversaryContext&, const ObservedPacket&) { return MitmAction::delay_by(5 * kMs); };
        return a;
    });
    const auto log = Simulator(sc).run(120 * kSec, 7);
    EXPECT_NEAR(static_cast<double>(final_offset(log, "slave1")), -2.5 * kMs, 2.0 * kUs);
    EXPECT_EQ(log.droppedByAdversary, 0u);
}

TEST(Simnet, PassingTapIsTransparent) {
    auto plain = two_nodes();
    auto tapped = two_nodes();
    tapped.links.push_back(LinkSpec{"gm", "slave1", LinkModel{50 * kUs, 0, true}});
    add_adversary(tapped, AdversaryClass::InBand, [] { return std::make_unique<ProbeAttack>(); });
    const auto a = Simulator(plain).run(20 * kSec, 7);
    const auto b = Simulator(tapped).run(20 * kSec, 7);
    EXPECT_EQ(a.offset_series("slave1"), b.offset_series("slave1"));
}

TEST(Simnet, ModifiedFollowUpFailsSignature) {
    auto sc = two_nodes(SecurityMode::PublicKey);
    sc.links.push_back(LinkSpec{"gm", "slave1", LinkModel{50 * kUs, 0, true}});
    add_adversary(sc, AdversaryClass::InBand, [] {
        auto a = std::make_unique<ProbeAttack>();
        a->on_tap = [](AdversaryContext&, const ObservedPacket& p) {
            if (!p.message || p.message->type() != MessageType::FollowUp) return MitmAction::pass();
            auto m = *p.message;
            auto& ts = std::get<FollowUpBody>(m.body).preciseOriginTimestamp;
            ts.seconds += 30;
            return MitmAction::modify(Packet{encode(m, WireMode::Extended), {}});
        };
        return a;
    });
    const auto log = Simulator(sc).run(30 * kSec, 7);
    std::uint64_t bad = 0;
    for (const auto& v : log.verdicts) {
        if (v.node == "slave1" && v.type == MessageType::FollowUp) {
            EXPECT_EQ(v.verdict, Verdict::Drop);
            bad += v.reason == Reason::BadSignature;
        }
    }
    EXPECT_GT(bad, 20u);
    EXPECT_EQ(final_offset(log, "slave1"), 3 * kMs);  // never corrected, never shifted
}

TEST(Simnet, ApplicativeAdversaryCannotSpoof) {
    auto sc = two_nodes();
    add_adversary(sc, AdversaryClass::OobApplicative, [] {
        auto a = std::make_unique<ProbeAttack>();
        a->on_start = [](AdversaryContext& ctx) {
            ctx.send(Packet{}, std::nullopt, *ctx.address_of("gm"), MessageType::Sync);
        };
        return a;
    });
    EXPECT_THROW(Simulator(sc).run(kSec, 7), CapabilityViolation);
}

TEST(Simnet, OutOfBandSeesNoUnicast) {
    std::map<std::string, std::int64_t> oob_seen, inband_seen;
    for (auto [cls, seen] : {std::pair{AdversaryClass::OobNetwork, &oob_seen},
                             std::pair{AdversaryClass::InBand, &inband_seen}}) {
        auto sc = two_nodes();
        add_adversary(sc, cls, [seen] {
            auto a = std::make_unique<ProbeAttack>();
            a->seen = seen;
            return a;
        });
        Simulator(sc).run(20 * kSec, 7);
    }
    EXPECT_GT(oob_seen["SYNC"], 10);
    EXPECT_GT(oob_seen["ANNOUNCE"], 5);
    EXPECT_EQ(oob_seen["DELAY_REQ"], 0);
    EXPECT_EQ(oob_seen["DELAY_RESP"], 0);
    EXPECT_GT(inband_seen["DELAY_REQ"], 10);
    EXPECT_GT(inband_seen["DELAY_RESP"], 10);
}

TEST(Simnet, TapNeedsInBandAdversary) {
    auto sc = two_nodes();
    sc.links.push_back(LinkSpec{"gm", "slave1", LinkModel{50 * kUs, 0, true}});
    EXPECT_THROW(Simulator(sc).run(kSec, 7), CapabilityViolation);
    add_adversary(sc, AdversaryClass::OobNetwork, [] { return std::make_unique<ProbeAttack>(); });
    EXPECT_THROW(Simulator(sc).run(kSec, 7), CapabilityViolation);
}

TEST(Simnet, GroupKeyOnlyForInsiders) {
    for (auto cls : {AdversaryClass::OobApplicative, AdversaryClass::OobNetwork, AdversaryClass::InBand}) {
        auto sc = two_nodes(SecurityMode::Symmetric);
        add_adversary(sc, cls, [] {
            auto a = std::make_unique<ProbeAttack>();
            a->on_start = [](AdversaryContext& ctx) { (void)ctx.group_key(); };
            return a;
        });
        EXPECT_THROW(Simulator(sc).run(kSec, 7), CapabilityViolation) << to_string(cls);
    }
    auto sc = two_nodes(SecurityMode::Symmetric);
    add_adversary(sc, AdversaryClass::InsiderSlave, [] {
        auto a = std::make_unique<ProbeAttack>();
        a->on_start = [](AdversaryContext& ctx) { (void)ctx.group_key(); };
        return a;
    });
    EXPECT_NO_THROW(Simulator(sc).run(kSec, 7));
}

TEST(Simnet, CapabilityTable) {
    const auto a = AdversaryCapability::of(AdversaryClass::OobApplicative);
    EXPECT_FALSE(a.canSpoofNetAddr || a.seesUnicast || a.canDropModifyDelay || a.holdsGroupKey);
    const auto n = AdversaryCapability::of(AdversaryClass::OobNetwork);
    EXPECT_TRUE(n.canSpoofNetAddr);
    EXPECT_FALSE(n.seesUnicast || n.canDropModifyDelay || n.holdsGroupKey);
    const auto b = AdversaryCapability::of(AdversaryClass::InBand);
    EXPECT_TRUE(b.canSpoofNetAddr && b.seesUnicast && b.canDropModifyDelay);
    EXPECT_FALSE(b.holdsGroupKey);
    const auto i = AdversaryCapability::of(AdversaryClass::InsiderSlave);
    EXPECT_TRUE(i.canSpoofNetAddr && i.seesUnicast && i.canDropModifyDelay && i.holdsGroupKey);
}

TEST(Simnet, DuplicateAddressRejected) {
    auto sc = two_nodes();
    sc.nodes[1].address = sc.nodes[0].address;
    EXPECT_THROW(Simulator(sc).run(kSec, 7), std::invalid_argument);
}
