#include <gtest/gtest.h>

#include "ptpsec/node.hpp"

using namespace ptpsec;

namespace {

constexpr std::int64_t kMs = 1'000'000;
constexpr std::int64_t kSec = 1'000'000'000;

const NetworkAddress kGmAddr = NetworkAddress::ipv4(10, 0, 0, 1);
const NetworkAddress kSlaveAddr = NetworkAddress::ipv4(10, 0, 0, 2);
const NetworkAddress kEveAddr = NetworkAddress::ipv4(10, 0, 0, 66);

const KeyPair& mgmt_keys() {
    static const KeyPair k = KeyPair::from_seed(1);
    return k;
}

NodeConfig gm_config(SecurityMode mode) {
    NodeConfig c;
    c.name = "gm";
    c.address = kGmAddr;
    c.clockQuality.priority1 = 1;
    c.clockQuality.clockClass = 6;
    c.securityMode = mode;
    if (mode == SecurityMode::PublicKey) {
        c.keys = KeyPair::from_seed(2);
        c.certificate = make_certificate(announced_dataset(c), c.keys->publicKey, mgmt_keys());
        c.managementKey = mgmt_keys().publicKey;
    }
    if (mode == SecurityMode::Symmetric) c.groupKey = GroupKey::from_seed(3);
    return c;
}

NodeConfig slave_config(SecurityMode mode) {
    NodeConfig c;
    c.name = "slave1";
    c.address = kSlaveAddr;
    c.masterCapable = false;
    c.securityMode = mode;
    c.initialOffsetNs = 3 * kMs;
    if (mode == SecurityMode::PublicKey) c.managementKey = mgmt_keys().publicKey;
    if (mode == SecurityMode::Symmetric) c.groupKey = GroupKey::from_seed(3);
    return c;
}

// Hand-driven two-node link with a fixed one-way delay.
struct Link {
    Node gm;
    Node slave;
    std::int64_t delay = 50'000;
    std::vector<ReceiveOutcome> last;

    explicit Link(SecurityMode mode) : gm(gm_config(mode), 10), slave(slave_config(mode), 20) {}
    Link(NodeConfig g, NodeConfig s) : gm(std::move(g), 10), slave(std::move(s), 20) {}

    void announce(std::int64_t t) {
        for (const auto& o : gm.announce_tick(t)) slave.receive(o.packet, kGmAddr, t + delay);
    }
    std::vector<Outbound> sync(std::int64_t t) {
        last.clear();
        auto outs = gm.master_tick(t);
        for (const auto& o : outs) last.push_back(slave.receive(o.packet, kGmAddr, t + delay));
        return outs;
    }
    ReceiveOutcome delay_exchange(std::int64_t t) {
        const auto req = slave.slave_delay_cycle(t);
        EXPECT_EQ(req.size(), 1u);
        auto r = gm.receive(req.at(0).packet, kSlaveAddr, t + delay);
        EXPECT_EQ(r.replies.size(), 1u);
        return slave.receive(r.replies.at(0).packet, kGmAddr, t + 2 * delay);
    }
};

PtpMessage forged(MessageType type, std::uint32_t seq, Timestamp ts = {}) {
    PtpHeader h;
    h.sourceClockIdentity = clock_id_from_network(kGmAddr);
    h.sequenceId = seq;
    if (type == MessageType::Sync) return make_message(h, SyncBody{});
    return make_message(h, FollowUpBody{ts, {}});
}

Packet packet_of(const PtpMessage& m, SecurityMode mode) { return Packet{encode(m, wire_mode_for(mode)), {}}; }

}  // namespace

TEST(NodeMaster, PublicKeyTickEmitsSyncAndSignedFollowUp) {
    Node gm(gm_config(SecurityMode::PublicKey), 10);
    const auto out = gm.master_tick(0);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].type, MessageType::Sync);
    EXPECT_EQ(out[0].packet.bytes.size(), 44u);
    EXPECT_EQ(out[1].type, MessageType::FollowUp);
    EXPECT_EQ(out[1].packet.bytes.size(), 108u);
    EXPECT_EQ(out[0].sequenceId, out[1].sequenceId);
    EXPECT_FALSE(out[0].dest);
    const auto fu = decode(out[1].packet.bytes);
    EXPECT_TRUE(verify_followup(fu, gm.config().keys->publicKey));
    EXPECT_EQ(std::get<FollowUpBody>(fu.body).preciseOriginTimestamp.to_ns_wide(), gm.clock_reading(0));
}

TEST(NodeMaster, AnnouncesDifferOnlyInSequenceAndTimestamp) {
    Node gm(gm_config(SecurityMode::PublicKey), 10);
    const auto a = gm.announce_tick(0);
    const auto b = gm.announce_tick(2 * kSec);
    ASSERT_EQ(a.size(), 1u);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(a[0].packet.bytes.size(), 160u);
    auto ma = decode(a[0].packet.bytes);
    auto mb = decode(b[0].packet.bytes);
    EXPECT_EQ(mb.header.sequenceId, (ma.header.sequenceId + 1) & 0xFFFFFFFFu);
    ma.header.sequenceId = mb.header.sequenceId = 0;
    std::get<AnnounceBody>(ma.body).originTimestamp = std::get<AnnounceBody>(mb.body).originTimestamp = {};
    EXPECT_EQ(ma, mb);
    EXPECT_TRUE(verify_certificate(certificate_from_announce(std::get<AnnounceBody>(ma.body)),
                                   mgmt_keys().publicKey));
}

TEST(NodeMaster, SessionCountersIndependentAndSeeded) {
    Node a(gm_config(SecurityMode::Session16), 10);
    Node b(gm_config(SecurityMode::Session16), 10);
    Node c(gm_config(SecurityMode::Session16), 11);
    EXPECT_NE(a.next_sync_sequence(), a.next_announce_sequence());
    EXPECT_EQ(a.next_sync_sequence(), b.next_sync_sequence());
    EXPECT_NE(a.next_sync_sequence(), c.next_sync_sequence());
    const auto s0 = a.next_sync_sequence();
    a.master_tick(0);
    EXPECT_EQ(a.next_sync_sequence(), (s0 + 1) & 0xFFFF);

    Node plain(gm_config(SecurityMode::None), 10);
    EXPECT_EQ(plain.next_sync_sequence(), 0u);
}

TEST(NodeSlave, ConvergesOnGenuineMaster) {
    Link l(SecurityMode::None);
    l.announce(0);
    ASSERT_EQ(l.slave.role(), Role::Slave);
    EXPECT_EQ(l.slave.parent()->masterClockId, l.gm.clock_id());
    for (int i = 1; i <= 60; ++i) {
        const auto t = i * kSec;
        l.sync(t);
        l.delay_exchange(t + 100 * kMs);
        if (i % 2 == 0) l.announce(t + 500 * kMs);
    }
    EXPECT_EQ(l.slave.mean_path_delay(), l.delay);
    EXPECT_LT(std::abs(l.slave.true_offset(61 * kSec)), 10'000);
}

TEST(NodeSlave, NoneModeAcceptsForgedThirtySecondStep) {
    Link l(SecurityMode::None);
    l.announce(0);
    const std::int64_t t = kSec;
    const auto claimed = Timestamp::from_ns(l.gm.clock_reading(t) + 30 * kSec);
    auto r1 = l.slave.receive(packet_of(forged(MessageType::Sync, 77), SecurityMode::None), kEveAddr, t);
    auto r2 = l.slave.receive(packet_of(forged(MessageType::FollowUp, 77, claimed), SecurityMode::None), kEveAddr, t);
    EXPECT_EQ(r1.verdict, Verdict::Accept);
    EXPECT_EQ(r2.verdict, Verdict::Accept);
    EXPECT_EQ(r2.reason, Reason::Step);
    EXPECT_NEAR(static_cast<double>(l.slave.true_offset(t)), 30.0 * kSec, 1e6);
}

TEST(NodeSlave, BindingRejectsForeignSource) {
    Link l(SecurityMode::Binding);
    l.announce(0);
    ASSERT_EQ(l.slave.role(), Role::Slave);
    const auto r = l.slave.receive(packet_of(forged(MessageType::Sync, 1), SecurityMode::Binding), kEveAddr, kSec);
    EXPECT_EQ(r.verdict, Verdict::Drop);
    EXPECT_EQ(r.reason, Reason::BindingMismatch);
    // Spoofed source address passes binding.
    const auto s = l.slave.receive(packet_of(forged(MessageType::Sync, 1), SecurityMode::Binding), kGmAddr, kSec);
    EXPECT_EQ(s.verdict, Verdict::Accept);
}

TEST(NodeSlave, Session16WindowGate) {
    Link l(SecurityMode::Session16);
    l.announce(0);
    l.sync(kSec);
    ASSERT_EQ(l.last[1].verdict, Verdict::Accept);
    const auto next = l.gm.next_sync_sequence();

    const auto far = (next + 1000) & 0xFFFF;
    auto r = l.slave.receive(packet_of(forged(MessageType::Sync, far), SecurityMode::Session16), kGmAddr, 2 * kSec);
    EXPECT_EQ(r.reason, Reason::WindowReject);
    const auto behind = (next - 1) & 0xFFFF;
    r = l.slave.receive(packet_of(forged(MessageType::Sync, behind), SecurityMode::Session16), kGmAddr, 2 * kSec);
    EXPECT_EQ(r.reason, Reason::WindowReject);
    const auto inside = (next + 49) & 0xFFFF;
    r = l.slave.receive(packet_of(forged(MessageType::Sync, inside), SecurityMode::Session16), kGmAddr, 2 * kSec);
    EXPECT_EQ(r.verdict, Verdict::Accept);
    // The window moved past the master's next ID: its genuine SYNC is now rejected.
    l.sync(3 * kSec);
    EXPECT_EQ(l.last[0].reason, Reason::WindowReject);
}

TEST(NodeSlave, ModeMismatchOnBaselinePacket) {
    Link l(SecurityMode::Session32);
    l.announce(0);
    const auto r =
        l.slave.receive(packet_of(forged(MessageType::Sync, 1), SecurityMode::None), kGmAddr, kSec);
    EXPECT_EQ(r.reason, Reason::ModeMismatch);
}

TEST(NodeSlave, DelayRequestResponse) {
    Link l(SecurityMode::Session16);
    l.announce(0);
    l.sync(kSec);
    const auto r = l.delay_exchange(kSec + 100 * kMs);
    EXPECT_EQ(r.verdict, Verdict::Accept);
    EXPECT_EQ(l.slave.mean_path_delay(), l.delay);
}

TEST(NodeSlave, DelayResponseChallenge) {
    Link l(SecurityMode::Session16);
    l.announce(0);
    l.sync(kSec);
    const auto req = l.slave.slave_delay_cycle(kSec + 100 * kMs);
    ASSERT_EQ(req.size(), 1u);
    EXPECT_EQ(*req[0].dest, kGmAddr);
    auto resp = l.gm.receive(req[0].packet, kSlaveAddr, kSec + 100 * kMs + l.delay);
    ASSERT_EQ(resp.replies.size(), 1u);

    // A response echoing a different ID is rejected.
    auto wrong = decode(resp.replies[0].packet.bytes);
    wrong.header.sequenceId = (wrong.header.sequenceId + 1) & 0xFFFF;
    auto r = l.slave.receive(packet_of(wrong, SecurityMode::Session16), kGmAddr, kSec + 200 * kMs);
    EXPECT_EQ(r.reason, Reason::ChallengeMismatch);

    r = l.slave.receive(resp.replies[0].packet, kGmAddr, kSec + 200 * kMs);
    EXPECT_EQ(r.verdict, Verdict::Accept);
    // Replaying the accepted response finds no open challenge.
    r = l.slave.receive(resp.replies[0].packet, kGmAddr, kSec + 300 * kMs);
    EXPECT_EQ(r.reason, Reason::ChallengeMismatch);
}

TEST(NodeSlave, DelayLimitRejects) {
    auto s = slave_config(SecurityMode::None);
    s.servo.maxDelayLimit = 10'000;
    Link l(gm_config(SecurityMode::None), s);
    l.announce(0);
    l.sync(kSec);
    const auto r = l.delay_exchange(kSec + 100 * kMs);
    EXPECT_EQ(r.reason, Reason::RejectDelay);
    EXPECT_FALSE(l.slave.mean_path_delay());
}

TEST(NodeSlave, SymmetricRequiresIcv) {
    Link l(SecurityMode::Symmetric);
    l.announce(0);
    ASSERT_EQ(l.slave.role(), Role::Slave);
    l.sync(kSec);
    EXPECT_EQ(l.last[1].verdict, Verdict::Accept);
    const auto seq = l.gm.next_sync_sequence();
    auto r = l.slave.receive(packet_of(forged(MessageType::Sync, seq), SecurityMode::Symmetric), kGmAddr, 2 * kSec);
    EXPECT_EQ(r.reason, Reason::BadIcv);
    auto bytes = encode(forged(MessageType::Sync, seq), WireMode::Extended);
    Packet tagged{bytes, hmac_tag(bytes, GroupKey::from_seed(99))};
    r = l.slave.receive(tagged, kGmAddr, 2 * kSec);
    EXPECT_EQ(r.reason, Reason::BadIcv);
}

TEST(NodeSlave, PublicKeyRejectsForgedFollowUp) {
    Link l(SecurityMode::PublicKey);
    l.announce(0);
    ASSERT_EQ(l.slave.role(), Role::Slave);
    l.sync(kSec);
    ASSERT_EQ(l.last[1].verdict, Verdict::Accept);

    const auto seq = l.gm.next_sync_sequence();
    const auto ts = Timestamp::from_ns(l.gm.clock_reading(2 * kSec) + 30 * kSec);
    auto r = l.slave.receive(packet_of(forged(MessageType::Sync, seq), SecurityMode::PublicKey), kGmAddr, 2 * kSec);
    EXPECT_EQ(r.reason, Reason::Bookmarked);
    auto fu = forged(MessageType::FollowUp, seq, ts);
    std::get<FollowUpBody>(fu.body).signature = sign_followup(fu, KeyPair::from_seed(666));
    r = l.slave.receive(packet_of(fu, SecurityMode::PublicKey), kGmAddr, 2 * kSec);
    EXPECT_EQ(r.reason, Reason::BadSignature);

    // The unsigned attacker SYNC did not move the window or displace the master.
    l.sync(2 * kSec);
    EXPECT_EQ(l.last[1].verdict, Verdict::Accept);
    EXPECT_LT(std::abs(l.slave.true_offset(2 * kSec)), 4 * kMs);
}

TEST(NodeSlave, PublicKeyReplayIsWindowRejected) {
    Link l(SecurityMode::PublicKey);
    l.announce(0);
    const auto recorded = l.sync(kSec);
    ASSERT_EQ(l.last[1].verdict, Verdict::Accept);
    for (int i = 2; i <= 100; ++i) l.sync(i * kSec);

    const auto replay_fu = decode(recorded[1].packet.bytes);
    EXPECT_TRUE(verify_followup(replay_fu, l.gm.config().keys->publicKey));
    auto r = l.slave.receive(recorded[0].packet, kGmAddr, 200 * kSec);
    EXPECT_EQ(r.verdict, Verdict::Drop);
    EXPECT_EQ(r.reason, Reason::WindowReject);
    r = l.slave.receive(recorded[1].packet, kGmAddr, 200 * kSec);
    EXPECT_EQ(r.verdict, Verdict::Drop);
}

TEST(NodeSlave, PublicKeySelfSignedMasterNotElected) {
    auto rogue = gm_config(SecurityMode::PublicKey);
    rogue.name = "rogue";
    rogue.address = kEveAddr;
    rogue.clockQuality.priority1 = 0;
    rogue.keys = KeyPair::from_seed(666);
    rogue.certificate = make_certificate(announced_dataset(rogue), rogue.keys->publicKey, *rogue.keys);
    Node r(rogue, 5);
    Node slave(slave_config(SecurityMode::PublicKey), 20);
    for (const auto& o : r.announce_tick(0)) {
        EXPECT_EQ(slave.receive(o.packet, kEveAddr, 0).reason, Reason::CertRejected);
    }
    EXPECT_FALSE(slave.parent());
    EXPECT_EQ(slave.verifier()->verifications(), 1u);
}

TEST(NodeSlave, AnnounceTimeoutDropsParent) {
    Link l(SecurityMode::None);
    l.announce(0);
    ASSERT_TRUE(l.slave.parent());
    l.slave.announce_tick(5 * kSec);
    EXPECT_TRUE(l.slave.parent());
    l.slave.announce_tick(7 * kSec);
    EXPECT_FALSE(l.slave.parent());
}

TEST(NodeMgmt, WhitelistGatesSets) {
    auto cfg = gm_config(SecurityMode::None);
    cfg.mgmtWhitelist = std::vector<NetworkAddress>{kGmAddr};
    Node n(cfg, 1);
    PtpHeader h;
    h.sourceClockIdentity = clock_id_from_network(kEveAddr);
    const auto set = make_message(h, MgmtSetBody{MgmtAction::SetPriority1, 0});
    auto r = n.receive(packet_of(set, SecurityMode::None), kEveAddr, 0);
    EXPECT_EQ(r.reason, Reason::NotWhitelisted);
    EXPECT_EQ(n.own_dataset().priority1, 1);
    r = n.receive(packet_of(set, SecurityMode::None), kGmAddr, 0);
    EXPECT_EQ(r.reason, Reason::Applied);
    EXPECT_EQ(n.own_dataset().priority1, 0);

    Node open(gm_config(SecurityMode::None), 1);
    const auto time_set = make_message(h, MgmtSetBody{MgmtAction::SetTime, static_cast<std::uint64_t>(kEpochNs + 1000 * kSec)});
    EXPECT_EQ(open.receive(packet_of(time_set, SecurityMode::None), kEveAddr, 0).reason, Reason::Applied);
    EXPECT_EQ(open.clock_reading(0), kEpochNs + 1000 * kSec);
}

TEST(NodeConfigCheck, ValidationFailures) {
    auto c = gm_config(SecurityMode::PublicKey);
    c.certificate.reset();
    EXPECT_THROW(Node(c, 0), std::invalid_argument);
    auto s = gm_config(SecurityMode::Symmetric);
    s.groupKey.reset();
    EXPECT_THROW(Node(s, 0), std::invalid_argument);
    auto w = gm_config(SecurityMode::Session16);
    w.windowSize = 40000;
    EXPECT_THROW(Node(w, 0), std::invalid_argument);
    auto b = gm_config(SecurityMode::Session16);
    b.idBits = 20;
    EXPECT_THROW(Node(b, 0), std::invalid_argument);
}
