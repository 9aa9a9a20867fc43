#include <gtest/gtest.h>

#include "netsyn/errors.hpp"
#include "netsyn/sysmodel.hpp"
#include "oracles.hpp"

using namespace netsyn;

namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

Topology hub4() { return Topology::from_edges(4, {{1, 2}, {2, 1}, {2, 3}, {2, 4}, {3, 2}, {4, 2}}); }

ClosedLoopBlock scalar_block(double a, double b1, double b2, double c1, double c2, int label) {
    ClosedLoopBlock b;
    b.A = scalar(a);
    b.B1 = scalar(b1);
    b.B2 = scalar(b2);
    b.C1 = scalar(c1);
    b.C2 = scalar(c2);
    b.D11 = scalar(0.0);
    b.D12 = scalar(0.0);
    b.D21 = scalar(0.0);
    b.D22 = scalar(0.0);
    b.slots = {{label, 1, 1}};
    return b;
}

}  // namespace

// ==== Interconnection matrices ====

TEST(Interconnection, HubExampleLayout) {
    const Topology t = hub4();
    std::vector<EdgeChannel> ch;
    for (const auto& e : t.edges()) ch.push_back({e, 1, 1});
    std::map<Edge, Mat> blocks;
    for (const auto& e : t.edges()) blocks[e] = scalar(1.0);
    Mat P = Mat(assemble_interconnection(4, ch, blocks));
    // rows p12 p21 p23 p24 p32 p42, cols q12 q21 q23 q24 q32 q42
    Mat expect = Mat::Zero(6, 6);
    expect(0, 1) = 1;
    expect(1, 0) = 1;
    expect(2, 4) = 1;
    expect(3, 5) = 1;
    expect(4, 2) = 1;
    expect(5, 3) = 1;
    EXPECT_EQ(P, expect);
}

TEST(Interconnection, HubExampleBlockDims) {
    const Topology t = hub4();
    std::vector<EdgeChannel> ch;
    for (const auto& e : t.edges()) ch.push_back({e, 2, 2});
    std::map<Edge, Mat> blocks;
    Mat b(2, 2);
    b << 1, 2, 3, 4;
    for (const auto& e : t.edges()) blocks[e] = b;
    Mat P = Mat(assemble_interconnection(4, ch, blocks));
    EXPECT_EQ(P.rows(), 12);
    EXPECT_EQ(P.block(4, 8, 2, 2), b);   // P_23 reads q_32
    EXPECT_EQ(P.block(10, 6, 2, 2), b);  // P_42 reads q_24
    EXPECT_DOUBLE_EQ(P.block(0, 0, 2, 2).norm(), 0.0);
}

TEST(Interconnection, TwoNodeIdealAndScaled) {
    std::vector<EdgeChannel> ch{{{1, 2}, 1, 1}, {{2, 1}, 1, 1}};
    Mat ideal = Mat(assemble_interconnection(2, ch, {{{1, 2}, scalar(1)}, {{2, 1}, scalar(1)}}));
    Mat e1(2, 2);
    e1 << 0, 1, 1, 0;
    EXPECT_EQ(ideal, e1);
    Mat half = Mat(assemble_interconnection(2, ch, {{{1, 2}, scalar(0.5)}, {{2, 1}, scalar(1)}}));
    Mat e2(2, 2);
    e2 << 0, 0.5, 1, 0;
    EXPECT_EQ(half, e2);
}

TEST(Interconnection, DimensionMismatchRejected) {
    std::vector<EdgeChannel> ch{{{1, 2}, 1, 1}, {{2, 1}, 1, 1}};
    EXPECT_THROW(assemble_interconnection(2, ch, {{{1, 2}, Mat::Ones(2, 1)}}), InvalidArgument);
}

// ==== Closed loop ====

TEST(CloseLoop, ZeroControllerKeepsPlantBlocks) {
    Rng rng(11, 0);
    Topology t = Topology::from_edges(3, {{1, 2}, {2, 3}, {3, 1}});
    auto g = oracle::random_plant(t, rng);
    StaticGains k;
    std::vector<int> ny, nu;
    for (const auto& s : g.subs) {
        k.local.push_back(Mat::Zero(s.nu(), s.ny()));
        ny.push_back(s.ny());
        nu.push_back(s.nu());
    }
    auto c = static_controller_sender_side(t, k, ny, nu);
    auto cl = close_loop(g, c);
    for (int i = 0; i < g.n(); ++i) {
        EXPECT_EQ(cl.subs[i].A, g.subs[i].A);
        EXPECT_EQ(cl.subs[i].D11, g.subs[i].Dzw);
        EXPECT_EQ(cl.subs[i].B1, g.subs[i].Bw);
    }
}

TEST(CloseLoop, StaticStateFeedbackTopLeft) {
    Rng rng(12, 0);
    Topology t = Topology::from_edges(2, {{1, 2}, {2, 1}});
    std::vector<LocalBlocks> loc(2);
    std::vector<Mat> K;
    for (auto& l : loc) {
        l.A = oracle::randn(rng, 2, 2);
        l.Bu = oracle::randn(rng, 2, 1);
        l.Bw = oracle::randn(rng, 2, 1);
        l.Cy = Mat::Identity(2, 2);
        l.Cz = oracle::randn(rng, 1, 2);
        K.push_back(oracle::randn(rng, 1, 2));
    }
    auto g = realize_edge_form(t, loc, {});
    auto c = static_controller_sender_side(t, {K, {}}, {2, 2}, {1, 1});
    auto cl = close_loop(g, c);
    for (int i = 0; i < 2; ++i) EXPECT_LE((cl.subs[i].A - (loc[i].A + loc[i].Bu * K[i])).norm(), 1e-14);
}

TEST(CloseLoop, MatchesMonolithicClosure) {
    Rng rng(13, 0);
    Topology tg = Topology::from_edges(2, {{1, 2}, {2, 1}});
    Topology tk = Topology::from_edges(2, {{2, 1}});
    double worst = 0.0;
    for (int r = 0; r < 20; ++r) {
        auto g = oracle::random_plant(tg, rng);
        auto k = oracle::random_controller(r % 2 ? tg : tk, g, rng);
        auto cl = close_loop(g, k);
        auto f = oracle::random_freqs(rng, 20);
        worst = std::max(worst, oracle::max_rel_tf_error(flatten(cl), oracle::monolithic_closure(g, k), f));
    }
    EXPECT_LE(worst, 1e-8);
}

TEST(CloseLoop, ControllerEdgesOutsidePlantGraph) {
    Rng rng(14, 0);
    Topology tg = Topology::from_edges(3, {{1, 2}, {2, 3}});
    Topology tk = Topology::from_edges(3, {{3, 1}, {1, 2}, {2, 1}});
    auto g = oracle::random_plant(tg, rng);
    auto k = oracle::random_controller(tk, g, rng);
    auto cl = close_loop(g, k);
    auto f = oracle::random_freqs(rng, 20);
    EXPECT_LE(oracle::max_rel_tf_error(flatten(cl), oracle::monolithic_closure(g, k), f), 1e-8);
    // labels are the union over both graphs
    EXPECT_EQ(cl.subs[0].slots.size(), 2u);
}

TEST(CloseLoop, SenderAndReceiverSideAgree) {
    Rng rng(15, 0);
    Topology t = Topology::from_edges(3, {{1, 2}, {2, 1}, {2, 3}});
    auto g = oracle::random_plant(t, rng, 2, 3);
    StaticGains k;
    for (int i = 0; i < 3; ++i) k.local.push_back(oracle::randn(rng, 2, 3));
    for (const auto& e : t.edges()) k.edge[e] = oracle::randn(rng, 2, 3);
    auto a = close_loop(g, static_controller_sender_side(t, k, {3, 3, 3}, {2, 2, 2}));
    auto b = close_loop(g, static_controller_receiver_side(t, k, {3, 3, 3}, {2, 2, 2}));
    auto f = oracle::random_freqs(rng, 20);
    EXPECT_LE(oracle::max_rel_tf_error(flatten(a), flatten(b), f), 1e-10);
}

TEST(CloseLoop, EdgeGainOutsideControllerGraphRejected) {
    Topology t = Topology::from_edges(2, {{1, 2}});
    StaticGains k{{Mat::Zero(1, 1), Mat::Zero(1, 1)}, {{{2, 1}, Mat::Zero(1, 1)}}};
    EXPECT_THROW(static_controller_sender_side(t, k, {1, 1}, {1, 1}), InvalidArgument);
}

// ==== Flatten / adjoint ====

TEST(Flatten, ZeroInterconnection) {
    ClosedLoopSS cl;
    cl.subs = {scalar_block(-1, 2, 1, 3, 1, 2), scalar_block(-2, 1, 1, 1, 1, 1)};
    cl.P.resize(2, 2);
    auto s = flatten(cl);
    Mat A(2, 2);
    A << -1, 0, 0, -2;
    EXPECT_EQ(s.A, A);
    EXPECT_EQ(s.B(0, 0), 2);
    EXPECT_EQ(s.C(0, 0), 3);
}

TEST(Flatten, HandEliminationTwoNodes) {
    // x1' = -x1 + p1, x2' = -x2 + p2, p1 = q2 = x2, p2 = q1 = x1
    ClosedLoopSS cl;
    cl.subs = {scalar_block(-1, 1, 1, 1, 1, 2), scalar_block(-1, 1, 1, 1, 1, 1)};
    // padding channel on node 1 towards a third label with zero dims
    cl.subs[0].slots.push_back({7, 0, 0});
    Mat P(2, 2);
    P << 0, 1, 1, 0;
    cl.P = P.sparseView();
    auto s = flatten(cl);
    Mat A(2, 2);
    A << -1, 1, 1, -1;
    EXPECT_EQ(s.A, A);
}

TEST(Flatten, DecoupledIndependentOfP) {
    ClosedLoopSS cl;
    cl.subs = {scalar_block(-1, 1, 0, 1, 1, 2), scalar_block(-3, 1, 0, 1, 1, 1)};
    Mat P(2, 2);
    P << 0, 5, -7, 0;
    cl.P = P.sparseView();
    auto a = flatten(cl);
    cl.P.setZero();
    auto b = flatten(cl);
    EXPECT_EQ(a.A, b.A);
    EXPECT_EQ(a.C, b.C);
}

TEST(Flatten, AdjointIsTranspose) {
    Rng rng(16, 0);
    Topology t = Topology::from_edges(3, {{1, 2}, {2, 3}, {3, 1}, {1, 3}});
    auto g = oracle::random_plant(t, rng);
    auto k = oracle::random_controller(t, g, rng);
    auto cl = close_loop(g, k);
    auto fl = flatten(cl);
    auto fa = flatten(adjoint(cl));
    for (double w : oracle::random_freqs(rng, 10)) {
        CMat a = oracle::freq_response(fl, w), b = oracle::freq_response(fa, w);
        EXPECT_LE((a.transpose() - b).norm(), 1e-9 * (1 + a.norm()));
    }
}

// ==== Edge-form realization ====

TEST(Realize, LocalizeRoundTrip) {
    Rng rng(17, 0);
    auto inst = oracle::random_aug_instance(rng);
    auto& g = inst.bar;
    // treat the un-augmented plant as already local: one performance row per subsystem
    GlobalPlant p = g;
    p.Cz = oracle::randn(rng, 4, 8);
    p.Dzu = Mat::Zero(4, 4);
    for (int i = 0; i < 4; ++i) p.Dzu(i, i) = 1.0;
    p.Dzw = oracle::randn(rng, 4, 4);
    p.Bw = oracle::randn(rng, 8, 4);
    p.Dyw = oracle::randn(rng, 8, 4);
    p.nz.assign(4, 1);
    p.nw.assign(4, 1);
    auto sys = localize(p);
    std::vector<Mat> zero(4, Mat::Zero(1, 2));
    auto cl = close_loop(sys, static_controller_sender_side(p.topo, {zero, {}}, p.ny, p.nu));
    auto s = flatten(cl);
    EXPECT_LE((s.A - p.A).norm(), 1e-13);
    EXPECT_LE((s.B - p.Bw).norm(), 1e-13);
    EXPECT_LE((s.C - p.Cz).norm(), 1e-13);
    EXPECT_LE((s.D - p.Dzw).norm(), 1e-13);
}

TEST(Realize, RejectsCouplingOutsideGraph) {
    Rng rng(18, 0);
    auto inst = oracle::random_aug_instance(rng);
    GlobalPlant p = inst.bar;
    p.topo = ring_topology(4);
    p.Cz = Mat::Zero(4, 8);
    p.Dzu = Mat::Zero(4, 4);
    p.Dzw = Mat::Zero(4, 4);
    p.Bw = Mat::Zero(8, 4);
    p.Dyw = Mat::Zero(8, 4);
    p.nz.assign(4, 1);
    p.nw.assign(4, 1);
    EXPECT_THROW(localize(p), InvalidArgument);  // A couples 1 and 3
}

TEST(Realize, RejectsNonLocalInput) {
    Rng rng(19, 0);
    auto inst = oracle::random_aug_instance(rng);
    GlobalPlant p = inst.bar;
    p.Cz = Mat::Zero(4, 8);
    p.Dzu = Mat::Ones(4, 4);
    p.Dzw = Mat::Zero(4, 4);
    p.Bw = Mat::Zero(8, 4);
    p.Dyw = Mat::Zero(8, 4);
    p.nz.assign(4, 1);
    p.nw.assign(4, 1);
    EXPECT_THROW(localize(p), InvalidArgument);
}

// ==== Performance augmentation ====

TEST(Augmentation, IdentityLeavesMatricesUnchanged) {
    Rng rng(20, 0);
    auto inst = oracle::random_aug_instance(rng);
    GlobalPlant p = inst.bar;
    p.Cz = oracle::randn(rng, 8, 8);
    p.Dzu = Mat::Zero(8, 4);
    p.Dzw = Mat::Zero(8, 4);
    p.Bw = oracle::randn(rng, 8, 4);
    p.Dyw = Mat::Zero(8, 4);
    p.nz.assign(4, 2);
    p.nw.assign(4, 1);
    auto a = make_augmentation(Mat::Identity(8, 8), Mat::Identity(4, 4), Mat::Zero(8, 8), Mat::Zero(4, 4));
    auto q = apply_augmentation(p, a);
    EXPECT_LE((q.Cz - p.Cz).norm(), 1e-14);
    EXPECT_LE((q.Bw - p.Bw).norm(), 1e-14);
    EXPECT_LE(a.tl_residual, 1e-14);
}

TEST(Augmentation, SemiOrthogonality) {
    Rng rng(21, 0);
    for (int r = 0; r < 10; ++r) {
        auto inst = oracle::random_aug_instance(rng);
        auto a = make_augmentation(inst.S, inst.T, inst.MQ, inst.MR);
        // recomputed directly from the definitions
        Mat Tl = a.Tl, Tr = a.Tr;
        EXPECT_LE((Tl.transpose() * Tl - Mat::Identity(3, 3)).norm(), 1e-10);
        EXPECT_LE((Tr.transpose() * Tr - Mat::Identity(2, 2)).norm(), 1e-10);
        Eigen::JacobiSVD<Mat> svd(Tl);
        EXPECT_NEAR(svd.singularValues().maxCoeff(), 1.0, 1e-9);
        EXPECT_NEAR(svd.singularValues().minCoeff(), 1.0, 1e-9);
    }
}

TEST(Augmentation, DefaultIsValid) {
    auto a = default_augmentation(5, 2, 1);
    EXPECT_LE(a.tl_residual, 1e-12);
    EXPECT_LE(a.tr_residual, 1e-12);
    EXPECT_EQ(a.S.rows(), 10);
}

TEST(Augmentation, NormInvariance) {
    Rng rng(22, 0);
    for (int r = 0; r < 5; ++r) {
        auto inst = oracle::random_aug_instance(rng);
        auto [sys, aug] = augment_performance(inst.bar, inst.S, inst.T, inst.MQ, inst.MR);
        auto ctrl = static_controller_sender_side(inst.bar.topo, {inst.K, {}}, inst.bar.ny, inst.bar.nu);
        auto aug_loop = flatten(close_loop(sys, ctrl));
        auto bar_loop = oracle::bar_closed_loop(inst);
        double hb = oracle::grid_hinf(bar_loop, 2000), ha = oracle::grid_hinf(aug_loop, 2000);
        EXPECT_LE(std::abs(ha - hb) / hb, 1e-6);
        double h2b = oracle::kron_h2(bar_loop), h2a = oracle::kron_h2(aug_loop);
        EXPECT_LE(std::abs(h2a - h2b) / h2b, 1e-6);
        EXPECT_NEAR(spectral_abscissa(aug_loop.A), spectral_abscissa(bar_loop.A), 1e-9);
    }
}

TEST(Augmentation, RejectsRankDeficientS) {
    Mat S = Mat::Zero(4, 2);
    S(0, 0) = 1;
    S(1, 0) = 1;
    EXPECT_THROW(make_augmentation(S, Mat::Identity(2, 2), Mat::Zero(4, 4), Mat::Zero(2, 2)), InvalidArgument);
}

TEST(Augmentation, RejectsOrthogonalityViolation) {
    Mat S = Mat::Zero(2, 1);
    S(0, 0) = 1;
    Mat MQ = Mat::Identity(2, 2);  // S' MQ S = 1
    EXPECT_THROW(make_augmentation(S, Mat::Identity(1, 1), MQ, Mat::Zero(1, 1)), InvalidArgument);
}

TEST(Augmentation, RejectsSingularWeight) {
    // S' M_Q S = 0 holds but Q-bar is singular without a complement correction
    Mat S = Mat::Zero(2, 1);
    S(0, 0) = 1;
    EXPECT_THROW(make_augmentation(S, Mat::Identity(1, 1), Mat::Zero(2, 2), Mat::Zero(1, 1)), InvalidArgument);
}
