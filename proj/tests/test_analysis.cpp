#include <gtest/gtest.h>

#include <cmath>

#include "netsyn/analysis.hpp"
#include "netsyn/errors.hpp"
#include "oracles.hpp"

using namespace netsyn;

namespace {

// Random plant over `t` closed with the zero static controller, redrawn until the loop is stable.
ClosedLoopSS stable_random_loop(const Topology& t, Rng& rng) {
    for (;;) {
        auto g = oracle::random_plant(t, rng);
        StaticGains k;
        std::vector<int> ny, nu;
        for (const auto& s : g.subs) {
            k.local.push_back(Mat::Zero(s.nu(), s.ny()));
            ny.push_back(s.ny());
            nu.push_back(s.nu());
        }
        auto cl = close_loop(g, static_controller_sender_side(t, k, ny, nu));
        if (is_hurwitz(flatten(cl).A, 0.05)) return cl;
    }
}

ClosedLoopSS single_block(const StateSpace& s) {
    ClosedLoopSS cl;
    ClosedLoopBlock b;
    b.A = s.A;
    b.B1 = s.B;
    b.C1 = s.C;
    b.D11 = s.D;
    b.B2 = Mat::Zero(s.A.rows(), 0);
    b.C2 = Mat::Zero(0, s.A.rows());
    b.D12 = Mat::Zero(s.C.rows(), 0);
    b.D21 = Mat::Zero(0, s.B.cols());
    b.D22 = Mat::Zero(0, 0);
    cl.subs.push_back(b);
    cl.P.resize(0, 0);
    return cl;
}

}  // namespace

// ==== Norms ====

TEST(HinfNorm, FirstOrderLag) {
    StateSpace s{-Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Zero(1, 1)};
    EXPECT_NEAR(hinf_norm(s), 1.0, 1e-9);
}

TEST(HinfNorm, FeedthroughOnly) {
    StateSpace s{Mat::Zero(0, 0), Mat::Zero(0, 1), Mat::Zero(1, 0), 2.0 * Mat::Ones(1, 1)};
    EXPECT_DOUBLE_EQ(hinf_norm(s), 2.0);
}

TEST(HinfNorm, LightlyDampedPeak) {
    // 1 / (s^2 + 2 z w s + w^2) with w = 3, z = 0.01: peak 1 / (2 z sqrt(1 - z^2) w^2)
    const double w = 3.0, z = 0.01;
    Mat A(2, 2);
    A << 0, 1, -w * w, -2 * z * w;
    StateSpace s{A, Mat(Eigen::Vector2d(0, 1)), Mat(Eigen::RowVector2d(1, 0)), Mat::Zero(1, 1)};
    EXPECT_NEAR(hinf_norm(s), 1.0 / (2 * z * std::sqrt(1 - z * z) * w * w), 1e-7);
}

TEST(HinfNorm, MatchesFrequencyGrid) {
    Rng rng(31, 0);
    for (int r = 0; r < 5; ++r) {
        auto s = oracle::random_stable(rng, 6, 2, 3);
        double h = hinf_norm(s), g = oracle::grid_hinf(s);
        EXPECT_GE(h, g * (1 - 1e-9));
        EXPECT_LE(h, g * (1 + 1e-4));
    }
}

TEST(HinfNorm, UnstableFlagged) {
    StateSpace s{Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Zero(1, 1)};
    EXPECT_TRUE(std::isinf(hinf_norm(s)));
}

TEST(H2Norm, MatchesKroneckerOracle) {
    Rng rng(32, 0);
    for (int r = 0; r < 5; ++r) {
        auto s = oracle::random_stable(rng, 5, 2, 2, false);
        EXPECT_NEAR(h2_norm(s), oracle::kron_h2(s), 1e-9 * oracle::kron_h2(s));
    }
    StateSpace lag{-Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Zero(1, 1)};
    EXPECT_NEAR(h2_norm(lag), std::sqrt(0.5), 1e-12);
}

// ==== FBSP ====

TEST(Fbsp, BoundedRealCollapse) {
    Rng rng(33, 0);
    for (int r = 0; r < 3; ++r) {
        auto s = oracle::random_stable(rng, 3, 2, 2);
        auto res = fbsp_analysis(single_block(s));
        EXPECT_LE(std::abs(res.gamma - res.hinf) / res.hinf, 1e-4);
    }
}

TEST(Fbsp, TwoSubsystemUpperBound) {
    Rng rng(34, 0);
    Topology t = Topology::from_edges(2, {{1, 2}, {2, 1}});
    auto cl = stable_random_loop(t, rng);
    auto res = fbsp_analysis(cl);
    EXPECT_GE(res.gamma, res.hinf * (1 - 1e-6));
    RecordProperty("gap", std::to_string(res.gamma / res.hinf));
}

TEST(Fbsp, StructureMonotone) {
    Rng rng(35, 0);
    Topology t = ring_topology(3);
    for (int r = 0; r < 2; ++r) {
        auto cl = stable_random_loop(t, rng);
        AnalysisOptions full, sub;
        sub.structure = MultiplierStructure::PerSubsystem;
        auto a = fbsp_analysis(cl, full);
        auto b = fbsp_analysis(cl, sub);
        EXPECT_LE(b.gamma, a.gamma + 1e-6);
        AnalysisOptions dec = full;
        dec.decomposed = true;
        auto c = fbsp_analysis(cl, dec);
        EXPECT_NEAR(c.gamma, a.gamma, 1e-5 * a.gamma);
    }
}

TEST(Fbsp, IdenticalNeverBeatsPerEdge) {
    Rng rng(36, 0);
    // homogeneous 1-dim channels so identical multipliers are well defined
    Topology t = ring_topology(3);
    ClosedLoopSS cl;
    for (int i = 0; i < 3; ++i) {
        ClosedLoopBlock b;
        b.A = -Mat::Identity(2, 2) + oracle::randn(rng, 2, 2, 0.2);
        b.B1 = oracle::randn(rng, 2, 1);
        b.C1 = oracle::randn(rng, 1, 2);
        b.D11 = Mat::Zero(1, 1);
        b.B2 = oracle::randn(rng, 2, 2, 0.3);
        b.C2 = oracle::randn(rng, 2, 2, 0.3);
        b.D12 = Mat::Zero(1, 2);
        b.D21 = Mat::Zero(2, 1);
        b.D22 = Mat::Zero(2, 2);
        b.slots = {{i == 0 ? 2 : 1, 1, 1}, {i == 2 ? 2 : 3, 1, 1}};
        cl.subs.push_back(b);
    }
    std::map<Edge, Mat> blocks;
    for (const auto& e : t.edges()) blocks[e] = Mat::Ones(1, 1);
    cl.P = assemble_interconnection(cl.layout(), blocks);
    AnalysisOptions a, b;
    b.structure = MultiplierStructure::IdenticalAcrossEdges;
    EXPECT_LE(fbsp_analysis(cl, a).gamma, fbsp_analysis(cl, b).gamma + 1e-6);
}

TEST(Fbsp, UnstableLoopInfeasible) {
    StateSpace s{Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Ones(1, 1), Mat::Zero(1, 1)};
    EXPECT_THROW(fbsp_analysis(single_block(s)), Infeasible);
}

TEST(Fbsp, CertificatePassesRecheck) {
    Rng rng(37, 0);
    Topology t = Topology::from_edges(3, {{1, 2}, {2, 3}, {3, 1}});
    auto cl = stable_random_loop(t, rng);
    auto ap = build_analysis_program(cl, MultiplierStructure::FullPerEdge, false, 1e-7);
    auto sol = solve(ap.prog);
    ASSERT_EQ(sol.status, SolveStatus::Optimal);
    EXPECT_TRUE(check_feasible(ap.prog, sol.y, 1e-8).feasible);
    EXPECT_LE(hinf_norm(flatten(cl)), sol.y(ap.level) * (1 + 1e-6));
    EXPECT_EQ(ap.prog.count("nominal"), 1);
    EXPECT_EQ(ap.prog.count("multiplier"), 1);
}
