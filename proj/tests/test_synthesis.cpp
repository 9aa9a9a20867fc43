#include <gtest/gtest.h>

#include "netsyn/errors.hpp"
#include "netsyn/synthesis.hpp"
#include "oracles.hpp"

using namespace netsyn;

// ==== Scope ====

TEST(StateFeedback, RejectsOutputFeedbackPlant) {
    Rng rng(41, 0);
    auto g = oracle::random_plant(ring_topology(3), rng);
    EXPECT_THROW(check_state_feedback_scope(g), InvalidArgument);
    EXPECT_THROW(hinf_state_feedback_central(g, ring_topology(3)), InvalidArgument);
    EXPECT_NO_THROW(check_state_feedback_scope(oracle::random_sf_plant(ring_topology(3), rng)));
}

// ==== Template ====

TEST(StateFeedback, TemplateMatchesClosedLoopAdjoint) {
    // Substituting fixed gains into the template reproduces the adjoint of the closed loop.
    Rng rng(42, 0);
    Topology t = ring_topology(3);
    auto g = oracle::random_sf_plant(t, rng);
    auto tm = make_sf_template(g, t);
    StaticGains k;
    for (const auto& s : g.subs) k.local.push_back(oracle::randn(rng, s.nu(), s.nx()));
    for (const auto& e : t.edges()) k.edge[e] = oracle::randn(rng, g.subs[e.first - 1].nu(), g.subs[e.second - 1].nx());
    auto adj = adjoint(close_with_gains(g, t, k));
    for (int i = 0; i < g.n(); ++i) {
        const auto& b = tm.adj.subs[i];
        Mat A = b.A + k.local[i].transpose() * tm.Bu[i].transpose();
        Mat B1 = b.B1 + k.local[i].transpose() * tm.Dzu[i].transpose();
        Mat B2 = b.B2;
        for (const auto& gs : tm.gain_slots[i])
            B2.middleCols(gs.col, gs.dim) += k.edge.at({gs.label, i + 1}).transpose();
        EXPECT_LE((A - adj.subs[i].A).norm(), 1e-12);
        EXPECT_LE((B1 - adj.subs[i].B1).norm(), 1e-12);
        EXPECT_LE((B2 - adj.subs[i].B2).norm(), 1e-12);
        EXPECT_LE((b.C2 - adj.subs[i].C2).norm(), 1e-12);
    }
}

// ==== Synthesis ====

TEST(StateFeedback, CentralCertifiedAndSound) {
    Rng rng(43, 0);
    Topology t = ring_topology(3);
    auto g = oracle::random_sf_plant(t, rng);
    auto r = hinf_state_feedback_central(g, t);
    EXPECT_EQ(r.method, "central");
    EXPECT_LE(r.hinf, r.gamma * (1 + 1e-6));
    EXPECT_LE(r.certified_gamma, r.gamma * (1 + 1e-5));
    EXPECT_EQ(r.stats.nominal_lmis, 1);
    EXPECT_TRUE(is_hurwitz(flatten(close_with_gains(g, t, r.gains)).A));
}

TEST(StateFeedback, NoWorseThanZeroGain) {
    // With a stable open loop, K = 0 is admissible, so synthesis cannot exceed the analysis bound.
    Rng rng(44, 0);
    Topology t = ring_topology(3);
    for (;;) {
        auto g = oracle::random_sf_plant(t, rng);
        StaticGains zero;
        for (const auto& s : g.subs) zero.local.push_back(Mat::Zero(s.nu(), s.nx()));
        auto cl0 = close_with_gains(g, t, zero);
        if (!is_hurwitz(flatten(cl0).A, 0.05)) continue;
        AnalysisOptions ao;
        ao.structure = MultiplierStructure::PerSubsystem;
        const double g0 = fbsp_analysis(adjoint(cl0), ao).gamma;
        auto r = hinf_state_feedback_central(g, t);
        EXPECT_LE(r.gamma, g0 * (1 + 1e-6));
        break;
    }
}

TEST(StateFeedback, DecomposedFlagRejectedForCentral) {
    Rng rng(45, 0);
    auto g = oracle::random_sf_plant(ring_topology(3), rng);
    SynthesisOptions o;
    o.decomposed = true;
    EXPECT_THROW(hinf_state_feedback_central(g, ring_topology(3), o), InvalidArgument);
}
