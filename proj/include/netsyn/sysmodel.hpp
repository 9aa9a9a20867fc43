#pragma once

#include <map>
#include <utility>
#include <vector>

#include "netsyn/graph.hpp"
#include "netsyn/linalg.hpp"

namespace netsyn {

// ==== Channels ====
// One interconnection slot of a subsystem. In edge form the label is the neighbor index k and the
// slot carries p_ik (incoming) and q_ik (outgoing); in compressed form the label is a class index.
// A zero dimension marks a padding channel.
struct Slot {
    int label = 0;
    int dim_p = 0;
    int dim_q = 0;
};

struct ChannelLayout {
    std::vector<std::vector<Slot>> slots;  // per subsystem
    std::vector<int> p_off, q_off;         // per subsystem, size N+1
    int n_p() const { return p_off.back(); }
    int n_q() const { return q_off.back(); }
    // Offsets of slot s of subsystem i inside the stacked p (resp. q).
    int p_at(int i, int s) const;
    int q_at(int i, int s) const;
    int find(int i, int label) const;  // slot index or -1

    static ChannelLayout from_slots(std::vector<std::vector<Slot>> slots);
};

// Edge form, subsystem i, neighbors of sym(topo): p_ik sized by dim_p(i,k), q_ik by dim_q(i,k).
struct EdgeChannel {
    Edge edge;
    int dim_in = 0;   // n_{p_ik}
    int dim_out = 0;  // n_{q_ik}
};

// Sparse matrix with block (p_ik rows, q_ki cols) = P_ik; everything else zero.
SpMat assemble_interconnection(const ChannelLayout& layout, const std::map<Edge, Mat>& blocks);
SpMat assemble_interconnection(int n_nodes, const std::vector<EdgeChannel>& channels,
                               const std::map<Edge, Mat>& blocks);

// ==== Subsystems ====
struct SubsystemSS {
    Mat A, Bu, Bw, Bp;
    Mat Cy, Cz, Cq;
    Mat Dyw, Dyp, Dzu, Dzw, Dzp, Dqw;
    std::vector<Slot> slots;

    int nx() const { return static_cast<int>(A.rows()); }
    int nu() const { return static_cast<int>(Bu.cols()); }
    int nw() const { return static_cast<int>(Bw.cols()); }
    int ny() const { return static_cast<int>(Cy.rows()); }
    int nz() const { return static_cast<int>(Cz.rows()); }
    int np() const { return static_cast<int>(Bp.cols()); }
    int nq() const { return static_cast<int>(Cq.rows()); }
    void validate() const;
};

struct InterconnectedSystem {
    Topology topo;  // plant graph E^G in edge form; class-union graph in compressed form
    std::vector<SubsystemSS> subs;
    SpMat P;        // p = P q
    bool edge_form = true;

    int n() const { return static_cast<int>(subs.size()); }
    ChannelLayout layout() const;
    void validate() const;
};

// Edge-form data: local matrices plus per-edge coupling blocks acting on (x_k, w_k).
struct LocalBlocks {
    Mat A, Bu, Bw, Cy, Cz, Dyw, Dzu, Dzw;
};

struct CouplingBlocks {
    Mat A, Bw, Cz, Dzw, Cy, Dyw;
};

// Realizes p_ik = [x_k; w_k] for (i,k) in E^G and q_ik = [x_i; w_i] for (k,i) in E^G,
// with B_p = [A_ik, B_w,ik], D_zp = [C_z,ik, D_zw,ik], D_yp = [C_y,ik, D_yw,ik] and ideal P.
// Missing coupling blocks are zero.
InterconnectedSystem realize_edge_form(const Topology& topo_g, const std::vector<LocalBlocks>& locals,
                                       const std::map<Edge, CouplingBlocks>& couplings);

// ==== Controllers ====
struct ControllerSS {
    Mat AK, BK, CK, DK;
    Mat BKp, CKp;  // pK -> xK, pK -> u
    Mat CKq, DKq;  // xK -> qK, y -> qK
    std::vector<Slot> slots;

    int nxk() const { return static_cast<int>(AK.rows()); }
    int npk() const { return static_cast<int>(BKp.cols()); }
    int nqk() const { return static_cast<int>(CKq.rows()); }
    void validate(int nu, int ny) const;
};

struct DistributedController {
    Topology topo;  // E^K
    std::vector<ControllerSS> subs;
    SpMat P;        // pK = P^K qK
    ChannelLayout layout() const;
};

// u_i = local_i y_i + sum_k edge(i,k) y_k for (i,k) in E^K.
struct StaticGains {
    std::vector<Mat> local;
    std::map<Edge, Mat> edge;
};

// Sender k transmits edge(i,k) y_k; receiver adds it to u_i (channel dim n_u,i).
DistributedController static_controller_sender_side(const Topology& topo_k, const StaticGains& g,
                                                    const std::vector<int>& ny, const std::vector<int>& nu);
// Sender k transmits y_k; receiver applies edge(i,k) (channel dim n_y,k).
DistributedController static_controller_receiver_side(const Topology& topo_k, const StaticGains& g,
                                                      const std::vector<int>& ny, const std::vector<int>& nu);

// ==== Closed loop ====
struct ClosedLoopBlock {
    Mat A, B1, B2, C1, C2, D11, D12, D21, D22;
    std::vector<Slot> slots;
    int nx() const { return static_cast<int>(A.rows()); }
    int nw() const { return static_cast<int>(B1.cols()); }
    int nz() const { return static_cast<int>(C1.rows()); }
    int np() const { return static_cast<int>(B2.cols()); }
    int nq() const { return static_cast<int>(C2.rows()); }
};

struct ClosedLoopSS {
    std::vector<ClosedLoopBlock> subs;
    SpMat P;
    int n() const { return static_cast<int>(subs.size()); }
    ChannelLayout layout() const;
};

// Slots are merged by label; closed-loop channel s of subsystem i is [p_s; pK_s] / [q_s; qK_s].
ClosedLoopSS close_loop(const InterconnectedSystem& g, const DistributedController& k);

// Eliminates the interconnection channel: L = (I - P D22)^{-1} P, A = Acal + B2 L C2, ...
StateSpace flatten(const ClosedLoopSS& clp);

// Transposed system: blocks transposed, channel roles swapped, P' = P^T.
ClosedLoopSS adjoint(const ClosedLoopSS& clp);

// ==== Performance augmentation ====
struct GlobalPlant {
    Topology topo;
    std::vector<int> nx, nu, ny;
    Mat A, Bu, Cy;
    Mat Bw, Dyw;   // w-bar inputs
    Mat Cz, Dzu;   // z-bar outputs
    Mat Dzw;
    std::vector<int> nz, nw;  // per-subsystem sizes of the augmented channels
};

struct PerformanceAugmentation {
    Mat S, T, MQ, MR;
    Mat Qbar, Rbar, Tl, Tr;
    double tl_residual = 0.0;  // |Tl' Tl - I|_F
    double tr_residual = 0.0;  // |Tr' Tr - I|_F
};

// S: (sum n_z,i) x n_zbar, T: (sum n_w,i) x n_wbar, both full column rank.
PerformanceAugmentation make_augmentation(const Mat& S, const Mat& T, const Mat& MQ, const Mat& MR);

// Balanced stacking S = [I;...;I]/sqrt(N) with M_Q = I - S S' (same for T, M_R).
PerformanceAugmentation default_augmentation(int n_subsystems, int n_zbar, int n_wbar);

// Monolithic plant with the augmented performance channels.
GlobalPlant apply_augmentation(const GlobalPlant& g, const PerformanceAugmentation& aug);

// Cuts an augmented global plant into the edge-form interconnected system.
InterconnectedSystem localize(const GlobalPlant& g);

std::pair<InterconnectedSystem, PerformanceAugmentation> augment_performance(const GlobalPlant& g, const Mat& S,
                                                                             const Mat& T, const Mat& MQ,
                                                                             const Mat& MR);

}  // namespace netsyn
