#pragma once

#include <string>
#include <vector>

#include "netsyn/graph.hpp"
#include "netsyn/lmi.hpp"
#include "netsyn/sdp.hpp"
#include "netsyn/synthesis.hpp"
#include "netsyn/sysmodel.hpp"

namespace netsyn {

// ==== Local variables ====
// The level variable of every agent is tau = 1/gamma = gamma~^2, in which the tau-form nominal
// condition is linear. Maximizing tau and maximizing gamma~ share their optimizers.
struct EdgeMultiplierHandles {
    VarHandle Q, S, R;  // S has zero size when either channel side is empty
};

// Agent i's stacked variables y_i, in creation order:
//   tau, X_i (upper triangle), W_i, Z_i per gain slot, then per neighbor k ascending
//   M_ik = (Q_ik, S_ik, R_ik) followed by the copy of M_ki.
// The indices of the handles are the coordinates of y_i.
struct LocalVariableVector {
    int agent = 0;                 // 0-based
    std::vector<int> neighbors;    // 1-based labels in slot order
    int tau = 0;
    VarHandle X, W;
    std::vector<VarHandle> Z;      // per gain slot
    std::vector<EdgeMultiplierHandles> own, copy;  // per neighbor
    int dim = 0;
};

// One agent's local conic program: "lyapunov" X_i ⪰ eps I, its "nominal" LMI and one
// "multiplier" pair condition per neighbor. Objective and proximal terms are added per step.
struct LocalProblem {
    ConicProgram prog;
    LocalVariableVector vars;
};

LocalProblem build_local_problem(const SfTemplate& t, int agent, double eps);

// ==== Consensus selections ====
// Shared entries of the edge {i,k}: tau, then the multipliers of the lower-indexed endpoint's slot,
// then those of the other endpoint. Both agents list them in this order, so E_ik y_i and E_ki y_k
// compare entry by entry. Controller gains are never shared.
struct ConsensusSelections {
    // sel[i][n]: indices into y_i of the entries shared with the n-th neighbor of i.
    std::vector<std::vector<std::vector<int>>> sel;
    std::vector<std::vector<int>> neighbors;  // per agent, 1-based, ascending

    int n_agents() const { return static_cast<int>(sel.size()); }
    // Position of neighbor k (1-based) in neighbors[i], or -1.
    int slot_of(int i, int k) const;
    // Sum of |E_ik y_i| over all ordered pairs.
    int consensus_dim() const;

    Vec select(int i, int n, const Vec& y) const;               // E_ik y
    void place_add(int i, int n, const Vec& z, Vec& out) const;  // out += T_ik z
};

ConsensusSelections make_selections(const std::vector<LocalVariableVector>& vars);

// ==== Agents and messages ====
struct Message {
    int from = 0, to = 0;  // 0-based agents
    int round = 0;
    Vec payload;           // E_{from,to} y_from
};

// Synchronous rounds: every agent posts one message per neighbor, then deliver() hands the whole
// round to the receivers. Reading a round before it is delivered is a protocol violation.
class MessageBus {
public:
    explicit MessageBus(int n_agents);
    void post(Message m);
    // Moves the posted round into the inboxes and checks one message per ordered neighbor pair.
    void deliver(const ConsensusSelections& cs);
    // Delivered payloads for agent i, indexed like cs.neighbors[i].
    const std::vector<Vec>& inbox(int i) const { return inbox_[i]; }
    int round() const { return round_; }
    long messages_sent() const { return sent_; }

private:
    std::vector<Message> pending_;
    std::vector<std::vector<Vec>> inbox_;
    int round_ = 0;
    long sent_ = 0;
};

struct AgentState {
    int id = 0;
    Vec y, y_prev;
    Vec lambda;
    std::vector<Vec> msgs;  // round-kappa payloads E_ki y_k, per neighbor
    int kappa = 0;
    double r_local = 0.0, d_local = 0.0;  // norms of the agent's halves of r and d
    bool flag = false;
    long nominal_assembled = 0, multiplier_assembled = 0;
    double last_solve_seconds = 0.0;
};

// lambda_i + rho sum_k (T_ik y_i - T_ki y_k) with the round-kappa messages.
Vec dual_update(const AgentState& a, const std::vector<Vec>& msgs, const ConsensusSelections& cs, double rho);

// argmin -tau/N + y' lambda + rho sum_k |E_ik y - (E_ik y_i + E_ki y_k)/2|^2 over the local LMIs.
// Throws Infeasible or NumericalFailure from the local solve.
Vec local_step(AgentState& a, const LocalProblem& lp, const std::vector<Vec>& msgs, const ConsensusSelections& cs,
               double rho, int n_agents, const SolverOptions& solver);

// ==== Residuals ====
struct EdgeResidual {
    Edge edge;        // (i,k), 1-based
    double r = 0.0;   // |r_ik| / 2
    double d = 0.0;   // |d_ik| / 2
};

struct Residuals {
    double r = 0.0, d = 0.0;  // Euclidean norms of the stacked halves
    std::vector<EdgeResidual> edges;
    std::vector<double> r_agent, d_agent;
};

// r_ik = E_ik y_i - E_ki y_k and d_ik = E_ik (y_i - y_i_prev) + E_ki (y_k - y_k_prev), stacked as
// r_ik / 2 and d_ik / 2 over i and k in N_i.
Residuals residuals(const std::vector<AgentState>& agents, const ConsensusSelections& cs);

// ==== Convergence detection ====
// Each agent keeps s_i = flag_i ? 1 + min(s_i, s_k for k in N_i) : 0 from the previous round's
// values. s_i > D implies every agent within distance D raised its flag D rounds ago.
class ConvergenceProtocol {
public:
    ConvergenceProtocol(const Topology& comm, int diameter_bound);
    // One round; true once every agent has s_i > D.
    bool step(const std::vector<bool>& flags);
    int round() const { return round_; }
    const std::vector<int>& counters() const { return s_; }

private:
    std::vector<std::vector<int>> nbrs_;
    int d_ = 0;
    std::vector<int> s_;
    int round_ = 0;
};

// ==== Run ====
struct AdmmConfig {
    double rho = 1.0;
    double eps_pri = -1.0, eps_dual = -1.0;  // negative: 1e-4 sqrt(consensus dimension)
    int max_iter = 3000;
    int diameter_bound = -1;                 // negative: diameter of the communication graph
    int certify_every = 100;                 // candidate certification period, 0 disables
    int threads = 1;
    bool debug_identities = false;
    double eps = 1e-7;
    SolverOptions solver;
};

struct AdmmTraceRow {
    int kappa = 0;
    std::vector<double> gamma_tilde;  // per agent, sqrt(tau_i)
    double r = 0.0, d = 0.0;
    std::vector<double> solve_seconds;
    double identity_drift = 0.0;      // debug mode only
};

struct AdmmResult {
    SynthesisResult synthesis;
    std::vector<AdmmTraceRow> trace;
    bool converged = false;
    int iterations = 0;
    double gamma_consensus = kInf;  // 1 / mean tau at termination
    double max_identity_drift = 0.0;
    long messages = 0;
    std::vector<long> nominal_assembled, multiplier_assembled;  // per agent
    bool used_fallback = false;
};

// Consensus gains of the current iterates: K_i = W_i X_i^{-1}, F = Z X_i^{-1} from each agent.
StaticGains admm_gains(const SfTemplate& t, const std::vector<LocalProblem>& lps, const std::vector<AgentState>& agents);

AdmmResult admm_synthesis(const InterconnectedSystem& g, const Topology& topo_k, const AdmmConfig& cfg = {});

}  // namespace netsyn
