#pragma once

// Independent reference computations for the test suite. Nothing here calls the library
// routines it is used to check (flatten, close_loop, hinf_norm, lyap).

#include <complex>
#include <cstdint>
#include <vector>

#include "netsyn/graph.hpp"
#include "netsyn/linalg.hpp"
#include "netsyn/rng.hpp"
#include "netsyn/sysmodel.hpp"

namespace oracle {

using netsyn::CMat;
using netsyn::Mat;
using netsyn::StateSpace;

Mat randn(netsyn::Rng& rng, int r, int c, double scale = 1.0);

// C (jw I - A)^{-1} B + D by a dense complex solve.
CMat freq_response(const StateSpace& s, double w);

// Largest singular value over w = 0 and n log-spaced points in [lo, hi].
double grid_hinf(const StateSpace& s, int n = 10000, double lo = 1e-4, double hi = 1e4);

// H2 norm via the controllability Gramian solved as a Kronecker linear system (D must be 0).
double kron_h2(const StateSpace& s);

// Eliminates p = P q inside the plant and pK = P^K qK inside the controller, then closes
// the ordinary u/y loop of the two monolithic systems.
StateSpace monolithic_closure(const netsyn::InterconnectedSystem& g, const netsyn::DistributedController& k);

// Worst relative error of two transfer functions over `freqs`.
double max_rel_tf_error(const StateSpace& a, const StateSpace& b, const std::vector<double>& freqs);

std::vector<double> random_freqs(netsyn::Rng& rng, int n);

// Random plant in generic form over `topo_g` (nonzero D_yp, non-identity C_y, random P blocks).
netsyn::InterconnectedSystem random_plant(const netsyn::Topology& topo_g, netsyn::Rng& rng, int nu = 1, int ny = 2);

// random_plant with C_y = I, D_yw = 0 and D_yp = 0, ready for state feedback.
netsyn::InterconnectedSystem random_sf_plant(const netsyn::Topology& topo_g, netsyn::Rng& rng, int nu = 1);

// Random dynamic controller over `topo_k` compatible with the plant's u/y sizes.
netsyn::DistributedController random_controller(const netsyn::Topology& topo_k, const netsyn::InterconnectedSystem& g,
                                                netsyn::Rng& rng);

// Random stable state-space system.
StateSpace random_stable(netsyn::Rng& rng, int n, int m, int p, bool with_d = true);

// Random 4-subsystem global plant with a valid augmentation (S, T, M_Q, M_R) and a local
// state-feedback gain that stabilizes it. D_zu-bar and D_zw-bar are zero.
struct AugInstance {
    netsyn::GlobalPlant bar;
    Mat S, T, MQ, MR;
    std::vector<Mat> K;
};
AugInstance random_aug_instance(netsyn::Rng& rng, int n_sub = 4);

// Monolithic loop of the un-augmented plant under u = blkdiag(K) y.
StateSpace bar_closed_loop(const AugInstance& inst);

// Orthogonal complement basis of the column space of m.
Mat complement(const Mat& m);

}  // namespace oracle
