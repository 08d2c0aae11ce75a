#pragma once

#include <cstddef>
#include <vector>

#include "beacon/config.hpp"
#include "beacon/data.hpp"
#include "beacon/discrepancy.hpp"
#include "beacon/proximal.hpp"
#include "beacon/rng.hpp"

namespace beacon {

// Per-sample weight vector with its reference, bounds, and sum budget.
// Projections keep q inside [lo, hi] with sum(q) = budget.
struct WeightState {
  std::vector<double> q;
  std::vector<double> p0;  // 1/n on targets, 0 on sources
  std::vector<double> lo;  // q_t_min on targets, 0 on sources
  double hi = 0.0;         // q_max
  double budget = 0.0;     // n + alpha * m
  std::size_t m = 0;
  std::size_t n = 0;

  BoxSumSpec box_spec() const { return BoxSumSpec::broadcast(lo, hi, budget); }
  void project();
  bool valid(double sum_tol = 1e-6) const;
};

// q initialized at p0; call project() to land on the feasible set.
WeightState make_weight_state(std::size_t m, std::size_t n, const HyperParams& hp);

// indices attaining max(q) within tol
std::vector<std::size_t> sup_norm_argmax(const std::vector<double>& q, double tol = 1e-12);

// Subgradient of the per-sample weighted objective at coordinate i:
//   loss_i + lambda_d * d_i + gamma * R * [i in argmax]/|argmax|
//   + lambda1 * sign(q_i - p0_i) + 2 * lambda2 * q_i
// with sign(0) = 0.
double q_subgradient(std::size_t i, double loss_i, double d_i, const WeightState& ws,
                     const HyperParams& hp, double r_theta,
                     const std::vector<std::size_t>& argmax_set);

// One sequential sweep of minibatch projected-subgradient steps over all
// coordinates (losses held fixed), followed by a single global projection.
void q_sweep_stochastic(WeightState& ws, const std::vector<double>& losses,
                        const DiscrepancyScores& d, const HyperParams& hp, double r_theta,
                        RngState& rng);

struct ConvexSolveInfo {
  double t_star = 0.0;   // optimal cap on the weights
  double nu_star = 0.0;  // sum-constraint multiplier at t_star
};

// Exact minimizer of the weight subproblem at fixed learner: coordinates
// follow the soft-threshold closed form under a cap t, the sum constraint is
// met by bisection on the multiplier, and the cap is chosen by ternary search
// on the convex outer objective. Requires lambda2 > 0.
ConvexSolveInfo q_solve_convex(WeightState& ws, const std::vector<double>& losses,
                               const DiscrepancyScores& d, const HyperParams& hp, double r_theta);

// Inner solve at a fixed cap; exposed for the trainer and for direct checks.
ConvexSolveInfo q_solve_at_cap(WeightState& ws, const std::vector<double>& losses,
                               const DiscrepancyScores& d, const HyperParams& hp, double cap);

// --- multi-source machinery ---

struct DomainWeights {
  std::vector<double> w;       // on the simplex
  std::vector<double> w0;      // reference, uniform by default
  std::vector<int> assignment; // per-sample domain index, kTargetDomain on targets
};

DomainWeights make_domain_weights(const Dataset& data);

struct CompositeWeights {
  std::vector<double> q_tilde;  // within-domain weights, target entries included
  DomainWeights domains;
};

// Gradient of the multi-source objective in w (capacity term excluded),
// including the chain terms of the composite-q regularizers.
std::vector<double> w_gradient(const DomainWeights& dw, const std::vector<double>& q_tilde,
                               const std::vector<double>& losses, const DiscrepancyScores& d,
                               const HyperParams& hp, const std::vector<double>& p0);

// w <- project_simplex(w - eta_w * grad)
void w_step(DomainWeights& dw, const std::vector<double>& grad, double eta_w);

// Per-coordinate subgradient of the composite objective in q_tilde. scale is
// w_{s(i)} for source entries and 1 for target entries.
double q_tilde_subgradient(double loss_i, double d_i, double q_tilde_i, double scale, double p0_i,
                           const HyperParams& hp);

// composite q_i = w_{s(i)} * q_tilde_i on sources, q_tilde on targets
WeightState compose_weights(const CompositeWeights& cw, std::size_t m, std::size_t n,
                            const HyperParams& hp);

// q_tilde_i = q_i / w_{s(i)} where w is bounded away from zero; entries whose
// domain weight collapsed keep their previous value
std::vector<double> split_back(const WeightState& ws, const DomainWeights& dw,
                               const std::vector<double>& prev_q_tilde);

}  // namespace beacon
