#include "beacon/weights.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace beacon {

namespace {

constexpr double kEpsW = 1e-8;  // domain weight floor for the split-back division

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_feasible(std::size_t m, std::size_t n, double q_t_min, double q_max, double budget) {
  const double sum_lo = static_cast<double>(n) * q_t_min;
  const double sum_hi = static_cast<double>(m + n) * q_max;
  if (budget < sum_lo || budget > sum_hi)
    throw std::invalid_argument("weights: infeasible budget for the given bounds");
}

}  // namespace

void WeightState::project() { q = project_box_sum(q, box_spec()); }

bool WeightState::valid(double sum_tol) const {
  if (q.size() != m + n || p0.size() != q.size() || lo.size() != q.size()) return false;
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < lo[i] - 1e-12 || q[i] > hi + 1e-12) return false;
    sum += q[i];
  }
  return std::abs(sum - budget) <= sum_tol;
}

WeightState make_weight_state(std::size_t m, std::size_t n, const HyperParams& hp) {
  if (n < 1) throw std::invalid_argument("make_weight_state: needs at least one target");
  const double budget = static_cast<double>(n) + hp.alpha * static_cast<double>(m);
  check_feasible(m, n, hp.q_t_min, hp.q_max, budget);
  WeightState ws;
  ws.m = m;
  ws.n = n;
  ws.hi = hp.q_max;
  ws.budget = budget;
  ws.p0.assign(m + n, 0.0);
  ws.lo.assign(m + n, 0.0);
  const double p_target = 1.0 / static_cast<double>(n);
  for (std::size_t j = m; j < m + n; ++j) {
    ws.p0[j] = p_target;
    ws.lo[j] = hp.q_t_min;
  }
  ws.q = ws.p0;
  return ws;
}

std::vector<std::size_t> sup_norm_argmax(const std::vector<double>& q, double tol) {
  std::vector<std::size_t> out;
  if (q.empty()) return out;
  const double mx = *std::max_element(q.begin(), q.end());
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] >= mx - tol) out.push_back(i);
  return out;
}

double q_subgradient(std::size_t i, double loss_i, double d_i, const WeightState& ws,
                     const HyperParams& hp, double r_theta,
                     const std::vector<std::size_t>& argmax_set) {
  double g = loss_i + hp.lambda_d * d_i;
  if (!argmax_set.empty() &&
      std::binary_search(argmax_set.begin(), argmax_set.end(), i))
    g += hp.gamma * r_theta / static_cast<double>(argmax_set.size());
  g += hp.lambda1 * sgn(ws.q[i] - ws.p0[i]);
  g += 2.0 * hp.lambda2 * ws.q[i];
  return g;
}

void q_sweep_stochastic(WeightState& ws, const std::vector<double>& losses,
                        const DiscrepancyScores& d, const HyperParams& hp, double r_theta,
                        RngState& rng) {
  const std::size_t total = ws.m + ws.n;
  if (losses.size() != total) throw std::invalid_argument("q_sweep: loss vector size mismatch");
  check_feasible(ws.m, ws.n, hp.q_t_min, hp.q_max, ws.budget);

  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  rng.shuffle(order);

  const auto batch = static_cast<std::size_t>(hp.batch_size);
  for (std::size_t start = 0; start < total; start += batch) {
    const std::size_t stop = std::min(start + batch, total);
    const std::vector<std::size_t> argmax = sup_norm_argmax(ws.q);
    for (std::size_t pos = start; pos < stop; ++pos) {
      const std::size_t i = order[pos];
      const double d_i = i < ws.m ? d.d[i] : 0.0;
      const double g = q_subgradient(i, losses[i], d_i, ws, hp, r_theta, argmax);
      ws.q[i] = clip(ws.q[i] - hp.eta_q * g, ws.lo[i], ws.hi);
    }
  }
  ws.project();
}

namespace {

struct CapSolve {
  std::vector<double> q;
  double nu = 0.0;
  double inner_objective = 0.0;  // value without the capacity term
};

// At a fixed cap the problem separates per coordinate: each weight follows the
// soft-threshold closed form shifted by the sum multiplier, and the sum is a
// nondecreasing piecewise-linear function of the shift, so bisection applies.
CapSolve solve_at_cap(const std::vector<double>& cost, const WeightState& ws,
                      const HyperParams& hp, double cap) {
  const std::size_t total = cost.size();
  const double tau = hp.lambda1 / (2.0 * hp.lambda2);

  std::vector<double> z(total);
  for (std::size_t i = 0; i < total; ++i) z[i] = -cost[i] / (2.0 * hp.lambda2);

  const auto coord = [&](std::size_t i, double shift) {
    const double raw = ws.p0[i] + soft_threshold(z[i] + shift - ws.p0[i], tau);
    return std::min(std::max(raw, ws.lo[i]), cap);
  };
  const auto sum_at = [&](double shift) {
    double s = 0.0;
    for (std::size_t i = 0; i < total; ++i) s += coord(i, shift);
    return s;
  };

  double lo_shift = ws.lo[0] - z[0];
  double hi_shift = cap - z[0];
  for (std::size_t i = 1; i < total; ++i) {
    lo_shift = std::min(lo_shift, ws.lo[i] - z[i]);
    hi_shift = std::max(hi_shift, cap - z[i]);
  }
  lo_shift -= tau + 1.0;
  hi_shift += tau + 1.0;

  const double tol = 1e-10 * std::max(1.0, std::abs(ws.budget));
  double shift = 0.5 * (lo_shift + hi_shift);
  for (int it = 0; it < 200; ++it) {
    shift = 0.5 * (lo_shift + hi_shift);
    const double s = sum_at(shift);
    if (std::abs(s - ws.budget) <= tol) break;
    if (s < ws.budget)
      lo_shift = shift;
    else
      hi_shift = shift;
  }

  CapSolve out;
  out.q.resize(total);
  out.nu = 2.0 * hp.lambda2 * shift;
  for (std::size_t i = 0; i < total; ++i) out.q[i] = coord(i, shift);
  double obj = 0.0;
  for (std::size_t i = 0; i < total; ++i)
    obj += out.q[i] * cost[i] + hp.lambda1 * std::abs(out.q[i] - ws.p0[i]) +
           hp.lambda2 * out.q[i] * out.q[i];
  out.inner_objective = obj;
  return out;
}

std::vector<double> build_cost(const WeightState& ws, const std::vector<double>& losses,
                               const DiscrepancyScores& d, const HyperParams& hp) {
  std::vector<double> cost(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i)
    cost[i] = losses[i] + hp.lambda_d * (i < ws.m ? d.d[i] : 0.0);
  return cost;
}

}  // namespace

ConvexSolveInfo q_solve_at_cap(WeightState& ws, const std::vector<double>& losses,
                               const DiscrepancyScores& d, const HyperParams& hp, double cap) {
  if (hp.lambda2 <= 0.0)
    throw std::invalid_argument("q_solve: closed form requires lambda_2 > 0");
  if (losses.size() != ws.m + ws.n)
    throw std::invalid_argument("q_solve: loss vector size mismatch");
  check_feasible(ws.m, ws.n, hp.q_t_min, hp.q_max, ws.budget);
  if (cap * static_cast<double>(ws.m + ws.n) < ws.budget - 1e-9)
    throw std::invalid_argument("q_solve: cap too small to hold the budget");
  const auto sol = solve_at_cap(build_cost(ws, losses, d, hp), ws, hp, cap);
  ws.q = sol.q;
  return {cap, sol.nu};
}

ConvexSolveInfo q_solve_convex(WeightState& ws, const std::vector<double>& losses,
                               const DiscrepancyScores& d, const HyperParams& hp, double r_theta) {
  if (hp.lambda2 <= 0.0)
    throw std::invalid_argument("q_solve: closed form requires lambda_2 > 0");
  if (losses.size() != ws.m + ws.n)
    throw std::invalid_argument("q_solve: loss vector size mismatch");
  check_feasible(ws.m, ws.n, hp.q_t_min, hp.q_max, ws.budget);

  const std::vector<double> cost = build_cost(ws, losses, d, hp);
  // caps below budget/(m+n) cannot hold the budget; caps below the floor
  // would empty the target boxes
  const double max_lo = *std::max_element(ws.lo.begin(), ws.lo.end());
  const double t_lo = std::max(ws.budget / static_cast<double>(ws.m + ws.n), max_lo);
  const double t_hi = ws.hi;
  ConvexSolveInfo info;
  if (t_hi - t_lo <= 1e-12) {
    info.t_star = t_hi;
  } else {
    const auto outer = [&](double t) {
      return solve_at_cap(cost, ws, hp, t).inner_objective + hp.gamma * r_theta * t;
    };
    const double tol = 1e-12 * std::max(1.0, t_hi - t_lo);
    info.t_star = ternary_search_min(outer, t_lo, t_hi, tol).t;
  }
  const auto sol = solve_at_cap(cost, ws, hp, info.t_star);
  ws.q = sol.q;
  info.nu_star = sol.nu;
  return info;
}

DomainWeights make_domain_weights(const Dataset& data) {
  if (data.num_domains < 1)
    throw std::invalid_argument("make_domain_weights: dataset has no source domains");
  DomainWeights dw;
  const auto K = static_cast<std::size_t>(data.num_domains);
  dw.w.assign(K, 1.0 / static_cast<double>(K));
  dw.w0 = dw.w;
  dw.assignment.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) dw.assignment[i] = data.samples[i].domain;
  return dw;
}

std::vector<double> w_gradient(const DomainWeights& dw, const std::vector<double>& q_tilde,
                               const std::vector<double>& losses, const DiscrepancyScores& d,
                               const HyperParams& hp, const std::vector<double>& p0) {
  const std::size_t K = dw.w.size();
  std::vector<double> grad(K, 0.0);
  for (std::size_t i = 0; i < dw.assignment.size(); ++i) {
    const int dom = dw.assignment[i];
    if (dom == kTargetDomain) continue;
    const auto k = static_cast<std::size_t>(dom);
    const double qt = q_tilde[i];
    const double di = d.d.empty() ? 0.0 : d.d[i];
    grad[k] += qt * (losses[i] + hp.lambda_d * di);
    grad[k] += hp.lambda1 * qt * sgn(dw.w[k] * qt - p0[i]);
    grad[k] += 2.0 * hp.lambda2 * dw.w[k] * qt * qt;
  }
  for (std::size_t k = 0; k < K; ++k)
    grad[k] += hp.rho1 * sgn(dw.w[k] - dw.w0[k]) + 2.0 * hp.rho2 * dw.w[k];
  return grad;
}

void w_step(DomainWeights& dw, const std::vector<double>& grad, double eta_w) {
  if (grad.size() != dw.w.size()) throw std::invalid_argument("w_step: gradient size mismatch");
  std::vector<double> v(dw.w.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = dw.w[k] - eta_w * grad[k];
  dw.w = project_simplex(v);
}

double q_tilde_subgradient(double loss_i, double d_i, double q_tilde_i, double scale, double p0_i,
                           const HyperParams& hp) {
  return scale * (loss_i + hp.lambda_d * d_i) +
         hp.lambda1 * scale * sgn(scale * q_tilde_i - p0_i) +
         2.0 * hp.lambda2 * scale * scale * q_tilde_i;
}

WeightState compose_weights(const CompositeWeights& cw, std::size_t m, std::size_t n,
                            const HyperParams& hp) {
  WeightState ws = make_weight_state(m, n, hp);
  if (cw.q_tilde.size() != m + n)
    throw std::invalid_argument("compose_weights: q_tilde size mismatch");
  for (std::size_t i = 0; i < m + n; ++i) {
    const int dom = cw.domains.assignment[i];
    ws.q[i] = dom == kTargetDomain ? cw.q_tilde[i]
                                   : cw.domains.w[static_cast<std::size_t>(dom)] * cw.q_tilde[i];
  }
  return ws;
}

std::vector<double> split_back(const WeightState& ws, const DomainWeights& dw,
                               const std::vector<double>& prev_q_tilde) {
  std::vector<double> out(ws.q.size());
  for (std::size_t i = 0; i < ws.q.size(); ++i) {
    const int dom = dw.assignment[i];
    if (dom == kTargetDomain) {
      out[i] = ws.q[i];
    } else {
      const double wk = dw.w[static_cast<std::size_t>(dom)];
      out[i] = wk >= kEpsW ? ws.q[i] / wk : prev_q_tilde[i];
    }
  }
  return out;
}

}  // namespace beacon
