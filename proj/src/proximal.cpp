#include "beacon/proximal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace beacon {

BoxSumSpec BoxSumSpec::broadcast(std::vector<double> lo, double hi, double budget) {
  BoxSumSpec spec;
  spec.hi.assign(lo.size(), hi);
  spec.lo = std::move(lo);
  spec.budget = budget;
  return spec;
}

void BoxSumSpec::validate() const {
  if (lo.size() != hi.size()) throw std::invalid_argument("BoxSumSpec: lo/hi size mismatch");
  if (lo.empty()) throw std::invalid_argument("BoxSumSpec: empty bounds");
  double sum_lo = 0.0, sum_hi = 0.0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i]) throw std::invalid_argument("BoxSumSpec: lo > hi at a coordinate");
    sum_lo += lo[i];
    sum_hi += hi[i];
  }
  const double slack = 1e-9 * std::max(1.0, std::abs(budget));
  if (budget < sum_lo - slack || budget > sum_hi + slack)
    throw std::invalid_argument("BoxSumSpec: budget outside [sum(lo), sum(hi)]");
}

double clip(double v, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clip: lo > hi");
  return std::min(std::max(v, lo), hi);
}

double soft_threshold(double u, double tau) {
  if (tau < 0.0) throw std::invalid_argument("soft_threshold: tau < 0");
  const double mag = std::abs(u) - tau;
  if (mag <= 0.0) return 0.0;
  return u > 0.0 ? mag : -mag;
}

std::vector<double> project_simplex(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("project_simplex: empty input");

  // already on the simplex: return unchanged so projecting twice is a no-op
  double sum = 0.0;
  double mn = v[0];
  for (double x : v) {
    sum += x;
    mn = std::min(mn, x);
  }
  if (mn >= 0.0 && std::abs(sum - 1.0) <= 1e-10) return v;

  std::vector<double> u(v);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double cand = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - cand > 0.0) {
      rho = j + 1;
      tau = cand;
    }
  }
  (void)rho;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - tau, 0.0);
  return out;
}

std::vector<double> project_box_sum(const std::vector<double>& v, const BoxSumSpec& spec) {
  spec.validate();
  if (v.size() != spec.lo.size())
    throw std::invalid_argument("project_box_sum: input size does not match spec");

  const auto sum_at = [&](double mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
      s += std::min(std::max(v[i] - mu, spec.lo[i]), spec.hi[i]);
    return s;
  };

  double mu_lo = v[0] - spec.hi[0];
  double mu_hi = v[0] - spec.lo[0];
  for (std::size_t i = 1; i < v.size(); ++i) {
    mu_lo = std::min(mu_lo, v[i] - spec.hi[i]);
    mu_hi = std::max(mu_hi, v[i] - spec.lo[i]);
  }

  const double tol = 1e-8 * std::max(1.0, std::abs(spec.budget));
  double mu = 0.5 * (mu_lo + mu_hi);
  for (int it = 0; it < 200; ++it) {
    mu = 0.5 * (mu_lo + mu_hi);
    const double s = sum_at(mu);
    if (std::abs(s - spec.budget) <= tol) break;
    if (s > spec.budget)
      mu_lo = mu;  // sum decreases as mu grows
    else
      mu_hi = mu;
  }

  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = std::min(std::max(v[i] - mu, spec.lo[i]), spec.hi[i]);
  return out;
}

TernaryResult ternary_search_min(const std::function<double(double)>& f, double lo, double hi,
                                 double tol) {
  if (!(lo < hi)) throw std::invalid_argument("ternary_search_min: lo >= hi");
  if (!(tol > 0.0)) throw std::invalid_argument("ternary_search_min: tol <= 0");

  for (int it = 0; it < 500 && hi - lo > tol; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    // f(m1) <= f(m2) keeps the leftmost minimizer inside [lo, m2]
    if (f(m1) <= f(m2))
      hi = m2;
    else
      lo = m1;
  }

  // pick the best of the remaining bracket, ties toward the left
  const double mid = 0.5 * (lo + hi);
  TernaryResult best{lo, f(lo)};
  for (double t : {mid, hi}) {
    const double ft = f(t);
    if (ft < best.f) best = {t, ft};
  }
  return best;
}

}  // namespace beacon
