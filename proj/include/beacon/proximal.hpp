#pragma once

#include <functional>
#include <vector>

namespace beacon {

// box constraints plus an equality on the coordinate sum
struct BoxSumSpec {
  std::vector<double> lo;
  std::vector<double> hi;
  double budget = 0.0;

  static BoxSumSpec broadcast(std::vector<double> lo, double hi, double budget);
  // throws std::invalid_argument when lo > hi somewhere or the budget is
  // outside [sum(lo), sum(hi)]
  void validate() const;
};

double clip(double v, double lo, double hi);

// S_tau(u) = sign(u) * max(|u| - tau, 0)
double soft_threshold(double u, double tau);

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(const std::vector<double>& v);

// Euclidean projection onto {q : lo <= q <= hi, sum(q) = budget} by bisection
// on the shift multiplier. The bracket [min(v-hi), max(v-lo)] always contains
// the root; iteration stops when the budget residual drops below
// 1e-8 * max(1, budget) or after 200 halvings.
std::vector<double> project_box_sum(const std::vector<double>& v, const BoxSumSpec& spec);

struct TernaryResult {
  double t = 0.0;
  double f = 0.0;
};

// Minimizes a unimodal f on [lo, hi]. On flat regions the returned point is
// the left end of the flat set, up to tol.
TernaryResult ternary_search_min(const std::function<double(double)>& f, double lo, double hi,
                                 double tol);

}  // namespace beacon
