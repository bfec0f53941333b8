#pragma once

#include <map>
#include <vector>

#include "qsense/common.hpp"

namespace qsense::analysis {

/// Per-node availability inputs. p_w is defined by the source model but
/// never consumed by any formula; it is carried for symmetry.
struct AvailabilityParams {
    int N = 0;
    int k = 0;
    int d = 0;
    double p_r = 0.0;
    double p_w = 0.0;  ///< unused by every formula
};

/// A probability-like evaluation that may exceed 1 (the literal download
/// and repair formulas do for ordinary parameters); flagged when it does.
struct FlaggedValue {
    double value = 0.0;
    bool out_of_range = false;  ///< true when value > 1
};

/// Exact binomial coefficient as a double (exact integer arithmetic for
/// n <= 64, log-space beyond).
double binomial(int n, int r);

/// Literal sum_{i=k}^{N} C(N,i) C(i,k) p^i (1-p)^{N-i}; 0 on empty support.
FlaggedValue prob_download_paper(const AvailabilityParams& a);

/// Literal sum_{i=d}^{N-1} C(N,i) C(i,d) p^i (1-p)^{N-i}; 0 on empty support.
FlaggedValue prob_repair_paper(const AvailabilityParams& a);

/// Standard binomial tail P(at least m of N available); always in [0,1].
double prob_at_least(int N, int m, double p);

/// (rate*t)^m e^{-rate*t} / m!
double poisson_pmf(double rate, double t, int m);

/// Product form P_{l,m}(T,t) = P_{l,0}(T) * P_{0,m}(t).
double joint_pmf(double lambda_w, double T, double lambda_r, double t, int l, int m);

/// (lambda_w*T) * (lambda_r*t)
double expected_requests(double lambda_w, double T, double lambda_r, double t);

/// Probability of m requests remaining out of an initial backlog of N0
/// when completions arrive at rate mu and no new requests are admitted:
/// m >= 1: (mu*t)^{N0-m} e^{-mu*t} / (N0-m)!; m = 0 by complement.
double completion_pmf(int N0, double mu, double t, int m);

/// e^{-mu*t}: the probability that no request has completed yet,
/// i.e. completion_pmf(N0, mu, t, N0) for every N0.
double completion_zero_limit(double mu, double t);

/// Steady-state M/M/1: (lambda/mu)^n (1 - lambda/mu); requires lambda < mu.
double mm1_pn(double lambda, double mu, int n);

/// Empirical pmf vs. a closed form over a common support.
struct DivergencePoint {
    int n = 0;
    double empirical = 0.0;
    double analytical = 0.0;
    double z = 0.0;  ///< binomial z-score when a sample count is known
};
struct DivergenceReport {
    double total_variation = 0.0;  ///< (1/2) sum |emp - ana| over the support
    std::vector<DivergencePoint> points;
};

/// Compares an empirical pmf against analytical values point by point.
/// sample_count > 0 enables z-scores.
DivergenceReport compare_empirical(const std::map<int, double>& empirical,
                                   const std::map<int, double>& analytical,
                                   double sample_count = 0.0);

} // namespace qsense::analysis
