#include "qsense/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace qsense::analysis {

namespace {

// Pascal's triangle in 128-bit integers; every C(n,r) with n <= 64 fits.
constexpr int kExactLimit = 64;

const unsigned __int128* pascal_row(int n) {
    static std::vector<std::vector<unsigned __int128>> table = [] {
        std::vector<std::vector<unsigned __int128>> t(kExactLimit + 1);
        for (int i = 0; i <= kExactLimit; ++i) {
            t[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i) + 1, 1);
            for (int j = 1; j < i; ++j) {
                t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    t[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] +
                    t[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j)];
            }
        }
        return t;
    }();
    return table[static_cast<std::size_t>(n)].data();
}

double pow_term(double p, int i, int rest) {
    // p^i (1-p)^rest with 0^0 = 1
    double v = 1.0;
    for (int x = 0; x < i; ++x) v *= p;
    for (int x = 0; x < rest; ++x) v *= (1.0 - p);
    return v;
}

}  // namespace

double binomial(int n, int r) {
    if (r < 0 || r > n) return 0.0;
    if (n <= kExactLimit) {
        return static_cast<double>(pascal_row(n)[static_cast<std::size_t>(r)]);
    }
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(r + 1.0) - std::lgamma(n - r + 1.0));
}

FlaggedValue prob_download_paper(const AvailabilityParams& a) {
    double sum = 0.0;
    for (int i = a.k; i <= a.N; ++i) {
        sum += binomial(a.N, i) * binomial(i, a.k) * pow_term(a.p_r, i, a.N - i);
    }
    return FlaggedValue{sum, sum > 1.0};
}

FlaggedValue prob_repair_paper(const AvailabilityParams& a) {
    double sum = 0.0;
    for (int i = a.d; i <= a.N - 1; ++i) {
        sum += binomial(a.N, i) * binomial(i, a.d) * pow_term(a.p_r, i, a.N - i);
    }
    return FlaggedValue{sum, sum > 1.0};
}

double prob_at_least(int N, int m, double p) {
    if (m > N) throw DomainError("prob_at_least requires m <= N");
    double sum = 0.0;
    for (int i = std::max(m, 0); i <= N; ++i) {
        sum += binomial(N, i) * pow_term(p, i, N - i);
    }
    return std::min(sum, 1.0);
}

double poisson_pmf(double rate, double t, int m) {
    if (rate < 0 || t < 0) throw DomainError("poisson_pmf requires rate, t >= 0");
    if (m < 0) return 0.0;
    const double x = rate * t;
    if (x == 0.0) return m == 0 ? 1.0 : 0.0;
    return std::exp(m * std::log(x) - x - std::lgamma(m + 1.0));
}

double joint_pmf(double lambda_w, double T, double lambda_r, double t, int l, int m) {
    return poisson_pmf(lambda_w, T, l) * poisson_pmf(lambda_r, t, m);
}

double expected_requests(double lambda_w, double T, double lambda_r, double t) {
    return (lambda_w * T) * (lambda_r * t);
}

double completion_pmf(int N0, double mu, double t, int m) {
    if (N0 < 1) throw DomainError("completion_pmf requires N0 >= 1");
    if (m < 0 || m > N0) {
        throw DomainError("completion_pmf requires 0 <= m <= N0, got m = " +
                          std::to_string(m));
    }
    if (mu < 0 || t < 0) throw DomainError("completion_pmf requires mu, t >= 0");
    if (m >= 1) return poisson_pmf(mu, t, N0 - m);
    double sum = 0.0;
    for (int n = 1; n <= N0; ++n) sum += poisson_pmf(mu, t, N0 - n);
    return std::max(0.0, 1.0 - sum);
}

double completion_zero_limit(double mu, double t) {
    if (mu < 0 || t < 0) throw DomainError("completion_zero_limit requires mu, t >= 0");
    return std::exp(-mu * t);
}

double mm1_pn(double lambda, double mu, int n) {
    if (n < 0) throw DomainError("mm1_pn requires n >= 0");
    if (!(lambda < mu)) {
        throw UnstableQueue("mm1_pn requires lambda < mu (got lambda=" +
                            std::to_string(lambda) + ", mu=" + std::to_string(mu) + ")");
    }
    const double rho = lambda / mu;
    return std::pow(rho, n) * (1.0 - rho);
}

DivergenceReport compare_empirical(const std::map<int, double>& empirical,
                                   const std::map<int, double>& analytical,
                                   double sample_count) {
    DivergenceReport rep;
    std::set<int> support;
    for (const auto& [n, _] : empirical) support.insert(n);
    for (const auto& [n, _] : analytical) support.insert(n);
    double l1 = 0.0;
    for (int n : support) {
        DivergencePoint pt;
        pt.n = n;
        auto e = empirical.find(n);
        auto a = analytical.find(n);
        pt.empirical = e == empirical.end() ? 0.0 : e->second;
        pt.analytical = a == analytical.end() ? 0.0 : a->second;
        if (sample_count > 0) {
            const double var = pt.analytical * (1.0 - pt.analytical) / sample_count;
            pt.z = var > 0 ? (pt.empirical - pt.analytical) / std::sqrt(var) : 0.0;
        }
        l1 += std::abs(pt.empirical - pt.analytical);
        rep.points.push_back(pt);
    }
    rep.total_variation = 0.5 * l1;
    return rep;
}

} // namespace qsense::analysis
