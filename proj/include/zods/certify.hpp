#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zods/rng.hpp"
#include "zods/tensor.hpp"

namespace zods {

constexpr int kAbstain = -1;

struct CertifyConfig {
    double sigma = 0.25;
    int n0 = 100;    // selection samples
    int n = 10000;   // estimation samples
    double alpha = 0.001;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-example smoothing outcome. radius > 0 implies pa_lower > 1/2;
/// an abstention always carries radius 0.
struct CertificationRecord {
    int example_id = 0;
    int predicted = kAbstain;
    double pa_lower = 0.0;
    double radius = 0.0;
    std::uint64_t queries = 0;
};

/// Defended prediction on one noisy sample; routed through the oracle so
/// every sample costs one base-model row.
using PredictFn = std::function<Tensor(const Tensor&)>;

/// P[Binomial(n, p) >= k], exact tail sum.
double binomial_tail_geq(int k, int n, double p);

/// Exact two-sided binomial test p-value against p0 = 1/2.
double two_sided_binom_test_half(int k, int n);

/// One-sided Clopper-Pearson lower confidence bound: the largest p with
/// P[Binomial(trials, p) >= successes] <= alpha, found by bisection on the
/// binomial tail. successes = 0 gives 0.
double lower_conf_bound(int successes, int trials, double alpha);

/// Standard normal quantile via bisection on erfc, |error| < 1e-10.
double normal_quantile(double p);

/// Majority vote over cfg.n Gaussian-noised copies; returns the top class if
/// an exact two-sided binomial test between the top two vote counts rejects
/// a tie at level alpha, else kAbstain.
int smooth_predict(const PredictFn& predict, const Tensor& x, const CertifyConfig& cfg);

/// Two-round randomized-smoothing certification: n0 selection votes pick the
/// candidate class, n fresh estimation votes give the Clopper-Pearson lower
/// bound pa_lower, and the certified l2 radius is sigma * Phi^-1(pa_lower)
/// when pa_lower > 1/2 (else abstain).
CertificationRecord certify(const PredictFn& predict, const Tensor& x, const CertifyConfig& cfg, int example_id,
                            const std::function<std::uint64_t()>& query_counter = {});

/// CA(r) = fraction of records with predicted == label and radius > r.
std::vector<std::pair<double, double>> certified_accuracy_curve(const std::vector<CertificationRecord>& records,
                                                                const std::vector<int>& labels,
                                                                const std::vector<double>& radii);

/// Smooth-predictor standard accuracy with abstentions counted as errors;
/// equals CA(0) for sigma > 0.
double smooth_accuracy(const std::vector<CertificationRecord>& records, const std::vector<int>& labels);

} // namespace zods
