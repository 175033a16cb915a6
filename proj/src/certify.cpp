#include "zods/certify.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "zods/errors.hpp"

namespace zods {

void CertifyConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("certify: alpha must be in (0,1)");
    if (n0 < 1) throw std::invalid_argument("certify: n0 must be >= 1");
    if (n < n0) throw std::invalid_argument("certify: n must be >= n0");
    if (sigma < 0.0) throw std::invalid_argument("certify: sigma must be >= 0");
}

double binomial_tail_geq(int k, int n, double p) {
    if (k < 0 || n < 0 || k > n) throw std::invalid_argument("binomial_tail_geq: need 0 <= k <= n");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("binomial_tail_geq: p outside [0,1]");
    if (k == 0) return 1.0;
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    // anchored recurrence over whichever side of the mean is the small one;
    // anchoring on the large side can underflow to an unrecoverable zero
    const double logp = std::log(p), log1mp = std::log1p(-p);
    auto log_pmf = [&](int j) {
        return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) + j * logp +
               (n - j) * log1mp;
    };
    const double ratio = p / (1.0 - p);
    if (static_cast<double>(k) > static_cast<double>(n) * p) {
        double pmf = std::exp(log_pmf(k));
        double tail = 0.0;
        for (int j = k; j <= n && pmf > 0.0; ++j) {
            tail += pmf;
            pmf *= ratio * (static_cast<double>(n - j) / (j + 1.0));
        }
        return std::min(tail, 1.0);
    }
    double pmf = std::exp(log_pmf(k - 1));
    double below = 0.0;
    for (int j = k - 1; j >= 0 && pmf > 0.0; --j) {
        below += pmf;
        pmf *= (static_cast<double>(j) / (n - j + 1.0)) / ratio;
    }
    return std::min(std::max(1.0 - below, 0.0), 1.0);
}

double two_sided_binom_test_half(int k, int n) {
    if (k < 0 || n < 0 || k > n) throw std::invalid_argument("binom_test: need 0 <= k <= n");
    if (n == 0) return 1.0;
    // symmetric null p0 = 1/2: p-value = 2 * min(P[X <= k], P[X >= k]), capped
    const double upper = binomial_tail_geq(k, n, 0.5);
    const double lower = (k == n) ? 1.0 : 1.0 - binomial_tail_geq(k + 1, n, 0.5);
    return std::min(1.0, 2.0 * std::min(upper, lower));
}

double lower_conf_bound(int successes, int trials, double alpha) {
    if (trials < 0 || successes < 0 || successes > trials)
        throw std::invalid_argument("lower_conf_bound: need 0 <= successes <= trials");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("lower_conf_bound: alpha must be in (0,1)");
    if (successes == 0) return 0.0;
    // tail(p) = P[Bin(trials, p) >= successes] increases in p;
    // invariant: tail(lo) <= alpha < tail(hi)
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200 && (hi - lo) > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (binomial_tail_geq(successes, trials, mid) <= alpha)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    double lo = -12.0, hi = 12.0;
    while (hi - lo > 1e-11) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

std::map<int, int> vote(const PredictFn& predict, const Tensor& x, double sigma, int samples, RngStream& rng) {
    std::map<int, int> counts;
    for (int i = 0; i < samples; ++i) {
        const Tensor delta = sample_gaussian(rng, x.shape(), sigma);
        const Tensor out = predict(add(x, delta));
        counts[argmax(out)] += 1;
    }
    return counts;
}

std::pair<int, int> top_class(const std::map<int, int>& counts) {
    int best = kAbstain, best_votes = -1;
    for (const auto& [cls, v] : counts)
        if (v > best_votes || (v == best_votes && cls < best)) {
            best = cls;
            best_votes = v;
        }
    return {best, best_votes};
}

} // namespace

int smooth_predict(const PredictFn& predict, const Tensor& x, const CertifyConfig& cfg) {
    cfg.validate();
    RngStream rng = RngStream(cfg.seed, 0x5107Cu);
    const auto counts = vote(predict, x, cfg.sigma, cfg.n, rng);
    const auto [best, best_votes] = top_class(counts);
    int runner_votes = 0;
    for (const auto& [cls, v] : counts)
        if (cls != best) runner_votes = std::max(runner_votes, v);
    const double p = two_sided_binom_test_half(best_votes, best_votes + runner_votes);
    return p <= cfg.alpha ? best : kAbstain;
}

CertificationRecord certify(const PredictFn& predict, const Tensor& x, const CertifyConfig& cfg, int example_id,
                            const std::function<std::uint64_t()>& query_counter) {
    cfg.validate();
    const std::uint64_t q0 = query_counter ? query_counter() : 0;

    CertificationRecord rec;
    rec.example_id = example_id;

    RngStream selection_rng = RngStream(cfg.seed, 0xCE27u).split(static_cast<std::uint64_t>(example_id)).split(0);
    RngStream estimation_rng = RngStream(cfg.seed, 0xCE27u).split(static_cast<std::uint64_t>(example_id)).split(1);

    const auto selection = vote(predict, x, cfg.sigma, cfg.n0, selection_rng);
    const auto [candidate, cand_votes] = top_class(selection);
    (void)cand_votes;

    const auto estimation = vote(predict, x, cfg.sigma, cfg.n, estimation_rng);
    const auto it = estimation.find(candidate);
    const int successes = it == estimation.end() ? 0 : it->second;
    rec.pa_lower = lower_conf_bound(successes, cfg.n, cfg.alpha);

    if (rec.pa_lower > 0.5) {
        rec.predicted = candidate;
        rec.radius = cfg.sigma * normal_quantile(rec.pa_lower);
    } else {
        rec.predicted = kAbstain;
        rec.radius = 0.0;
    }
    rec.queries = query_counter ? query_counter() - q0 : static_cast<std::uint64_t>(cfg.n0 + cfg.n);
    return rec;
}

std::vector<std::pair<double, double>> certified_accuracy_curve(const std::vector<CertificationRecord>& records,
                                                                const std::vector<int>& labels,
                                                                const std::vector<double>& radii) {
    if (records.size() != labels.size())
        throw std::invalid_argument("certified_accuracy_curve: one record per labeled example required");
    std::vector<std::pair<double, double>> curve;
    curve.reserve(radii.size());
    for (double r : radii) {
        int hits = 0;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].predicted == labels[i] && records[i].radius > r) ++hits;
        curve.emplace_back(r, records.empty() ? 0.0 : static_cast<double>(hits) / records.size());
    }
    return curve;
}

double smooth_accuracy(const std::vector<CertificationRecord>& records, const std::vector<int>& labels) {
    if (records.size() != labels.size())
        throw std::invalid_argument("smooth_accuracy: one record per labeled example required");
    if (records.empty()) return 0.0;
    int hits = 0;
    for (std::size_t i = 0; i < records.size(); ++i)
        if (records[i].predicted != kAbstain && records[i].predicted == labels[i]) ++hits;
    return static_cast<double>(hits) / records.size();
}

} // namespace zods
