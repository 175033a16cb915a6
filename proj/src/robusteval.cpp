#include "zods/robusteval.hpp"

#include <algorithm>
#include <cmath>

#include "zods/errors.hpp"

namespace zods {

MeasurementModel MeasurementModel::identity(int d) {
    if (d < 1) throw std::invalid_argument("measurement: d must be >= 1");
    MeasurementModel mm;
    mm.kind = MeasurementKind::Identity;
    mm.m = d;
    mm.d = d;
    return mm;
}

MeasurementModel MeasurementModel::gaussian_rows(int m, int d, std::uint64_t seed) {
    if (d < 1 || m < 1) throw std::invalid_argument("measurement: m and d must be >= 1");
    if (m > d) throw std::invalid_argument("measurement: m must be <= d");
    MeasurementModel mm;
    mm.kind = MeasurementKind::GaussianRows;
    mm.m = m;
    mm.d = d;
    RngStream rng(seed, 0xA77Au);
    mm.a = Tensor({m, d});
    const double s = 1.0 / std::sqrt(static_cast<double>(m));
    for (int i = 0; i < mm.a.size(); ++i) mm.a[i] = s * rng.next_gaussian();
    return mm;
}

Tensor MeasurementModel::apply_ata(const Tensor& flat) const {
    if (flat.size() != d)
        throw std::invalid_argument("measurement: input dimension " + std::to_string(flat.size()) + ", expected " +
                                    std::to_string(d));
    if (kind == MeasurementKind::Identity) return flat;
    Tensor y({m});
    for (int i = 0; i < m; ++i) {
        const double* row = a.data() + static_cast<std::ptrdiff_t>(i) * d;
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += row[j] * flat[j];
        y[i] = s;
    }
    Tensor out({d});
    for (int i = 0; i < m; ++i) {
        const double* row = a.data() + static_cast<std::ptrdiff_t>(i) * d;
        for (int j = 0; j < d; ++j) out[j] += row[j] * y[i];
    }
    return out;
}

Tensor measure(const MeasurementModel& mm, const Tensor& x) {
    return mm.apply_ata(x.flattened()).reshaped(x.shape());
}

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw std::invalid_argument("attack: epsilon must be >= 0");
    if (steps < 0) throw std::invalid_argument("attack: steps must be >= 0");
    if (step_size < 0.0) throw std::invalid_argument("attack: step_size must be >= 0");
}

Tensor pgd_l2(const LossGradFn& loss_grad, const Tensor& x, const AttackConfig& cfg) {
    cfg.validate();
    const double step = cfg.step_size > 0.0 ? cfg.step_size : cfg.epsilon / 10.0;
    Tensor delta(x.shape());
    for (int it = 0; it < cfg.steps; ++it) {
        const auto [loss, grad] = loss_grad(add(x, delta));
        (void)loss;
        const double gn = norm2(grad);
        if (gn == 0.0) continue; // no ascent direction this step
        axpy(step / gn, grad, delta);
        const double dn = norm2(delta);
        if (dn > cfg.epsilon) {
            const double shrink = cfg.epsilon > 0.0 ? cfg.epsilon / dn : 0.0;
            for (int i = 0; i < delta.size(); ++i) delta[i] *= shrink;
        }
    }
    return delta;
}

double rmse(const Tensor& x_true, const Tensor& x_est) {
    require_same_shape(x_true, x_est, "rmse");
    return std::sqrt(squared_error(x_est, x_true, true));
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    const double c = (size - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double v = std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(i) * size + j] = v;
            total += v;
        }
    for (double& v : w) v /= total;
    return w;
}

} // namespace

double ssim(const Tensor& x_true, const Tensor& x_est) {
    require_same_shape(x_true, x_est, "ssim");
    if (x_true.shape().size() != 3) return ssim(x_true.reshaped({1, 1, x_true.size()}), x_est.reshaped({1, 1, x_est.size()}));
    const int c = x_true.shape()[0], h = x_true.shape()[1], w = x_true.shape()[2];
    const int win = std::min({8, h, w});
    const std::vector<double> g = gaussian_window(win, 1.5);
    constexpr double kC1 = 0.01 * 0.01; // (0.01 L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;

    double total = 0.0;
    int count = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y + win <= h; ++y)
            for (int x0 = 0; x0 + win <= w; ++x0) {
                double mx = 0.0, my = 0.0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double wt = g[static_cast<std::size_t>(i) * win + j];
                        mx += wt * x_true.at3(ch, y + i, x0 + j);
                        my += wt * x_est.at3(ch, y + i, x0 + j);
                    }
                double vx = 0.0, vy = 0.0, cov = 0.0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double wt = g[static_cast<std::size_t>(i) * win + j];
                        const double dx = x_true.at3(ch, y + i, x0 + j) - mx;
                        const double dy = x_est.at3(ch, y + i, x0 + j) - my;
                        vx += wt * dx * dx;
                        vy += wt * dy * dy;
                        cov += wt * dx * dy;
                    }
                total += ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
                         ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                ++count;
            }
    return count > 0 ? total / count : 1.0;
}

std::vector<AttackRow> attack_table(std::vector<ReconstructionPipeline>& methods, const Dataset& data,
                                    const std::vector<double>& epsilons, const AttackConfig& base_cfg) {
    if (data.size() == 0) throw std::invalid_argument("attack_table: empty dataset");
    std::vector<AttackRow> rows;
    for (auto& method : methods) {
        for (double eps : epsilons) {
            AttackConfig cfg = base_cfg;
            cfg.epsilon = eps;
            AttackRow row;
            row.method = method.name;
            row.epsilon = eps;
            for (int i = 0; i < data.size(); ++i) {
                const Tensor x = data.example(i);
                Tensor x_adv = x;
                if (eps > 0.0 && cfg.steps > 0) {
                    auto fn = [&](const Tensor& xp) { return method.loss_grad(xp, x); };
                    const Tensor delta = pgd_l2(fn, x, cfg);
                    x_adv = clamp01(add(x, delta));
                }
                const Tensor rec = clamp01(method.reconstruct(x_adv));
                row.rmse += rmse(x, rec);
                row.ssim += ssim(x, rec);
            }
            row.rmse /= data.size();
            row.ssim /= data.size();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace zods
