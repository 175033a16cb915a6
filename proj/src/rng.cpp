#include "zods/rng.hpp"

#include <cmath>

namespace zods {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id), counter_(0), base_(mix64(mix64(seed + kGolden) ^ stream_id)) {}

std::uint64_t RngStream::next_u64() { return mix64(base_ + (counter_++) * kGolden); }

double RngStream::next_uniform() {
    // 53-bit mantissa, shifted into (0, 1]
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int RngStream::next_below(int n) {
    if (n <= 0) throw std::invalid_argument("next_below requires n >= 1");
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
}

RngStream RngStream::split(std::uint64_t key) const {
    return RngStream(seed_, mix64(stream_ ^ mix64(key + 0xD1B54A32D192ED03ULL)));
}

Tensor sample_gaussian(RngStream& rng, Shape shape, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("sample_gaussian: sigma must be >= 0");
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t[i] = sigma * rng.next_gaussian();
    return t;
}

Tensor sample_unit_sphere(RngStream& rng, int dim) {
    if (dim < 1) throw std::invalid_argument("sample_unit_sphere: dim must be >= 1");
    Tensor u({dim});
    double n = 0.0;
    do {
        for (int i = 0; i < dim; ++i) u[i] = rng.next_gaussian();
        n = norm2(u);
    } while (n == 0.0);
    for (int i = 0; i < dim; ++i) u[i] /= n;
    return u;
}

} // namespace zods
