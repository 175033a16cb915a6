#pragma once

#include <cstdint>

#include "zods/tensor.hpp"

namespace zods {

/// Counter-based random stream. A draw is a pure function of
/// (seed, stream id, counter), so identical streams replay bit-identically
/// and child streams split off a parent never collide with it.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();
    double next_uniform();  // (0, 1]
    double next_gaussian(); // N(0, 1), Box-Muller, consumes two uniforms
    int next_below(int n);  // uniform in [0, n)

    /// Independent child stream keyed by `key`; the parent's counter is untouched.
    RngStream split(std::uint64_t key) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
    std::uint64_t base_; // mixed (seed, stream)
};

Tensor sample_gaussian(RngStream& rng, Shape shape, double sigma);
Tensor sample_unit_sphere(RngStream& rng, int dim);

template <typename T>
void shuffle_indices(RngStream& rng, std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
        const int j = rng.next_below(i + 1);
        std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
}

} // namespace zods
