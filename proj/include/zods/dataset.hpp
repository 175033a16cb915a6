#pragma once

#include <string>
#include <vector>

#include "zods/rng.hpp"
#include "zods/tensor.hpp"

namespace zods {

/// Labeled (classification) or unlabeled (reconstruction) image collection.
/// Pixels live in [0, 1]; images are stored as one (n, c, h, w) tensor.
struct Dataset {
    Tensor images; // (n, c, h, w)
    std::vector<int> labels;
    std::string split;

    int size() const { return images.empty() ? 0 : images.shape()[0]; }
    bool has_labels() const { return !labels.empty(); }
    int num_classes() const;
    Shape example_shape() const;
    Tensor example(int i) const;
    int label(int i) const;

    void validate() const;
};

/// File format: magic "ZODSDATA", version u32, n u32, c u32, h u32, w u32,
/// has_labels u8, image float64s row-major, labels u32 (when present);
/// little-endian throughout.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

/// Synthetic 8x8 grayscale digits: fixed stroke glyphs for classes 0-9 with
/// per-sample jitter, intensity scaling, and pixel noise. Deterministic in
/// (seed, n, num_classes).
Dataset make_toy_digits(int n, std::uint64_t seed, int num_classes = 10, const std::string& split = "train");

/// Two linearly separable Gaussian blobs as (1,1,2) images; sanity dataset.
Dataset make_blobs(int n, std::uint64_t seed, double separation = 4.0);

std::uint64_t fnv1a_bytes(const unsigned char* data, std::size_t len);
std::uint64_t dataset_checksum(const Dataset& ds);

} // namespace zods
