#include "zods/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

#include "zods/errors.hpp"

namespace zods {

namespace {

constexpr char kMagic[8] = {'Z', 'O', 'D', 'S', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is, std::size_t& offset, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw format_error(std::string("truncated reading ") + what, offset);
    offset += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is, std::size_t& offset, const char* what) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw format_error(std::string("truncated reading ") + what, offset);
    offset += 8;
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

int Dataset::num_classes() const {
    if (!has_labels()) return 0;
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

Shape Dataset::example_shape() const {
    const Shape& s = images.shape();
    return {s[1], s[2], s[3]};
}

Tensor Dataset::example(int i) const {
    const Shape& s = images.shape();
    if (i < 0 || i >= s[0]) throw std::invalid_argument("dataset example index out of range");
    const int sz = s[1] * s[2] * s[3];
    Tensor out({s[1], s[2], s[3]});
    std::copy_n(images.data() + static_cast<std::ptrdiff_t>(i) * sz, sz, out.data());
    return out;
}

int Dataset::label(int i) const {
    if (!has_labels()) throw std::logic_error("dataset has no labels");
    return labels[static_cast<std::size_t>(i)];
}

void Dataset::validate() const {
    if (images.empty()) return;
    if (images.shape().size() != 4) throw std::invalid_argument("dataset images must be (n,c,h,w)");
    if (has_labels()) {
        if (static_cast<int>(labels.size()) != size())
            throw std::invalid_argument("dataset label count does not match image count");
        for (int l : labels)
            if (l < 0) throw std::invalid_argument("dataset labels must be nonnegative");
    }
    for (int i = 0; i < images.size(); ++i) {
        const double v = images[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("dataset pixel " + std::to_string(i) + " outside [0,1]: " + std::to_string(v));
    }
}

void save_dataset(const std::string& path, const Dataset& ds) {
    ds.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    const bool empty = ds.images.empty();
    const Shape s = empty ? Shape{0, 1, 1, 1} : ds.images.shape();
    put_u32(os, static_cast<std::uint32_t>(empty ? 0 : s[0]));
    put_u32(os, static_cast<std::uint32_t>(s[1]));
    put_u32(os, static_cast<std::uint32_t>(s[2]));
    put_u32(os, static_cast<std::uint32_t>(s[3]));
    os.put(ds.has_labels() ? 1 : 0);
    for (int i = 0; i < ds.images.size(); ++i) put_f64(os, ds.images[i]);
    for (int l : ds.labels) put_u32(os, static_cast<std::uint32_t>(l));
    if (!os) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::size_t offset = 0;
    char magic[8];
    if (!is.read(magic, 8)) throw format_error("truncated magic", offset);
    offset += 8;
    if (std::memcmp(magic, kMagic, 8) != 0) throw format_error("bad magic, not a dataset file", 0);
    const std::uint32_t version = get_u32(is, offset, "version");
    if (version != kVersion) throw format_error("unsupported dataset version " + std::to_string(version), 8);
    const std::uint32_t n = get_u32(is, offset, "n");
    const std::uint32_t c = get_u32(is, offset, "c");
    const std::uint32_t h = get_u32(is, offset, "h");
    const std::uint32_t w = get_u32(is, offset, "w");
    char has_labels_byte = 0;
    if (!is.get(has_labels_byte)) throw format_error("truncated reading has_labels", offset);
    offset += 1;

    Dataset ds;
    if (n > 0) {
        Tensor images({static_cast<int>(n), static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)});
        for (int i = 0; i < images.size(); ++i) images[i] = get_f64(is, offset, "image data");
        ds.images = std::move(images);
        if (has_labels_byte) {
            ds.labels.resize(n);
            for (std::uint32_t i = 0; i < n; ++i)
                ds.labels[i] = static_cast<int>(get_u32(is, offset, "label data"));
        }
    }
    ds.validate();
    return ds;
}

namespace {

// 8x8 stroke glyphs for digits 0-9 ('#' = ink)
const std::array<std::array<const char*, 8>, 10> kGlyphs = {{
    {{"........", ".######.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".######.", "........"}},
    {{"........", "...##...", "..###...", "...##...", "...##...", "...##...", ".######.", "........"}},
    {{"........", ".######.", "......#.", ".######.", ".#......", ".#......", ".######.", "........"}},
    {{"........", ".######.", "......#.", "..####..", "......#.", "......#.", ".######.", "........"}},
    {{"........", ".#....#.", ".#....#.", ".######.", "......#.", "......#.", "......#.", "........"}},
    {{"........", ".######.", ".#......", ".######.", "......#.", "......#.", ".######.", "........"}},
    {{"........", ".######.", ".#......", ".######.", ".#....#.", ".#....#.", ".######.", "........"}},
    {{"........", ".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "........"}},
    {{"........", ".######.", ".#....#.", ".######.", ".#....#.", ".#....#.", ".######.", "........"}},
    {{"........", ".######.", ".#....#.", ".######.", "......#.", "......#.", ".######.", "........"}},
}};

} // namespace

Dataset make_toy_digits(int n, std::uint64_t seed, int num_classes, const std::string& split) {
    if (n < 0) throw std::invalid_argument("make_toy_digits: n must be >= 0");
    if (num_classes < 1 || num_classes > 10)
        throw std::invalid_argument("make_toy_digits: num_classes must be in [1,10]");
    RngStream rng(seed, 0xD161ULL);
    Dataset ds;
    ds.split = split;
    if (n == 0) return ds;
    ds.images = Tensor({n, 1, 8, 8});
    ds.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int cls = i % num_classes;
        ds.labels[static_cast<std::size_t>(i)] = cls;
        const int dy = rng.next_below(3) - 1;
        const int dx = rng.next_below(3) - 1;
        const double intensity = 0.75 + 0.25 * rng.next_uniform();
        double* img = ds.images.data() + static_cast<std::ptrdiff_t>(i) * 64;
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                const int sy = y - dy, sx = x - dx;
                double v = 0.0;
                if (sy >= 0 && sy < 8 && sx >= 0 && sx < 8 && kGlyphs[static_cast<std::size_t>(cls)][static_cast<std::size_t>(sy)][sx] == '#')
                    v = intensity;
                v += 0.05 * rng.next_gaussian();
                img[y * 8 + x] = std::min(1.0, std::max(0.0, v));
            }
    }
    return ds;
}

Dataset make_blobs(int n, std::uint64_t seed, double separation) {
    if (n < 0) throw std::invalid_argument("make_blobs: n must be >= 0");
    RngStream rng(seed, 0xB10B5ULL);
    Dataset ds;
    ds.split = "blobs";
    if (n == 0) return ds;
    ds.images = Tensor({n, 1, 1, 2});
    ds.labels.resize(static_cast<std::size_t>(n));
    // class centers at 0.5 +/- separation*0.05 in both coordinates
    for (int i = 0; i < n; ++i) {
        const int cls = i % 2;
        ds.labels[static_cast<std::size_t>(i)] = cls;
        const double cx = 0.5 + (cls == 0 ? -1.0 : 1.0) * separation * 0.05;
        for (int k = 0; k < 2; ++k) {
            double v = cx + 0.02 * rng.next_gaussian();
            ds.images[i * 2 + k] = std::min(1.0, std::max(0.0, v));
        }
    }
    return ds;
}

std::uint64_t fnv1a_bytes(const unsigned char* data, std::size_t len) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t dataset_checksum(const Dataset& ds) {
    std::uint64_t h = fnv1a_bytes(reinterpret_cast<const unsigned char*>(ds.images.data()),
                                  static_cast<std::size_t>(ds.images.size()) * 8);
    if (ds.has_labels())
        h ^= fnv1a_bytes(reinterpret_cast<const unsigned char*>(ds.labels.data()), ds.labels.size() * sizeof(int));
    return h;
}

} // namespace zods
