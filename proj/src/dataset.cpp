#include "vaecert/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>

#include "vaecert/rng.hpp"

namespace vaecert::data {

using num::RngStream;

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::map<std::string, std::string> parse_kv(const std::string& s) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    const std::string item = s.substr(pos, comma - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("dataset spec: expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
    pos = comma + 1;
  }
  return kv;
}

std::uint64_t kv_u64(const std::map<std::string, std::string>& kv, const std::string& key,
                     std::uint64_t fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stoull(it->second);
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key,
                 double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stod(it->second);
}

}  // namespace

Dataset make_gaussian_blobs(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed,
                            double std) {
  if (n == 0 || d == 0 || k == 0) throw std::invalid_argument("blobs: n, d, k must be positive");
  if (std < 0.0) throw std::invalid_argument("blobs: std must be non-negative");
  RngStream rng(seed, 0xb10b5u);
  std::vector<Tensor> centers;
  for (std::size_t c = 0; c < k; ++c) {
    Tensor center({d});
    for (std::size_t j = 0; j < d; ++j) center[j] = 0.25 + 0.5 * rng.uniform();
    centers.push_back(std::move(center));
  }
  Dataset ds;
  ds.dim = d;
  ds.source = "blobs";
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& c = centers[i % k];
    Tensor x({d});
    for (std::size_t j = 0; j < d; ++j) x[j] = clamp01(c[j] + std * rng.gaussian());
    ds.items.push_back(std::move(x));
  }
  return ds;
}

Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("moons: n must be positive");
  RngStream rng(seed, 0x3005u);
  Dataset ds;
  ds.dim = 2;
  ds.source = "moons";
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::numbers::pi * rng.uniform();
    double px, py;
    if (i % 2 == 0) {
      px = std::cos(t);
      py = std::sin(t);
    } else {
      px = 1.0 - std::cos(t);
      py = 0.5 - std::sin(t);
    }
    px += noise * rng.gaussian();
    py += noise * rng.gaussian();
    // map the [-1.1, 2.1] x [-0.7, 1.1] region into the unit square
    Tensor x({2});
    x[0] = clamp01((px + 1.1) / 3.2);
    x[1] = clamp01((py + 0.7) / 1.8);
    ds.items.push_back(std::move(x));
  }
  return ds;
}

Dataset make_bars(std::size_t n, std::size_t side, std::uint64_t seed) {
  if (n == 0 || side == 0) throw std::invalid_argument("bars: n and side must be positive");
  RngStream rng(seed, 0xba25u);
  Dataset ds;
  ds.dim = side * side;
  ds.source = "bars";
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x({side * side});
    const bool horizontal = rng.below(2) == 0;
    const std::size_t idx = rng.below(side);
    const double intensity = 0.55 + 0.45 * rng.uniform();
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        const bool on = horizontal ? r == idx : c == idx;
        double v = on ? intensity : 0.08;
        v += 0.02 * rng.gaussian();
        x[r * side + c] = clamp01(v);
      }
    }
    ds.items.push_back(std::move(x));
  }
  return ds;
}

namespace {

std::uint32_t read_be_u32(const std::vector<unsigned char>& buf, std::size_t offset,
                          const char* what) {
  if (offset + 4 > buf.size()) throw FormatError(std::string("idx: truncated ") + what, buf.size());
  return (static_cast<std::uint32_t>(buf[offset]) << 24) |
         (static_cast<std::uint32_t>(buf[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[offset + 2]) << 8) |
         static_cast<std::uint32_t>(buf[offset + 3]);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("idx: cannot open file " + path, 0);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  return buf;
}

}  // namespace

Dataset load_idx_images(const std::string& path) {
  const std::vector<unsigned char> buf = read_file(path);
  if (buf.empty()) throw FormatError("idx: empty file", 0);
  const std::uint32_t magic = read_be_u32(buf, 0, "magic");
  if (magic != 0x00000803u) throw FormatError("idx: bad image magic number", 0);
  const std::uint32_t count = read_be_u32(buf, 4, "count");
  const std::uint32_t rows = read_be_u32(buf, 8, "rows");
  const std::uint32_t cols = read_be_u32(buf, 12, "cols");
  const std::size_t need = 16 + static_cast<std::size_t>(count) * rows * cols;
  if (buf.size() < need) throw FormatError("idx: truncated payload", buf.size());

  Dataset ds;
  ds.dim = static_cast<std::size_t>(rows) * cols;
  ds.source = "idx:" + path;
  std::size_t off = 16;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor x({ds.dim});
    for (std::size_t j = 0; j < ds.dim; ++j) x[j] = static_cast<double>(buf[off + j]) / 255.0;
    off += ds.dim;
    ds.items.push_back(std::move(x));
  }
  return ds;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
  const std::vector<unsigned char> buf = read_file(path);
  if (buf.empty()) throw FormatError("idx: empty file", 0);
  const std::uint32_t magic = read_be_u32(buf, 0, "magic");
  if (magic != 0x00000801u) throw FormatError("idx: bad label magic number", 0);
  const std::uint32_t count = read_be_u32(buf, 4, "count");
  if (buf.size() < 8 + count) throw FormatError("idx: truncated payload", buf.size());
  return std::vector<std::uint8_t>(buf.begin() + 8, buf.begin() + 8 + count);
}

Dataset ingest_dataset(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string kind = colon == std::string::npos ? spec : spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);

  if (kind == "idx") {
    if (rest.empty()) throw std::invalid_argument("dataset spec: idx requires a path");
    return load_idx_images(rest);
  }
  const auto kv = parse_kv(rest);
  if (kind == "blobs") {
    return make_gaussian_blobs(kv_u64(kv, "n", 512), kv_u64(kv, "d", 16), kv_u64(kv, "k", 4),
                               kv_u64(kv, "seed", 0), kv_double(kv, "std", 0.06));
  }
  if (kind == "moons") {
    return make_two_moons(kv_u64(kv, "n", 512), kv_double(kv, "noise", 0.08),
                          kv_u64(kv, "seed", 0));
  }
  if (kind == "bars") {
    return make_bars(kv_u64(kv, "n", 256), kv_u64(kv, "side", 4), kv_u64(kv, "seed", 0));
  }
  throw std::invalid_argument("dataset spec: unknown generator '" + kind + "'");
}

}  // namespace vaecert::data
