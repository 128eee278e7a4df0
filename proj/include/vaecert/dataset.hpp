#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaecert/tensor.hpp"

namespace vaecert::data {

using num::Tensor;

/// Malformed input file; carries the byte offset of the problem.
struct FormatError : std::runtime_error {
  FormatError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

struct Dataset {
  std::vector<Tensor> items;  // each rank-1, values in [0,1]
  std::size_t dim = 0;
  std::string source;
};

/// Parses a dataset spec and materializes it. Specs:
///   blobs:n=512,d=16,k=4,std=0.06,seed=7   gaussian clusters in [0,1]^d
///   moons:n=512,noise=0.08,seed=7  two interleaved arcs in [0,1]^2
///   bars:n=256,side=4,seed=7       single-bar images on a side x side grid
///   idx:PATH                       IDX image file
/// Deterministic given the seed. Throws FormatError for malformed files and
/// std::invalid_argument for malformed specs.
Dataset ingest_dataset(const std::string& spec);

Dataset make_gaussian_blobs(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed,
                            double std = 0.06);
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);
Dataset make_bars(std::size_t n, std::size_t side, std::uint64_t seed);

/// Big-endian IDX images (magic 0x00000803): count, rows, cols, then one
/// unsigned byte per pixel, scaled to [0,1].
Dataset load_idx_images(const std::string& path);

/// Big-endian IDX labels (magic 0x00000801).
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

}  // namespace vaecert::data
