#pragma once

#include "mmkd/nn/autograd.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mmkd::eval {

// Top-two principal components of the rows of `data`.
struct Pca2 {
  nn::Matrix components;             // 2 x D, orthonormal rows
  std::array<double, 2> variance{};  // sample variance along each component
  nn::Matrix coords;                 // N x 2
  nn::RowVector mean;
};

// Exact eigendecomposition of the N x N Gram matrix of the centred rows.
// Each component's sign is fixed so its largest-magnitude entry is
// positive. When the data has rank < 2 the missing direction is completed
// orthogonally and its variance is measured, not assumed.
Pca2 pca2(const nn::Matrix& data);

struct PcaSample {
  std::string id;
  nn::Matrix spectrogram;  // frames x bins
  std::size_t label = 0;
  double duration = 0.0;   // seconds
};

struct DurationBin {
  std::string name;
  double lo = 0.0;  // exclusive, except for the first bin
  double hi = 0.0;  // inclusive
};

// "<=10s" and "10-25s".
std::vector<DurationBin> default_duration_bins();

struct PcaProjection {
  DurationBin bin;
  Eigen::Index frames = 0;  // common frame count after zero padding
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  std::vector<double> durations;
  Pca2 pca;
};

// Draws `n_per_group` samples per (bin, class) with a seeded shuffle,
// zero-pads each bin to its longest spectrogram, flattens and projects.
// Samples longer than the last bin are ignored. InsufficientSamples when a
// bin lacks enough samples of some class.
std::vector<PcaProjection> pca_spectrograms(const std::vector<PcaSample>& samples,
                                            std::size_t num_classes,
                                            std::size_t n_per_group = 10,
                                            std::uint64_t seed = 0,
                                            const std::vector<DurationBin>& bins =
                                                default_duration_bins());

// One scatter panel per bin, points coloured by class and labelled with
// the post id; a CSV sidecar (id,x,y,class,duration,bin) is written next to
// the SVG with the same stem.
void write_pca_plot(const std::vector<PcaProjection>& projections,
                    const std::vector<std::string>& classes, const std::filesystem::path& svg);

}  // namespace mmkd::eval
