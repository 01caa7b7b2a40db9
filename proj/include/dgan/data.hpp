#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dgan/matrix.hpp"

namespace dgan {

struct Dataset {
    Matrix samples;                          // N x d
    std::optional<std::vector<int>> labels;  // N, values in [0, num_labels)
    std::optional<Matrix> mode_centers;      // M x d, ground truth for synthetic sets

    std::size_t size() const { return samples.rows; }
    std::size_t dim() const { return samples.cols; }
    void validate() const; // throws SpecError
};

// M modes on a circle of the given radius, isotropic Gaussian sigma, per_mode
// samples each; labels are mode indices and mode_centers is filled in.
Dataset make_ring(std::size_t modes, double radius, double sigma, std::size_t per_mode,
                  std::uint64_t seed);

// MNIST-style IDX pair. Pixels map to [-1, 1] via x / 127.5 - 1.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of load_idx for datasets whose samples came from bytes; each sample
// row is stored as a rows x cols image, so rows * cols must equal dim().
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
               std::size_t rows, std::size_t cols);

struct Partition {
    int owner = 0;
    std::vector<std::size_t> indices;
};

using PartitionSet = std::vector<Partition>;

struct ByLabel {
    std::vector<std::vector<int>> groups;
    // Labels claimed by several groups are an error unless allow_shared is
    // set, in which case their samples are dealt round-robin to the claimant
    // groups so index sets stay disjoint.
    bool allow_shared = false;
    // Labels claimed by no group are an error unless allow_unassigned is set.
    bool allow_unassigned = false;
};

struct Shard {
    std::size_t users = 2;
    std::uint64_t seed = 0;
};

using PartitionScheme = std::variant<ByLabel, Shard>;

PartitionSet partition(const Dataset& ds, const PartitionScheme& scheme);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

// header: x0..x{d-1}[,label]; one row per sample, %.17g floats
void dataset_to_csv(const Dataset& ds, const std::string& path);

} // namespace dgan
