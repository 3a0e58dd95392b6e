#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedback/types.hpp"

namespace fedback {

enum class Task { regression, classification };

/// A pooled dataset before partitioning. `labels` exist for both tasks: for
/// regression they name the Gaussian cluster a row was drawn from, which is
/// what the non-i.i.d. partitioners split on.
struct Dataset {
  Matrix features;
  Vector response;
  std::vector<int> labels;
  int classes = 1;
  /// Shared planted parameter (regression only).
  Vector planted;
};

struct SyntheticOptions {
  double noise = 0.1;
  /// Standard deviation of the class cluster centres.
  double cluster_spread = 1.0;
  /// Regression: per-class perturbation scale of the planted parameter.
  double heterogeneity = 0.0;
};

/// Deterministic per seed. Labels are balanced (row j has label j mod classes).
Dataset generate_synthetic(Task task, std::size_t samples, std::size_t features, int classes,
                           std::uint64_t seed, const SyntheticOptions& options = {});

/// Delimited text with a header row; every column but the last is a
/// feature, the last column is an integer class label. The response is the
/// label converted to double.
Dataset load_delimited(const std::filesystem::path& path, char delimiter = ',');

enum class PartitionScheme { dirichlet, label_shard };

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::dirichlet;
  double beta = 0.5;
  int shards_per_client = 2;
  std::uint64_t seed = 0;
};

/// partition[i] lists the sample indices held by client i, ascending.
using Partition = std::vector<std::vector<std::size_t>>;

inline constexpr int kMaxPartitionRetries = 100;

/// Per class c, p_c ~ Dirichlet(beta 1_N); each sample of class c goes to a
/// client drawn from p_c. Outcomes with an empty client are redrawn with an
/// incremented sub-seed; throws ContractViolation after kMaxPartitionRetries.
Partition dirichlet_partition(const std::vector<int>& labels, std::size_t clients, double beta,
                              std::uint64_t seed);

/// Sorts samples by label, cuts them into clients * shards_per_client equal
/// shards that never cross a label boundary, and deals shards at random.
Partition label_shard_partition(const std::vector<int>& labels, std::size_t clients,
                                int shards_per_client, std::uint64_t seed);

Partition make_partition(const std::vector<int>& labels, std::size_t clients,
                         const PartitionSpec& spec);

}  // namespace fedback
