#include "fedback/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "fedback/errors.hpp"

namespace fedback {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Vector gaussian_vector(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = scale * normal(rng);
  return v;
}

Partition try_dirichlet(const std::vector<int>& labels, std::size_t clients, double beta,
                        std::mt19937_64& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t j = 0; j < labels.size(); ++j) by_class[labels[j]].push_back(j);

  Partition parts(clients);
  std::gamma_distribution<double> gamma(beta, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> cumulative(clients);
  for (const auto& [label, members] : by_class) {
    double total = 0.0;
    for (std::size_t i = 0; i < clients; ++i) {
      total += gamma(rng);
      cumulative[i] = total;
    }
    for (std::size_t sample : members) {
      std::size_t owner = clients - 1;
      if (total > 0.0) {
        const double u = unit(rng) * total;
        owner = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        owner = std::min(owner, clients - 1);
      }
      parts[owner].push_back(sample);
    }
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return parts;
}

}  // namespace

Dataset generate_synthetic(Task task, std::size_t samples, std::size_t features, int classes,
                           std::uint64_t seed, const SyntheticOptions& options) {
  require(samples >= 1, "synthetic dataset needs n >= 1");
  require(features >= 1, "synthetic dataset needs d >= 1");
  require(classes >= 1, "synthetic dataset needs at least one class");
  require(task == Task::regression || classes >= 2, "classification needs at least two classes");

  auto rng = make_rng(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(features);

  std::vector<Vector> centres;
  std::vector<Vector> parameters;
  for (int c = 0; c < classes; ++c) centres.push_back(gaussian_vector(rng, features, options.cluster_spread));

  Dataset data;
  data.classes = classes;
  if (task == Task::regression) {
    data.planted = gaussian_vector(rng, features, 1.0);
    for (int c = 0; c < classes; ++c) {
      parameters.push_back(data.planted + gaussian_vector(rng, features, options.heterogeneity));
    }
  }

  data.features.resize(static_cast<Eigen::Index>(samples), d);
  data.response.resize(static_cast<Eigen::Index>(samples));
  data.labels.resize(samples);
  for (std::size_t j = 0; j < samples; ++j) {
    const int label = static_cast<int>(j % static_cast<std::size_t>(classes));
    const auto row = static_cast<Eigen::Index>(j);
    for (Eigen::Index q = 0; q < d; ++q) data.features(row, q) = centres[label](q) + normal(rng);
    data.labels[j] = label;
    if (task == Task::regression) {
      data.response(row) = data.features.row(row).dot(parameters[label]) + options.noise * normal(rng);
    } else {
      data.response(row) = static_cast<double>(label);
    }
  }
  return data;
}

Dataset load_delimited(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string(), 0, "");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("dataset has no header row", 1, "");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), delimiter)) + 1;
  if (columns < 2) throw ParseError("dataset needs at least one feature and a label", 1, "");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, delimiter)) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("bad number '" + cell + "' in row " + std::to_string(row_number), row_number,
                         "column " + std::to_string(values.size()));
      }
      values.push_back(v);
    }
    if (values.size() != columns) {
      throw ParseError("row " + std::to_string(row_number) + " has " + std::to_string(values.size()) +
                           " columns, header has " + std::to_string(columns),
                       row_number, "");
    }
    const double label = values.back();
    if (label < 0.0 || label != static_cast<double>(static_cast<int>(label))) {
      throw ParseError("label must be a nonnegative integer in row " + std::to_string(row_number),
                       row_number, "label");
    }
    labels.push_back(static_cast<int>(label));
    values.pop_back();
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("dataset has no data rows", row_number, "");

  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns - 1));
  data.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t q = 0; q + 1 < columns; ++q) {
      data.features(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(q)) = rows[j][q];
    }
    data.response(static_cast<Eigen::Index>(j)) = labels[j];
  }
  data.classes = *std::max_element(labels.begin(), labels.end()) + 1;
  data.labels = std::move(labels);
  return data;
}

Partition dirichlet_partition(const std::vector<int>& labels, std::size_t clients, double beta,
                              std::uint64_t seed) {
  require(beta > 0.0, "Dirichlet concentration must be positive");
  require(clients >= 1, "partition needs at least one client");
  require(labels.size() >= clients, "fewer samples than clients");
  for (int attempt = 0; attempt < kMaxPartitionRetries; ++attempt) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(attempt) + 1);
    Partition parts = try_dirichlet(labels, clients, beta, rng);
    const bool all_nonempty =
        std::none_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); });
    if (all_nonempty) return parts;
  }
  throw ContractViolation("Dirichlet partition left a client empty after " +
                          std::to_string(kMaxPartitionRetries) + " draws");
}

Partition label_shard_partition(const std::vector<int>& labels, std::size_t clients,
                                int shards_per_client, std::uint64_t seed) {
  require(clients >= 1, "partition needs at least one client");
  require(shards_per_client >= 1, "shards_per_client must be positive");
  const std::size_t shards = clients * static_cast<std::size_t>(shards_per_client);
  if (labels.empty() || labels.size() % shards != 0) {
    throw ContractViolation("sample pool of " + std::to_string(labels.size()) +
                            " does not divide into " + std::to_string(shards) + " shards");
  }
  const std::size_t shard_size = labels.size() / shards;

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  for (std::size_t s = 0; s < shards; ++s) {
    if (labels[order[s * shard_size]] != labels[order[(s + 1) * shard_size - 1]]) {
      throw ContractViolation("class sizes are not multiples of the shard size " +
                              std::to_string(shard_size));
    }
  }

  std::vector<std::size_t> deal(shards);
  std::iota(deal.begin(), deal.end(), 0);
  auto rng = make_rng(seed, 0);
  std::shuffle(deal.begin(), deal.end(), rng);

  Partition parts(clients);
  for (std::size_t i = 0; i < clients; ++i) {
    for (int k = 0; k < shards_per_client; ++k) {
      const std::size_t shard = deal[i * static_cast<std::size_t>(shards_per_client) + k];
      for (std::size_t j = 0; j < shard_size; ++j) parts[i].push_back(order[shard * shard_size + j]);
    }
    std::sort(parts[i].begin(), parts[i].end());
  }
  return parts;
}

Partition make_partition(const std::vector<int>& labels, std::size_t clients,
                         const PartitionSpec& spec) {
  if (spec.scheme == PartitionScheme::dirichlet) {
    return dirichlet_partition(labels, clients, spec.beta, spec.seed);
  }
  return label_shard_partition(labels, clients, spec.shards_per_client, spec.seed);
}

}  // namespace fedback
