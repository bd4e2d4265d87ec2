#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bbm/engine.hpp"
#include "bbm/model.hpp"
#include "bbm/stats.hpp"

namespace bbm {

/// Partition of {0..n-1} stored as a restricted growth string: labels[i] is
/// the block of element i, blocks numbered in order of first appearance.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<int> labels);

  static Partition singletons(int n);

  int size() const { return static_cast<int>(labels_.size()); }
  int block_count() const;
  const std::vector<int>& labels() const { return labels_; }
  /// Blocks with 1-based members, in canonical order.
  std::vector<std::vector<int>> blocks() const;

  /// True when every block of *this lies inside a block of `coarser`.
  bool refines(const Partition& coarser) const;

  /// Merges the given block indices into one block.
  Partition merge(std::span<const int> block_indices) const;

  /// Image under the relabeling i -> perm[i].
  Partition relabel(std::span<const int> perm) const;

  bool operator==(const Partition&) const = default;
  auto operator<=>(const Partition&) const = default;

 private:
  std::vector<int> labels_;
};

enum class PartitionSource { EmpiricalBbm, BolthausenSznitman };

std::string_view to_string(PartitionSource s);

/// Time-indexed partitions of {1..n}. The first event is at time 0; each
/// later event coarsens the previous one and has strictly fewer blocks.
struct PartitionProcess {
  int n = 0;
  std::vector<std::pair<double, Partition>> events;
  PartitionSource source = PartitionSource::BolthausenSznitman;

  /// Throws DomainError when the coarsening invariants fail.
  void validate() const;
  /// Partition in force at time s.
  const Partition& at(double s) const;
  /// Time of the first merge, +inf if none was observed.
  double first_merge_time() const;
};

/// Rate at which one specific k-subset of b blocks merges:
/// (k-2)! (b-k)! / (b-1)!.
double bs_merge_rate(int b, int k);

/// Total jump rate out of a state with b blocks.
double bs_total_rate(int b);

/// Bolthausen-Sznitman coalescent on n singletons, run until one block
/// remains or time exceeds horizon.
PartitionProcess bs_sample(int n, double horizon, Rng& rng);

/// Partition of the sampled particles (alive at T) by their ancestor alive at
/// time T - s, with s in the BBM clock.
Partition extract_partition(std::span<const LineageRecord> genealogy,
                            std::span<const std::int64_t> sampled_ids, double T, double s);

/// Full partition process of the sampled particles, with every merge located
/// at the branching time that separates the lineages. Event times are
/// (T - branch_time) * time_scale.
PartitionProcess empirical_partition_process(std::span<const LineageRecord> genealogy,
                                             std::span<const std::int64_t> sampled_ids, double T,
                                             double time_scale);

struct BlockCountPoint {
  double s = 0.0;
  double mean_empirical = 0.0;
  double mean_reference = 0.0;
};

struct ComparisonReport {
  int n = 0;
  std::size_t n_empirical = 0;
  std::size_t n_reference = 0;
  double time_rescale = 1.0;
  KsResult first_merge_ks;
  std::vector<BlockCountPoint> block_counts;
  double tv_time = 0.0;
  std::optional<double> tv_distance;
  /// Expected total variation between two independent samples of these sizes
  /// from the pooled law; the resampling noise band.
  std::optional<double> tv_noise;
};

/// Compares `empirical` (times multiplied by time_rescale) against
/// `reference`. Block counts are reported on s_grid (empirical clock) and the
/// partition law at tv_time (empirical clock, n <= 5 only).
ComparisonReport compare_coalescents(std::span<const PartitionProcess> empirical,
                                     std::span<const PartitionProcess> reference, int n,
                                     double time_rescale, std::span<const double> s_grid,
                                     double tv_time);

/// Default rescale between the empirical clock and the coalescent clock.
double default_time_rescale();

nlohmann::json to_json(const PartitionProcess& p);
PartitionProcess partition_process_from_json(const nlohmann::json& j);

}  // namespace bbm
