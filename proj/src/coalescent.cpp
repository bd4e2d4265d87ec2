#include "bbm/coalescent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace bbm {

Partition::Partition(std::vector<int> labels) {
  // Canonicalize to a restricted growth string.
  std::map<int, int> relabel;
  labels_.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = relabel.try_emplace(l, static_cast<int>(relabel.size()));
    labels_.push_back(it->second);
  }
}

Partition Partition::singletons(int n) {
  std::vector<int> l(static_cast<std::size_t>(n));
  std::iota(l.begin(), l.end(), 0);
  return Partition(std::move(l));
}

int Partition::block_count() const {
  return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end()) + 1;
}

std::vector<std::vector<int>> Partition::blocks() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(block_count()));
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    out[static_cast<std::size_t>(labels_[i])].push_back(static_cast<int>(i) + 1);
  }
  return out;
}

bool Partition::refines(const Partition& coarser) const {
  if (coarser.size() != size()) return false;
  std::vector<int> image(static_cast<std::size_t>(block_count()), -1);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    int& img = image[static_cast<std::size_t>(labels_[i])];
    if (img < 0) {
      img = coarser.labels_[i];
    } else if (img != coarser.labels_[i]) {
      return false;
    }
  }
  return true;
}

Partition Partition::merge(std::span<const int> block_indices) const {
  if (block_indices.empty()) return *this;
  const int target = *std::min_element(block_indices.begin(), block_indices.end());
  std::vector<int> l = labels_;
  for (int& x : l) {
    if (std::find(block_indices.begin(), block_indices.end(), x) != block_indices.end()) x = target;
  }
  return Partition(std::move(l));
}

Partition Partition::relabel(std::span<const int> perm) const {
  std::vector<int> l(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    l[static_cast<std::size_t>(perm[i])] = labels_[i];
  }
  return Partition(std::move(l));
}

std::string_view to_string(PartitionSource s) {
  return s == PartitionSource::EmpiricalBbm ? "empirical_bbm" : "bolthausen_sznitman";
}

void PartitionProcess::validate() const {
  if (events.empty()) throw DomainError("partition process has no events");
  if (events.front().first != 0.0) throw DomainError("partition process must start at time 0");
  for (const auto& [t, p] : events) {
    if (p.size() != n) throw DomainError("partition size differs from n");
  }
  for (std::size_t k = 1; k < events.size(); ++k) {
    const auto& [t0, p0] = events[k - 1];
    const auto& [t1, p1] = events[k];
    if (!(t1 >= t0)) throw DomainError("partition event times not sorted");
    if (!p0.refines(p1)) throw DomainError("partition process does not coarsen");
    if (!(p1.block_count() < p0.block_count())) {
      throw DomainError("block count does not decrease at an event");
    }
  }
}

const Partition& PartitionProcess::at(double s) const {
  const Partition* cur = &events.front().second;
  for (const auto& [t, p] : events) {
    if (t > s) break;
    cur = &p;
  }
  return *cur;
}

double PartitionProcess::first_merge_time() const {
  return events.size() > 1 ? events[1].first : std::numeric_limits<double>::infinity();
}

double bs_merge_rate(int b, int k) {
  if (k < 2 || k > b) throw DomainError("merge size must satisfy 2 <= k <= b");
  return std::exp(std::lgamma(k - 1.0) + std::lgamma(b - k + 1.0) - std::lgamma(static_cast<double>(b)));
}

double bs_total_rate(int b) {
  double total = 0.0;
  for (int k = 2; k <= b; ++k) {
    const double choose = std::exp(std::lgamma(b + 1.0) - std::lgamma(k + 1.0) - std::lgamma(b - k + 1.0));
    total += std::round(choose) * bs_merge_rate(b, k);
  }
  return total;
}

PartitionProcess bs_sample(int n, double horizon, Rng& rng) {
  if (n < 2) throw DomainError("bs_sample requires n >= 2");
  PartitionProcess proc;
  proc.n = n;
  proc.source = PartitionSource::BolthausenSznitman;
  Partition cur = Partition::singletons(n);
  proc.events.emplace_back(0.0, cur);
  double t = 0.0;
  std::vector<double> weights;
  std::vector<int> order;
  while (cur.block_count() > 1) {
    const int b = cur.block_count();
    weights.assign(static_cast<std::size_t>(b + 1), 0.0);
    double total = 0.0;
    for (int k = 2; k <= b; ++k) {
      const double choose =
          std::round(std::exp(std::lgamma(b + 1.0) - std::lgamma(k + 1.0) - std::lgamma(b - k + 1.0)));
      weights[static_cast<std::size_t>(k)] = choose * bs_merge_rate(b, k);
      total += weights[static_cast<std::size_t>(k)];
    }
    t += rng.exponential() / total;
    if (t > horizon) break;
    double u = rng.uniform() * total;
    int k = 2;
    for (; k < b; ++k) {
      if (u < weights[static_cast<std::size_t>(k)]) break;
      u -= weights[static_cast<std::size_t>(k)];
    }
    // Uniform k-subset of the b blocks: partial Fisher-Yates.
    order.resize(static_cast<std::size_t>(b));
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(rng.uniform() * static_cast<double>(b - i));
      std::swap(order[static_cast<std::size_t>(i)], order[std::min(j, order.size() - 1)]);
    }
    cur = cur.merge(std::span<const int>(order.data(), static_cast<std::size_t>(k)));
    proc.events.emplace_back(t, cur);
  }
  return proc;
}

namespace {

const LineageRecord& record(std::span<const LineageRecord> g, std::int64_t id) {
  if (id < 0 || static_cast<std::size_t>(id) >= g.size()) throw DomainError("unknown particle id");
  return g[static_cast<std::size_t>(id)];
}

std::int64_t ancestor_at(std::span<const LineageRecord> g, std::int64_t id, double u) {
  while (true) {
    const auto& rec = record(g, id);
    if (rec.birth_time <= u || rec.parent_id < 0) return id;
    id = rec.parent_id;
  }
}

Partition partition_at(std::span<const LineageRecord> g, std::span<const std::int64_t> ids,
                       double u) {
  std::vector<int> labels;
  std::map<std::int64_t, int> seen;
  for (auto id : ids) {
    const auto anc = ancestor_at(g, id, u);
    auto [it, inserted] = seen.try_emplace(anc, static_cast<int>(seen.size()));
    labels.push_back(it->second);
  }
  return Partition(std::move(labels));
}

void check_sample(std::span<const LineageRecord> g, std::span<const std::int64_t> ids, double T) {
  std::set<std::int64_t> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) throw DomainError("sampled ids are not distinct");
  for (auto id : ids) {
    const auto& rec = record(g, id);
    if (!(rec.birth_time <= T) || !(rec.death_time > T)) {
      throw DomainError("particle " + std::to_string(id) + " is not alive at T");
    }
  }
}

}  // namespace

Partition extract_partition(std::span<const LineageRecord> genealogy,
                            std::span<const std::int64_t> sampled_ids, double T, double s) {
  if (s < 0.0 || s > T) throw DomainError("extract_partition requires 0 <= s <= T");
  check_sample(genealogy, sampled_ids, T);
  return partition_at(genealogy, sampled_ids, T - s);
}

PartitionProcess empirical_partition_process(std::span<const LineageRecord> genealogy,
                                             std::span<const std::int64_t> sampled_ids, double T,
                                             double time_scale) {
  check_sample(genealogy, sampled_ids, T);
  std::set<double, std::greater<>> branch_times;
  for (auto id : sampled_ids) {
    for (auto cur = id; record(genealogy, cur).parent_id >= 0;
         cur = record(genealogy, cur).parent_id) {
      const double b = record(genealogy, cur).birth_time;
      if (b <= T) branch_times.insert(b);
    }
  }
  PartitionProcess proc;
  proc.n = static_cast<int>(sampled_ids.size());
  proc.source = PartitionSource::EmpiricalBbm;
  Partition cur = partition_at(genealogy, sampled_ids, T);
  proc.events.emplace_back(0.0, cur);
  for (double b : branch_times) {
    Partition next =
        partition_at(genealogy, sampled_ids, std::nextafter(b, -std::numeric_limits<double>::infinity()));
    if (next.block_count() < cur.block_count()) {
      proc.events.emplace_back((T - b) * time_scale, next);
      cur = std::move(next);
    }
  }
  proc.validate();
  return proc;
}

double default_time_rescale() { return 1.0 / (kPi * kPi * kSqrt2); }

ComparisonReport compare_coalescents(std::span<const PartitionProcess> empirical,
                                     std::span<const PartitionProcess> reference, int n,
                                     double time_rescale, std::span<const double> s_grid,
                                     double tv_time) {
  if (empirical.empty() || reference.empty()) throw DomainError("empty coalescent ensemble");
  if (!(time_rescale > 0.0)) throw DomainError("time_rescale must be positive");
  for (const auto& p : empirical) {
    if (p.n != n) throw DomainError("empirical ensemble has a different n");
  }
  for (const auto& p : reference) {
    if (p.n != n) throw DomainError("reference ensemble has a different n");
  }
  ComparisonReport rep;
  rep.n = n;
  rep.n_empirical = empirical.size();
  rep.n_reference = reference.size();
  rep.time_rescale = time_rescale;

  std::vector<double> a, b;
  for (const auto& p : empirical) a.push_back(p.first_merge_time() * time_rescale);
  for (const auto& p : reference) b.push_back(p.first_merge_time());
  rep.first_merge_ks = ks_two_sample(a, b);

  for (double s : s_grid) {
    BlockCountPoint pt;
    pt.s = s;
    for (const auto& p : empirical) pt.mean_empirical += p.at(s).block_count();
    for (const auto& p : reference) pt.mean_reference += p.at(s * time_rescale).block_count();
    pt.mean_empirical /= static_cast<double>(empirical.size());
    pt.mean_reference /= static_cast<double>(reference.size());
    rep.block_counts.push_back(pt);
  }

  rep.tv_time = tv_time;
  if (n <= 5) {
    std::map<Partition, std::pair<double, double>> freq;
    for (const auto& p : empirical) freq[p.at(tv_time)].first += 1.0;
    for (const auto& p : reference) freq[p.at(tv_time * time_rescale)].second += 1.0;
    const double na = static_cast<double>(empirical.size());
    const double nb = static_cast<double>(reference.size());
    double tv = 0.0, noise = 0.0;
    for (const auto& [part, c] : freq) {
      tv += std::abs(c.first / na - c.second / nb);
      const double pooled = (c.first + c.second) / (na + nb);
      noise += std::sqrt(pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb));
    }
    rep.tv_distance = 0.5 * tv;
    // E|N(0, v)| = sqrt(2 v / pi).
    rep.tv_noise = 0.5 * std::sqrt(2.0 / kPi) * noise;
  }
  return rep;
}

nlohmann::json to_json(const PartitionProcess& p) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& [t, part] : p.events) events.push_back({t, part.blocks()});
  return {{"n", p.n}, {"events", events}, {"source", std::string(to_string(p.source))}};
}

PartitionProcess partition_process_from_json(const nlohmann::json& j) {
  PartitionProcess p;
  p.n = j.at("n").get<int>();
  const auto src = j.at("source").get<std::string>();
  if (src == "empirical_bbm") {
    p.source = PartitionSource::EmpiricalBbm;
  } else if (src == "bolthausen_sznitman") {
    p.source = PartitionSource::BolthausenSznitman;
  } else {
    throw ConfigError("unknown partition source " + src);
  }
  for (const auto& ev : j.at("events")) {
    std::vector<int> labels(static_cast<std::size_t>(p.n), -1);
    int block = 0;
    for (const auto& members : ev.at(1)) {
      for (int m : members) {
        if (m < 1 || m > p.n) throw ConfigError("partition member out of range");
        labels[static_cast<std::size_t>(m - 1)] = block;
      }
      ++block;
    }
    if (std::find(labels.begin(), labels.end(), -1) != labels.end()) {
      throw ConfigError("partition does not cover {1..n}");
    }
    p.events.emplace_back(ev.at(0).get<double>(), Partition(std::move(labels)));
  }
  p.validate();
  return p;
}

}  // namespace bbm
