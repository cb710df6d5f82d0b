#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evedge/platform.hpp"
#include "evedge/rng.hpp"

namespace evedge {

// ---------------------------------------------------------------------------
// Accuracy-degradation models

class AccuracyModel {
 public:
  virtual ~AccuracyModel() = default;
  /// Per-task accuracy degradation of a candidate.
  virtual std::vector<double> degradation(const MappingCandidate& candidate) const = 0;
};

/// Per-(layer, precision) contributions aggregated per task by sum or max.
/// Full precision always contributes 0; unlisted pairs contribute 0.
class AdditiveAccuracyModel final : public AccuracyModel {
 public:
  enum class Aggregation { sum, max };

  AdditiveAccuracyModel(const MultiTaskGraph& graph, const CostModel& cost,
                        Aggregation aggregation = Aggregation::sum);

  /// Throws ValidationError for negative values or non-zero full precision.
  void set(std::size_t node, std::uint16_t precision, double contribution);
  double contribution(std::size_t node, std::uint16_t precision) const;
  Aggregation aggregation() const noexcept { return aggregation_; }

  std::vector<double> degradation(const MappingCandidate& candidate) const override;

 private:
  std::vector<std::size_t> node_task_;
  std::size_t task_count_ = 0;
  std::size_t precision_count_ = 0;
  std::optional<std::uint16_t> full_precision_;
  Aggregation aggregation_;
  std::vector<double> table_;
};

/// Exact candidate -> per-task degradation table; unknown candidates throw.
/// All-full-precision candidates default to zero degradation.
class LookupAccuracyModel final : public AccuracyModel {
 public:
  LookupAccuracyModel(std::size_t task_count, const CostModel& cost);
  void add(const MappingCandidate& candidate, std::vector<double> delta_a);
  std::vector<double> degradation(const MappingCandidate& candidate) const override;

 private:
  std::size_t task_count_;
  std::optional<std::uint16_t> full_precision_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

// ---------------------------------------------------------------------------
// Fitness

enum class Objective { latency, energy };

struct FitnessRecord {
  std::string key;  // MappingCandidate::key()
  std::int64_t max_latency_us = 0;
  std::vector<std::int64_t> task_latency_us;
  std::vector<double> delta_a;
  bool feasible = true;
  double violation = 0.0;  // sum of per-task excess over the threshold
  double energy_mj = 0.0;
  double objective = 0.0;  // latency (us) or energy (mJ)

  friend bool operator==(const FitnessRecord&, const FitnessRecord&) = default;
};

/// Feasible before infeasible; feasible by lower objective, infeasible by
/// lower violation; then by candidate key. A total order.
std::weak_ordering compare(const FitnessRecord& a, const FitnessRecord& b);
inline bool fitter(const FitnessRecord& a, const FitnessRecord& b) {
  return compare(a, b) < 0;
}

/// Scores candidates and caches records by candidate key. Safe to call from
/// several threads.
class Evaluator {
 public:
  Evaluator(const MultiTaskGraph& graph, const CostModel& cost,
            const AccuracyModel& accuracy, double delta_a,
            Objective objective = Objective::latency);

  FitnessRecord evaluate(const MappingCandidate& candidate) const;
  /// Same as evaluate but bypasses the cache.
  FitnessRecord evaluate_uncached(const MappingCandidate& candidate) const;

  std::size_t cache_size() const;
  std::uint64_t cache_hits() const;
  std::uint64_t calls() const;

  const MultiTaskGraph& graph() const noexcept { return graph_; }
  const CostModel& cost() const noexcept { return cost_; }

 private:
  const MultiTaskGraph& graph_;
  const CostModel& cost_;
  const AccuracyModel& accuracy_;
  double delta_a_;
  Objective objective_;

  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, FitnessRecord> cache_;
  mutable std::uint64_t hits_ = 0;
  mutable std::uint64_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// Genetic operators and baselines

/// For every neighboring pair (p_i, p_{i+1}) one of the two is copied, each
/// with probability 1/2. Returns |parents| - 1 children.
std::vector<MappingCandidate> crossover(std::span<const MappingCandidate> parents, Rng& rng);

/// Re-rolls exactly `count` distinct genes to uniformly random valid
/// assignments (full precision only when fp_only).
MappingCandidate mutate(MappingCandidate candidate, std::size_t count, Rng& rng,
                        const CostModel& cost, bool fp_only = false);

MappingCandidate random_candidate(const CostModel& cost, Rng& rng, bool fp_only = false);

/// Task i -> device (i mod k) at full precision, advancing to the next
/// device that supports a layer. Throws InfeasibleInstanceError.
MappingCandidate rr_network(const MultiTaskGraph& graph, const CostModel& cost);

/// j-th node in topological order -> device (j mod k), same fallback.
MappingCandidate rr_layer(const MultiTaskGraph& graph, const CostModel& cost);

// ---------------------------------------------------------------------------
// Search

struct SearchConfig {
  std::size_t population = 32;
  std::size_t generations = 50;
  std::optional<std::size_t> mutations;  // default ceil(0.1 * nodes)
  double delta_a = 0.0;
  std::uint64_t seed = 0;
  std::size_t elitism = 2;
  bool fp_only = false;
  Objective objective = Objective::latency;
  std::size_t threads = 1;
  /// Extra initial candidates, placed after the round-robin seeds.
  std::vector<MappingCandidate> seeds;

  std::size_t mutation_count(std::size_t nodes) const;
  void validate(std::size_t nodes) const;
};

struct HistoryEntry {
  std::size_t generation = 0;
  std::int64_t best_latency_us = 0;
  bool best_feasible = false;
  double best_objective = 0.0;
  double best_violation = 0.0;  // ranks infeasible bests
};

struct SearchResult {
  MappingCandidate best;
  FitnessRecord best_fitness;
  std::vector<HistoryEntry> history;
  std::uint64_t evaluations = 0;  // evaluate() calls
  std::size_t unique_candidates = 0;
};

SearchResult search(const MultiTaskGraph& graph, const CostModel& cost,
                    const AccuracyModel& accuracy, const SearchConfig& config);

/// population * generations fresh uniform candidates.
SearchResult random_search(const MultiTaskGraph& graph, const CostModel& cost,
                           const AccuracyModel& accuracy, const SearchConfig& config);

/// Every valid candidate; throws ValidationError above `limit`.
SearchResult exhaustive_search(const MultiTaskGraph& graph, const CostModel& cost,
                               const AccuracyModel& accuracy, const SearchConfig& config,
                               std::uint64_t limit = 1u << 22);

/// Number of valid candidates (saturates at UINT64_MAX).
std::uint64_t design_space_size(const CostModel& cost, bool fp_only = false);

}  // namespace evedge
