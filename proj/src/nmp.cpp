#include "evedge/nmp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "evedge/error.hpp"
#include "evedge/scheduler.hpp"

namespace evedge {

// ---------------------------------------------------------------------------

AdditiveAccuracyModel::AdditiveAccuracyModel(const MultiTaskGraph& graph,
                                             const CostModel& cost, Aggregation aggregation)
    : task_count_(graph.task_count()),
      precision_count_(cost.precision_count()),
      full_precision_(cost.full_precision()),
      aggregation_(aggregation),
      table_(graph.node_count() * cost.precision_count(), 0.0) {
  for (const LayerNode& n : graph.nodes()) node_task_.push_back(n.task);
}

void AdditiveAccuracyModel::set(std::size_t node, std::uint16_t precision,
                                double contribution) {
  if (node >= node_task_.size() || precision >= precision_count_)
    throw ValidationError("accuracy entry out of range");
  if (!(contribution >= 0.0) || !std::isfinite(contribution))
    throw ValidationError("accuracy contributions must be finite and non-negative");
  if (full_precision_ && precision == *full_precision_ && contribution != 0.0)
    throw ValidationError("full precision must contribute zero degradation");
  table_[node * precision_count_ + precision] = contribution;
}

double AdditiveAccuracyModel::contribution(std::size_t node, std::uint16_t precision) const {
  return table_.at(node * precision_count_ + precision);
}

std::vector<double> AdditiveAccuracyModel::degradation(
    const MappingCandidate& candidate) const {
  std::vector<double> out(task_count_, 0.0);
  for (std::size_t i = 0; i < candidate.genes.size(); ++i) {
    const double c = contribution(i, candidate.genes[i].precision);
    double& acc = out[node_task_[i]];
    acc = aggregation_ == Aggregation::sum ? acc + c : std::max(acc, c);
  }
  return out;
}

LookupAccuracyModel::LookupAccuracyModel(std::size_t task_count, const CostModel& cost)
    : task_count_(task_count), full_precision_(cost.full_precision()) {}

void LookupAccuracyModel::add(const MappingCandidate& candidate, std::vector<double> delta_a) {
  if (delta_a.size() != task_count_)
    throw ValidationError("lookup entry must list one degradation per task");
  for (double d : delta_a)
    if (!(d >= 0.0)) throw ValidationError("degradation must be non-negative");
  table_[candidate.key()] = std::move(delta_a);
}

std::vector<double> LookupAccuracyModel::degradation(const MappingCandidate& candidate) const {
  const auto it = table_.find(candidate.key());
  if (it != table_.end()) return it->second;
  const bool all_fp = full_precision_ &&
                      std::all_of(candidate.genes.begin(), candidate.genes.end(),
                                  [&](const Gene& g) { return g.precision == *full_precision_; });
  if (all_fp) return std::vector<double>(task_count_, 0.0);
  throw ValidationError("candidate missing from accuracy lookup table");
}

// ---------------------------------------------------------------------------

std::weak_ordering compare(const FitnessRecord& a, const FitnessRecord& b) {
  if (a.feasible != b.feasible)
    return a.feasible ? std::weak_ordering::less : std::weak_ordering::greater;
  const double x = a.feasible ? a.objective : a.violation;
  const double y = b.feasible ? b.objective : b.violation;
  if (x < y) return std::weak_ordering::less;
  if (y < x) return std::weak_ordering::greater;
  const int c = a.key.compare(b.key);
  if (c < 0) return std::weak_ordering::less;
  if (c > 0) return std::weak_ordering::greater;
  return std::weak_ordering::equivalent;
}

Evaluator::Evaluator(const MultiTaskGraph& graph, const CostModel& cost,
                     const AccuracyModel& accuracy, double delta_a, Objective objective)
    : graph_(graph), cost_(cost), accuracy_(accuracy), delta_a_(delta_a),
      objective_(objective) {
  if (!(delta_a >= 0.0)) throw ValidationError("accuracy threshold must be non-negative");
}

FitnessRecord Evaluator::evaluate_uncached(const MappingCandidate& candidate) const {
  const ExecutionGraph eg = lower(graph_, candidate, cost_);
  const Schedule sched = schedule(eg);
  const EnergyReport energy = estimate_energy(sched, eg, cost_.powers());

  FitnessRecord r;
  r.key = candidate.key();
  r.task_latency_us = sched.latency.task_latency;
  r.max_latency_us = sched.latency.task_latency.empty()
                         ? 0
                         : *std::max_element(r.task_latency_us.begin(), r.task_latency_us.end());
  r.delta_a = accuracy_.degradation(candidate);
  for (double d : r.delta_a)
    if (d > delta_a_) r.violation += d - delta_a_;
  r.feasible = std::all_of(r.delta_a.begin(), r.delta_a.end(),
                           [&](double d) { return d <= delta_a_; });
  r.energy_mj = energy.total_mj;
  r.objective = objective_ == Objective::latency ? static_cast<double>(r.max_latency_us)
                                                 : r.energy_mj;
  return r;
}

FitnessRecord Evaluator::evaluate(const MappingCandidate& candidate) const {
  std::string key = candidate.key();
  {
    std::lock_guard lock(mu_);
    ++calls_;
    const auto it = cache_.find(key);
    if (it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  FitnessRecord r = evaluate_uncached(candidate);
  std::lock_guard lock(mu_);
  cache_.insert_or_assign(std::move(key), r);
  return r;
}

std::size_t Evaluator::cache_size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}
std::uint64_t Evaluator::cache_hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}
std::uint64_t Evaluator::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---------------------------------------------------------------------------

std::vector<MappingCandidate> crossover(std::span<const MappingCandidate> parents, Rng& rng) {
  std::vector<MappingCandidate> children;
  if (parents.size() < 2) return children;
  children.reserve(parents.size() - 1);
  for (std::size_t i = 0; i + 1 < parents.size(); ++i)
    children.push_back(rng.coin() ? parents[i + 1] : parents[i]);
  return children;
}

namespace {

const std::vector<Gene>& gene_pool(const CostModel& cost, std::size_t node, bool fp_only) {
  const auto& pool = fp_only ? cost.full_precision_options(node) : cost.options(node);
  if (pool.empty())
    throw InfeasibleInstanceError("layer " + std::to_string(node) +
                                  " has no full-precision device");
  return pool;
}

}  // namespace

MappingCandidate mutate(MappingCandidate candidate, std::size_t count, Rng& rng,
                        const CostModel& cost, bool fp_only) {
  const std::size_t n = candidate.genes.size();
  if (count > n) throw ValidationError("mutation count exceeds the number of layers");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first `count` entries are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
    const auto& pool = gene_pool(cost, idx[i], fp_only);
    candidate.genes[idx[i]] = pool[rng.below(pool.size())];
  }
  return candidate;
}

MappingCandidate random_candidate(const CostModel& cost, Rng& rng, bool fp_only) {
  MappingCandidate c;
  c.genes.reserve(cost.node_count());
  for (std::size_t i = 0; i < cost.node_count(); ++i) {
    const auto& pool = gene_pool(cost, i, fp_only);
    c.genes.push_back(pool[rng.below(pool.size())]);
  }
  return c;
}

namespace {

Gene round_robin_gene(const CostModel& cost, std::size_t node, std::size_t preferred) {
  const auto fp = cost.full_precision();
  const std::size_t k = cost.device_count();
  if (fp)
    for (std::size_t step = 0; step < k; ++step) {
      const Gene g{static_cast<std::uint16_t>((preferred + step) % k), *fp};
      if (cost.exec_us(node, g)) return g;
    }
  throw InfeasibleInstanceError("layer " + std::to_string(node) +
                                " is not supported at full precision on any device");
}

}  // namespace

MappingCandidate rr_network(const MultiTaskGraph& graph, const CostModel& cost) {
  MappingCandidate c;
  c.genes.resize(graph.node_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i)
    c.genes[i] = round_robin_gene(cost, i, graph.node(i).task % cost.device_count());
  return c;
}

MappingCandidate rr_layer(const MultiTaskGraph& graph, const CostModel& cost) {
  MappingCandidate c;
  c.genes.resize(graph.node_count());
  const auto& topo = graph.topological_order();
  for (std::size_t j = 0; j < topo.size(); ++j)
    c.genes[topo[j]] = round_robin_gene(cost, topo[j], j % cost.device_count());
  return c;
}

// ---------------------------------------------------------------------------

std::size_t SearchConfig::mutation_count(std::size_t nodes) const {
  if (mutations) return *mutations;
  return static_cast<std::size_t>((nodes + 9) / 10);
}

void SearchConfig::validate(std::size_t nodes) const {
  if (population < 2) throw ValidationError("population must be at least 2");
  if (generations < 1) throw ValidationError("generations must be at least 1");
  if (mutation_count(nodes) > nodes)
    throw ValidationError("mutation count exceeds the number of layers");
  if (!(delta_a >= 0.0)) throw ValidationError("accuracy threshold must be non-negative");
  if (elitism < 1) throw ValidationError("elitism must be at least 1");
}

namespace {

std::vector<FitnessRecord> evaluate_all(const Evaluator& eval,
                                        const std::vector<MappingCandidate>& pop,
                                        std::size_t threads) {
  std::vector<FitnessRecord> out(pop.size());
  threads = std::max<std::size_t>(1, std::min(threads, pop.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < pop.size(); ++i) out[i] = eval.evaluate(pop[i]);
    return out;
  }
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < threads; ++w)
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < pop.size(); i += threads) out[i] = eval.evaluate(pop[i]);
    });
  return out;
}

HistoryEntry history_entry(std::size_t g, const FitnessRecord& best) {
  return HistoryEntry{g, best.max_latency_us, best.feasible, best.objective, best.violation};
}

void check_fp_ready(const CostModel& cost, bool fp_only) {
  if (!fp_only) return;
  for (std::size_t i = 0; i < cost.node_count(); ++i) gene_pool(cost, i, true);
}

}  // namespace

SearchResult search(const MultiTaskGraph& graph, const CostModel& cost,
                    const AccuracyModel& accuracy, const SearchConfig& config) {
  const std::size_t nodes = graph.node_count();
  config.validate(nodes);
  check_fp_ready(cost, config.fp_only);
  const std::size_t m = config.mutation_count(nodes);
  const std::size_t p = config.population;
  Evaluator eval(graph, cost, accuracy, config.delta_a, config.objective);

  std::vector<MappingCandidate> pop;
  auto add_seed = [&](const MappingCandidate& c) {
    if (pop.size() >= p) return;
    cost.validate(c);
    if (config.fp_only &&
        !std::all_of(c.genes.begin(), c.genes.end(),
                     [&](const Gene& g) { return cost.is_full_precision(g.precision); }))
      return;
    if (std::find(pop.begin(), pop.end(), c) == pop.end()) pop.push_back(c);
  };
  add_seed(rr_network(graph, cost));
  add_seed(rr_layer(graph, cost));
  for (const MappingCandidate& c : config.seeds) add_seed(c);
  {
    Rng rng(derive_seed(config.seed, 0xffffffffULL));
    while (pop.size() < p) pop.push_back(random_candidate(cost, rng, config.fp_only));
  }

  SearchResult result;
  bool have_best = false;
  for (std::size_t g = 0; g < config.generations; ++g) {
    const auto records = evaluate_all(eval, pop, config.threads);
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return fitter(records[a], records[b]);
    });
    const FitnessRecord& gen_best = records[order.front()];
    if (!have_best || fitter(gen_best, result.best_fitness)) {
      result.best = pop[order.front()];
      result.best_fitness = gen_best;
      have_best = true;
    }
    result.history.push_back(history_entry(g, result.best_fitness));
    if (g + 1 == config.generations) break;

    Rng rng(derive_seed(config.seed, g));
    std::vector<MappingCandidate> next;
    next.reserve(p);
    for (std::size_t e = 0; e < std::min(config.elitism, p); ++e)
      next.push_back(pop[order[e]]);

    const std::size_t parent_count = std::max<std::size_t>(2, (p + 1) / 2);
    std::vector<MappingCandidate> parents;
    for (std::size_t i = 0; i < parent_count; ++i) parents.push_back(pop[order[i]]);
    const auto children = crossover(parents, rng);
    for (const MappingCandidate& child : children) {
      if (next.size() >= p) break;
      next.push_back(mutate(child, m, rng, cost, config.fp_only));
    }
    while (next.size() < p) {
      const MappingCandidate& pick = children[rng.below(children.size())];
      next.push_back(mutate(pick, m, rng, cost, config.fp_only));
    }
    pop = std::move(next);
  }
  result.evaluations = eval.calls();
  result.unique_candidates = eval.cache_size();
  return result;
}

SearchResult random_search(const MultiTaskGraph& graph, const CostModel& cost,
                           const AccuracyModel& accuracy, const SearchConfig& config) {
  if (config.population < 1 || config.generations < 1)
    throw ValidationError("random search needs a positive budget");
  check_fp_ready(cost, config.fp_only);
  Evaluator eval(graph, cost, accuracy, config.delta_a, config.objective);

  SearchResult result;
  bool have_best = false;
  for (std::size_t g = 0; g < config.generations; ++g) {
    Rng rng(derive_seed(config.seed ^ 0x52414e44ULL, g));
    std::vector<MappingCandidate> pop;
    for (std::size_t i = 0; i < config.population; ++i)
      pop.push_back(random_candidate(cost, rng, config.fp_only));
    const auto records = evaluate_all(eval, pop, config.threads);
    for (std::size_t i = 0; i < pop.size(); ++i)
      if (!have_best || fitter(records[i], result.best_fitness)) {
        result.best = pop[i];
        result.best_fitness = records[i];
        have_best = true;
      }
    result.history.push_back(history_entry(g, result.best_fitness));
  }
  result.evaluations = eval.calls();
  result.unique_candidates = eval.cache_size();
  return result;
}

std::uint64_t design_space_size(const CostModel& cost, bool fp_only) {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < cost.node_count(); ++i) {
    const std::uint64_t k =
        fp_only ? cost.full_precision_options(i).size() : cost.options(i).size();
    if (k == 0) return 0;
    if (total > UINT64_MAX / k) return UINT64_MAX;
    total *= k;
  }
  return total;
}

SearchResult exhaustive_search(const MultiTaskGraph& graph, const CostModel& cost,
                               const AccuracyModel& accuracy, const SearchConfig& config,
                               std::uint64_t limit) {
  const std::uint64_t space = design_space_size(cost, config.fp_only);
  if (space == 0) throw InfeasibleInstanceError("design space is empty");
  if (space > limit)
    throw ValidationError("design space of " + std::to_string(space) +
                          " candidates exceeds the exhaustive limit");
  Evaluator eval(graph, cost, accuracy, config.delta_a, config.objective);

  const std::size_t n = cost.node_count();
  std::vector<std::size_t> digit(n, 0);
  MappingCandidate c;
  c.genes.resize(n);
  auto pool = [&](std::size_t i) -> const std::vector<Gene>& {
    return config.fp_only ? cost.full_precision_options(i) : cost.options(i);
  };

  SearchResult result;
  bool have_best = false;
  for (std::uint64_t step = 0; step < space; ++step) {
    for (std::size_t i = 0; i < n; ++i) c.genes[i] = pool(i)[digit[i]];
    const FitnessRecord r = eval.evaluate_uncached(c);
    if (!have_best || fitter(r, result.best_fitness)) {
      result.best = c;
      result.best_fitness = r;
      have_best = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (++digit[i] < pool(i).size()) break;
      digit[i] = 0;
    }
  }
  result.history.push_back(history_entry(0, result.best_fitness));
  result.evaluations = space;
  result.unique_candidates = static_cast<std::size_t>(space);
  return result;
}

}  // namespace evedge
