#include "entroflow/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace entroflow {

namespace {

constexpr double kTieTolerance = 1e-9;

struct Node {
  LayerState state;
  std::vector<std::uint64_t> origins;  // input rows merged into each combo
  double entropy = 0.0;
  double conditional_entropy = 0.0;
  double objective = 0.0;
  double spent = 0.0;
  Rational norm = 0;
};

struct Candidate {
  double objective = 0.0;
  Rational norm = 0;
  std::vector<CodeValue> flat;
  std::vector<MappingAssignment> maps;
  std::vector<LayerRealization> realizations;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.objective > b.objective + kTieTolerance) return true;
  if (a.objective < b.objective - kTieTolerance) return false;
  if (a.norm != b.norm) return a.norm < b.norm;
  return a.flat < b.flat;
}

// True when nothing scoring at most `upper` with weight norm at least `norm`
// can beat `incumbent`; later DFS leaves also lose exact ties.
bool dominated(double upper, const Rational& norm, double incumbent_objective, const Rational& incumbent_norm) {
  if (upper < incumbent_objective - kTieTolerance) return true;
  return upper <= incumbent_objective + kTieTolerance && norm >= incumbent_norm;
}

std::string state_key(int stage, const Node& node) {
  std::string key;
  key.push_back(static_cast<char>(stage));
  for (std::size_t i = 0; i < node.state.k(); ++i) {
    const CodeValue c = node.state.combos[i].code;
    const std::uint64_t o = node.origins[i];
    key.append(reinterpret_cast<const char*>(&c), sizeof c);
    key.append(reinterpret_cast<const char*>(&o), sizeof o);
  }
  return key;
}

class Search {
 public:
  Search(const Topology& topology, const SolveOptions& options, SeparabilityCache& cache, std::atomic<std::uint64_t>& nodes,
         std::atomic<bool>& exhausted)
      : topology_(topology), options_(options), cache_(cache), nodes_(nodes), exhausted_(exhausted) {}

  // Explores the root branches whose ordinal is congruent to `worker` mod `workers`.
  void run(const Node& root, int worker, int workers) {
    AssignmentStream stream(root.state.k(), topology_.neurons_per_layer.front());
    std::uint64_t ordinal = 0;
    while (auto map = stream.next()) {
      if (exhausted_.load(std::memory_order_relaxed)) return;
      if (ordinal++ % static_cast<std::uint64_t>(workers) != static_cast<std::uint64_t>(worker)) continue;
      visit(root, 0, *map);
    }
  }

  const std::optional<Candidate>& best() const { return best_; }

 private:
  void expand(const Node& node, int stage) {
    AssignmentStream stream(node.state.k(), topology_.neurons_per_layer[static_cast<std::size_t>(stage)]);
    while (auto map = stream.next()) {
      if (exhausted_.load(std::memory_order_relaxed)) return;
      visit(node, stage, *map);
    }
  }

  void visit(const Node& node, int stage, const MappingAssignment& map) {
    if (nodes_.fetch_add(1, std::memory_order_relaxed) >= options_.max_nodes) {
      exhausted_.store(true, std::memory_order_relaxed);
      return;
    }
    const int nu = topology_.nu();
    const bool leaf = stage + 1 == nu;
    const double d = delta(node.state, map);
    const double dp = delta_prime(node.state, map);
    const double spent = node.spent + d - dp;
    const double objective = node.objective + (nu - stage) * d;

    if (options_.prune) {
      if (spent > options_.epsilon) return;
      const double upper =
          objective + (leaf ? 0.0
                            : bound_remaining(node.entropy - d, node.conditional_entropy - dp, stage + 1, nu, spent,
                                              options_.epsilon));
      if (best_ && dominated(upper, node.norm, best_->objective, best_->norm)) return;
    }

    FeasibilityResult feasible = layer_feasible(node.state, map, &cache_);
    if (!feasible.feasible()) return;
    Rational norm = node.norm + feasible.realization->l1_norm();

    maps_.push_back(map);
    realizations_.push_back(std::move(*feasible.realization));
    if (leaf) {
      if (spent <= options_.epsilon) offer(objective, norm);
    } else {
      Node child;
      child.state = apply_mapping(node.state, map);
      std::map<CodeValue, std::uint64_t> merged;
      for (std::size_t i = 0; i < node.state.k(); ++i) merged[map.target_codes[i]] |= node.origins[i];
      for (const auto& [code, origin] : merged) child.origins.push_back(origin);
      child.entropy = node.entropy - d;
      child.conditional_entropy = node.conditional_entropy - dp;
      child.objective = objective;
      child.spent = spent;
      child.norm = std::move(norm);
      if (!options_.dedupe_states || first_or_improved(stage + 1, child)) expand(child, stage + 1);
    }
    maps_.pop_back();
    realizations_.pop_back();
  }

  bool first_or_improved(int stage, const Node& child) {
    auto [it, fresh] = memo_.try_emplace(state_key(stage, child), child.objective, child.norm);
    if (fresh) return true;
    if (dominated(child.objective, child.norm, it->second.first, it->second.second)) return false;
    it->second = {child.objective, child.norm};
    return true;
  }

  void offer(double objective, const Rational& norm) {
    Candidate candidate;
    candidate.objective = objective;
    candidate.norm = norm;
    for (const auto& m : maps_) candidate.flat.insert(candidate.flat.end(), m.target_codes.begin(), m.target_codes.end());
    if (best_ && !better(candidate, *best_)) return;
    candidate.maps = maps_;
    candidate.realizations = realizations_;
    best_ = std::move(candidate);
  }

  const Topology& topology_;
  const SolveOptions& options_;
  SeparabilityCache& cache_;
  std::atomic<std::uint64_t>& nodes_;
  std::atomic<bool>& exhausted_;
  std::optional<Candidate> best_;
  std::vector<MappingAssignment> maps_;
  std::vector<LayerRealization> realizations_;
  std::unordered_map<std::string, std::pair<double, Rational>> memo_;
};

}  // namespace

std::string_view status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::BudgetExhausted: return "budget_exhausted";
  }
  return "?";
}

AssignmentStream::AssignmentStream(std::size_t k, int width) : k_(k), width_(width), codes_(k, 0) {
  if (width < 1 || width > 31) throw std::invalid_argument("assignment width must be in [1, 31]");
}

std::optional<MappingAssignment> AssignmentStream::next() {
  if (done_) return std::nullopt;
  if (!started_) {
    started_ = true;
    return MappingAssignment{width_, codes_};
  }
  const CodeValue top = (CodeValue{1} << width_) - 1;
  std::size_t i = k_;
  while (i > 0 && codes_[i - 1] == top) codes_[--i] = 0;
  if (i == 0) {
    done_ = true;
    return std::nullopt;
  }
  ++codes_[i - 1];
  return MappingAssignment{width_, codes_};
}

std::uint64_t AssignmentStream::count() const {
  std::uint64_t total = 1;
  const std::uint64_t base = std::uint64_t{1} << width_;
  for (std::size_t i = 0; i < k_; ++i) {
    if (total > std::numeric_limits<std::uint64_t>::max() / base) return std::numeric_limits<std::uint64_t>::max();
    total *= base;
  }
  return total;
}

AssignmentStream enumerate_assignments(const LayerState& state, int width) { return AssignmentStream(state.k(), width); }

double bound_remaining(double entropy, double conditional_entropy, int stage, int nu, double distortion_spent, double epsilon) {
  const double budget = std::max(0.0, conditional_entropy + (epsilon - distortion_spent));
  return (nu - stage) * std::max(0.0, std::min(entropy, budget));
}

double bound_remaining(const LayerState& state, int stage, int nu, double distortion_spent, double epsilon) {
  return bound_remaining(layer_entropy(state), conditional_layer_entropy(state), stage, nu, distortion_spent, epsilon);
}

std::vector<LayerTrace> make_trace(const std::vector<LayerState>& states, const std::vector<MappingAssignment>& mappings) {
  std::vector<LayerTrace> trace;
  for (std::size_t n = 0; n < mappings.size(); ++n) {
    LayerTrace layer{states[n].width, mappings[n].width, {}};
    std::map<CodeValue, std::vector<CodeValue>> groups;
    for (std::size_t i = 0; i < states[n].k(); ++i) groups[mappings[n].target_codes[i]].push_back(states[n].combos[i].code);
    for (auto& [target, sources] : groups) layer.merges.push_back({std::move(sources), target});
    trace.push_back(std::move(layer));
  }
  return trace;
}

SolveResult solve(const Problem& problem, const Topology& topology, const SolveOptions& options) {
  validate(problem);
  validate(topology);
  if (!(options.epsilon >= 0.0)) throw ValidationError("epsilon must be nonnegative");
  if (problem.support.size() > kMaxSolveSupport) {
    throw ValidationError("solve supports at most " + std::to_string(kMaxSolveSupport) + " input combinations");
  }
  for (int m : topology.neurons_per_layer) {
    if (m > kMaxLayerWidth) throw ValidationError("solve supports at most " + std::to_string(kMaxLayerWidth) + " neurons per layer");
  }

  Node root;
  root.state = initial_state(problem);
  for (std::size_t i = 0; i < root.state.k(); ++i) root.origins.push_back(std::uint64_t{1} << i);
  root.entropy = layer_entropy(root.state);
  root.conditional_entropy = conditional_layer_entropy(root.state);

  SeparabilityCache cache;
  std::atomic<std::uint64_t> nodes{0};
  std::atomic<bool> exhausted{false};
  const int workers = std::max(1, options.threads);

  std::vector<std::unique_ptr<Search>> searches;
  for (int w = 0; w < workers; ++w) searches.push_back(std::make_unique<Search>(topology, options, cache, nodes, exhausted));
  if (workers == 1) {
    searches.front()->run(root, 0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back([&, w] { searches[static_cast<std::size_t>(w)]->run(root, w, workers); });
    for (auto& t : pool) t.join();
  }

  const Candidate* best = nullptr;
  for (const auto& s : searches) {
    if (s->best() && (!best || better(*s->best(), *best))) best = &*s->best();
  }

  SolveResult result;
  result.nodes = std::min<std::uint64_t>(nodes.load(), options.max_nodes);
  result.h_x_given_y = root.conditional_entropy;
  if (exhausted.load()) {
    result.status = SolveStatus::BudgetExhausted;
  } else {
    result.status = best ? SolveStatus::Optimal : SolveStatus::Infeasible;
  }
  if (!best) return result;

  result.has_solution = true;
  result.mappings = best->maps;
  result.realizations = best->realizations;
  result.weight_norm = best->norm;
  for (const auto& r : result.realizations) result.weights.push_back(synthesize_layer_weights(r));
  FlowTrace flow = propagate(root.state, result.mappings);
  result.ledger = flow.ledger;
  result.objective = flow.ledger.objective;
  result.trace = make_trace(flow.states, result.mappings);
  const auto compression = compression_and_bound(flow.ledger, flow.states.front(), flow.states.back(), options.epsilon);
  result.c_nu = compression.c_nu;
  result.bound = compression.bound;
  result.states = std::move(flow.states);
  return result;
}

nlohmann::json to_json(const SolveResult& result) {
  nlohmann::json out;
  out["status"] = status_name(result.status);
  out["h_x_given_y"] = result.h_x_given_y;
  out["nodes"] = result.nodes;
  if (!result.has_solution) {
    out["objective"] = nullptr;
    out["layers"] = nlohmann::json::array();
    return out;
  }
  out["objective"] = result.objective;
  out["distortion"] = result.ledger.distortion;
  out["c_nu"] = result.c_nu;
  out["bound"] = result.bound;
  out["weight_norm"] = result.weight_norm.get_d();
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t n = 0; n < result.mappings.size(); ++n) {
    const auto& rec = result.ledger.layers[n];
    const auto& source = result.states[n];
    nlohmann::json mapping = nlohmann::json::object();
    for (std::size_t i = 0; i < source.k(); ++i) {
      mapping[format_code(source.combos[i].code, source.width)] =
          format_code(result.mappings[n].target_codes[i], result.mappings[n].width);
    }
    layers.push_back({{"delta", rec.delta},
                      {"delta_prime", rec.delta_prime},
                      {"H", rec.entropy},
                      {"H_given_Y", rec.conditional_entropy},
                      {"mapping", mapping},
                      {"weights", result.weights[n].weights},
                      {"biases", result.weights[n].biases}});
  }
  out["layers"] = layers;
  return out;
}

}  // namespace entroflow
