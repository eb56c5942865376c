#include "entroflow/entropy_flow.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace entroflow {

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// Sum of `weights` grouped by target code, in ascending code order.
std::map<CodeValue, double> block_sums(const std::vector<CodeValue>& targets, const std::vector<double>& weights) {
  std::map<CodeValue, double> sums;
  for (std::size_t i = 0; i < targets.size(); ++i) sums[targets[i]] += weights[i];
  return sums;
}

void require_cover(const LayerState& state, const MappingAssignment& map) {
  if (map.target_codes.size() != state.k()) {
    throw std::invalid_argument("mapping covers " + std::to_string(map.target_codes.size()) + " combos, state has " +
                                std::to_string(state.k()));
  }
}

// sum_i w_i log2(W_block(i) / w_i) over the partition induced by `map`.
double partition_term(const MappingAssignment& map, const std::vector<double>& weights) {
  const auto sums = block_sums(map.target_codes, weights);
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (w > 0.0) total += w * std::log2(sums.at(map.target_codes[i]) / w);
  }
  return total;
}

}  // namespace

void check_invariants(const LayerState& state) {
  double total = 0.0;
  std::vector<double> class_totals(state.y_prior.size(), 0.0);
  std::set<CodeValue> codes;
  for (const auto& c : state.combos) {
    if (!codes.insert(c.code).second) throw std::invalid_argument("duplicate code " + format_code(c.code, state.width));
    if (c.p_given_y.size() != state.y_prior.size()) throw std::invalid_argument("conditional row has wrong arity");
    total += c.p;
    double mix = 0.0;
    for (std::size_t y = 0; y < state.y_prior.size(); ++y) {
      class_totals[y] += c.p_given_y[y];
      mix += state.y_prior[y] * c.p_given_y[y];
    }
    if (std::abs(mix - c.p) > kEntropyTolerance) throw std::invalid_argument("p is inconsistent with P_Y and p_given_y");
  }
  if (std::abs(total - 1.0) > kEntropyTolerance) throw std::invalid_argument("layer probabilities do not sum to 1");
  for (double t : class_totals) {
    if (std::abs(t - 1.0) > kEntropyTolerance) throw std::invalid_argument("class-conditional probabilities do not sum to 1");
  }
  if (state.width < 31 && state.k() > (std::size_t{1} << state.width)) throw std::invalid_argument("more combos than codes");
}

std::vector<CodeValue> MappingAssignment::distinct_codes() const {
  std::vector<CodeValue> codes(target_codes);
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  return codes;
}

std::vector<std::vector<int>> MappingAssignment::theta() const {
  const auto codes = distinct_codes();
  std::vector<std::vector<int>> matrix(target_codes.size(), std::vector<int>(codes.size(), 0));
  for (std::size_t i = 0; i < target_codes.size(); ++i) {
    const auto j = std::lower_bound(codes.begin(), codes.end(), target_codes[i]) - codes.begin();
    matrix[i][static_cast<std::size_t>(j)] = 1;
  }
  return matrix;
}

std::vector<std::vector<std::size_t>> MappingAssignment::partition() const {
  const auto codes = distinct_codes();
  std::vector<std::vector<std::size_t>> blocks(codes.size());
  for (std::size_t i = 0; i < target_codes.size(); ++i) {
    const auto j = std::lower_bound(codes.begin(), codes.end(), target_codes[i]) - codes.begin();
    blocks[static_cast<std::size_t>(j)].push_back(i);
  }
  return blocks;
}

MappingAssignment identity_assignment(const LayerState& state) {
  MappingAssignment map{state.width, {}};
  for (const auto& c : state.combos) map.target_codes.push_back(c.code);
  return map;
}

LayerState initial_state(const Problem& problem) {
  LayerState state;
  state.layer_index = 0;
  state.width = problem.input_bits;
  state.y_prior = problem.y_prior();
  for (const auto& row : problem.support) {
    Combo combo{row.input, row.probability, std::vector<double>(state.y_prior.size(), 0.0)};
    for (std::size_t y = 0; y < state.y_prior.size(); ++y) {
      combo.p_given_y[y] = row.probability * row.target[y] / state.y_prior[y];
    }
    state.combos.push_back(std::move(combo));
  }
  std::sort(state.combos.begin(), state.combos.end(), [](const Combo& a, const Combo& b) { return a.code < b.code; });
  return state;
}

LayerState apply_mapping(const LayerState& state, const MappingAssignment& map) {
  require_cover(state, map);
  if (map.width < 1 || map.width > 31) throw std::invalid_argument("code width must be in [1, 31]");
  const CodeValue limit = CodeValue{1} << map.width;

  std::map<CodeValue, Combo> merged;
  for (std::size_t i = 0; i < state.k(); ++i) {
    const CodeValue target = map.target_codes[i];
    if (target >= limit) throw std::invalid_argument("target code does not fit in " + std::to_string(map.width) + " bits");
    auto [it, fresh] = merged.try_emplace(target, Combo{target, 0.0, std::vector<double>(state.y_prior.size(), 0.0)});
    const Combo& src = state.combos[i];
    it->second.p += src.p;
    for (std::size_t y = 0; y < state.y_prior.size(); ++y) it->second.p_given_y[y] += src.p_given_y[y];
  }

  LayerState next;
  next.layer_index = state.layer_index + 1;
  next.width = map.width;
  next.y_prior = state.y_prior;
  next.combos.reserve(merged.size());
  for (auto& [code, combo] : merged) next.combos.push_back(std::move(combo));
  return next;
}

double entropy_bits(std::span<const double> distribution) {
  double h = 0.0;
  for (double p : distribution) h -= plogp(p);
  return h;
}

double layer_entropy(const LayerState& state) {
  double h = 0.0;
  for (const auto& c : state.combos) h -= plogp(c.p);
  return h;
}

double conditional_layer_entropy(const LayerState& state) {
  double h = 0.0;
  for (std::size_t y = 0; y < state.y_prior.size(); ++y) {
    double hy = 0.0;
    for (const auto& c : state.combos) hy -= plogp(c.p_given_y[y]);
    h += state.y_prior[y] * hy;
  }
  return h;
}

double mutual_info_with_target(const LayerState& state) { return layer_entropy(state) - conditional_layer_entropy(state); }

double delta(const LayerState& state, const MappingAssignment& map) {
  require_cover(state, map);
  std::vector<double> p(state.k());
  for (std::size_t i = 0; i < state.k(); ++i) p[i] = state.combos[i].p;
  const double d = partition_term(map, p);
  assert(std::abs(d - (layer_entropy(state) - layer_entropy(apply_mapping(state, map)))) <= kEntropyTolerance);
  return d;
}

double delta_prime(const LayerState& state, const MappingAssignment& map) {
  require_cover(state, map);
  double d = 0.0;
  std::vector<double> p(state.k());
  for (std::size_t y = 0; y < state.y_prior.size(); ++y) {
    for (std::size_t i = 0; i < state.k(); ++i) p[i] = state.combos[i].p_given_y[y];
    d += state.y_prior[y] * partition_term(map, p);
  }
  assert(std::abs(d - (conditional_layer_entropy(state) - conditional_layer_entropy(apply_mapping(state, map)))) <=
         kEntropyTolerance);
  return d;
}

EntropyLedger make_ledger(std::vector<LayerRecord> layers) {
  EntropyLedger ledger;
  ledger.layers = std::move(layers);
  const int nu = ledger.nu();
  for (int i = 0; i < nu; ++i) {
    const auto& rec = ledger.layers[static_cast<std::size_t>(i)];
    ledger.objective += (nu - i) * rec.delta;
    ledger.c_nu += rec.delta;
    ledger.distortion += rec.delta - rec.delta_prime;
  }
  return ledger;
}

FlowTrace propagate(const LayerState& initial, std::span<const MappingAssignment> maps) {
  FlowTrace trace;
  trace.states.push_back(initial);
  std::vector<LayerRecord> records;
  for (const auto& map : maps) {
    const LayerState& current = trace.states.back();
    LayerRecord rec;
    rec.delta = delta(current, map);
    rec.delta_prime = delta_prime(current, map);
    LayerState next = apply_mapping(current, map);
    rec.entropy = layer_entropy(next);
    rec.conditional_entropy = conditional_layer_entropy(next);
    records.push_back(rec);
    trace.states.push_back(std::move(next));
  }
  trace.ledger = make_ledger(std::move(records));
  return trace;
}

double distortion(const EntropyLedger& ledger, const LayerState& initial, const LayerState& final_state) {
  double d = 0.0;
  for (const auto& rec : ledger.layers) d += rec.delta - rec.delta_prime;
  assert(std::abs(d - (mutual_info_with_target(initial) - mutual_info_with_target(final_state))) <= kEntropyTolerance);
  (void)initial;
  (void)final_state;
  return d;
}

std::vector<double> mutual_info_with_input(const EntropyLedger& ledger, const Problem& problem) {
  const double hx = layer_entropy(initial_state(problem));
  std::vector<double> info;
  double removed = 0.0;
  for (const auto& rec : ledger.layers) {
    removed += rec.delta;
    info.push_back(std::max(0.0, hx - removed));
  }
  return info;
}

CompressionBound compression_and_bound(const EntropyLedger& ledger, const LayerState& initial, const LayerState& final_state,
                                       double epsilon) {
  CompressionBound out;
  for (const auto& rec : ledger.layers) out.c_nu += rec.delta;
  out.bound = conditional_layer_entropy(initial) - conditional_layer_entropy(final_state) + epsilon;
  out.ok = out.c_nu <= out.bound + kEntropyTolerance;
  return out;
}

nlohmann::json to_json(const EntropyLedger& ledger) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& rec : ledger.layers) {
    layers.push_back({{"delta", rec.delta},
                      {"delta_prime", rec.delta_prime},
                      {"H", rec.entropy},
                      {"H_given_Y", rec.conditional_entropy}});
  }
  return {{"layers", layers}, {"objective", ledger.objective}, {"distortion", ledger.distortion}, {"c_nu", ledger.c_nu}};
}

}  // namespace entroflow
