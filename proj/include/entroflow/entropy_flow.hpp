#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "entroflow/problem.hpp"

namespace entroflow {

/// Absolute tolerance used for every entropy identity check.
inline constexpr double kEntropyTolerance = 1e-9;

/// One live output combination of a layer.
struct Combo {
  CodeValue code = 0;
  double p = 0.0;
  /// P_n(code | Y = y), indexed like LayerState::y_prior.
  std::vector<double> p_given_y;
};

/// The distribution over live output combinations at one layer. Combos are
/// kept sorted by code value; layer 0 is the input layer.
struct LayerState {
  int layer_index = 0;
  int width = 0;
  std::vector<Combo> combos;
  std::vector<double> y_prior;

  std::size_t k() const { return combos.size(); }
};

/// Throws std::invalid_argument if a LayerState invariant is violated.
void check_invariants(const LayerState& state);

/// A deterministic layer map: source combo i (in state order) goes to
/// target_codes[i], a code of `width` bits.
struct MappingAssignment {
  int width = 0;
  std::vector<CodeValue> target_codes;

  /// Distinct target codes in ascending order; column j of the theta matrix.
  std::vector<CodeValue> distinct_codes() const;
  /// theta[i][j] = 1 iff source i lands on distinct_codes()[j].
  std::vector<std::vector<int>> theta() const;
  /// Blocks of the induced partition, each a list of source indices,
  /// ordered like distinct_codes().
  std::vector<std::vector<std::size_t>> partition() const;

  friend bool operator==(const MappingAssignment&, const MappingAssignment&) = default;
};

MappingAssignment identity_assignment(const LayerState& state);

LayerState initial_state(const Problem& problem);
LayerState apply_mapping(const LayerState& state, const MappingAssignment& map);

/// Shannon entropy in bits with 0 log 0 = 0.
double entropy_bits(std::span<const double> distribution);

double layer_entropy(const LayerState& state);
double conditional_layer_entropy(const LayerState& state);
/// I(X_n; Y) = H(X_n) - H(X_n | Y); layers are deterministic functions of X.
double mutual_info_with_target(const LayerState& state);

/// Expected partition entropy sum_j P_n(x_j) H(S_j), without building the next state.
double delta(const LayerState& state, const MappingAssignment& map);
/// Class-conditional counterpart of delta, weighted by P_Y.
double delta_prime(const LayerState& state, const MappingAssignment& map);

struct LayerRecord {
  double delta = 0.0;
  double delta_prime = 0.0;
  double entropy = 0.0;              // H(X_n)
  double conditional_entropy = 0.0;  // H(X_n | Y)
};

struct EntropyLedger {
  std::vector<LayerRecord> layers;
  double objective = 0.0;
  double distortion = 0.0;
  double c_nu = 0.0;

  int nu() const { return static_cast<int>(layers.size()); }
};

/// Fills objective = sum_i (nu - i) delta_{i+1}, c_nu and distortion from the per-layer records.
EntropyLedger make_ledger(std::vector<LayerRecord> layers);

struct FlowTrace {
  std::vector<LayerState> states;  // states[0] is the input layer
  EntropyLedger ledger;
};

/// Pushes `initial` through the mapping chain and records every layer.
FlowTrace propagate(const LayerState& initial, std::span<const MappingAssignment> maps);

/// sum_i (delta_i - delta'_i); asserts agreement with I(X;Y) - I(X_nu;Y).
double distortion(const EntropyLedger& ledger, const LayerState& initial, const LayerState& final_state);

/// I(X; X_i) = H(X) - sum_{j<=i} delta_j for i = 1..nu.
std::vector<double> mutual_info_with_input(const EntropyLedger& ledger, const Problem& problem);

struct CompressionBound {
  double c_nu = 0.0;
  double bound = 0.0;
  bool ok = false;
};

CompressionBound compression_and_bound(const EntropyLedger& ledger, const LayerState& initial, const LayerState& final_state,
                                       double epsilon = 0.0);

nlohmann::json to_json(const EntropyLedger& ledger);

}  // namespace entroflow
