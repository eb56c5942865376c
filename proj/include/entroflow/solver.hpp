#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "entroflow/entropy_flow.hpp"
#include "entroflow/problem.hpp"
#include "entroflow/separability.hpp"

namespace entroflow {

inline constexpr std::size_t kMaxSolveSupport = 64;
inline constexpr int kMaxLayerWidth = 8;

struct SolveOptions {
  /// Distortion budget I(X;Y|X_nu) in bits.
  double epsilon = 1e-9;
  bool prune = true;
  bool dedupe_states = true;
  std::uint64_t max_nodes = 200'000'000;
  /// Root-branch workers; results do not depend on this.
  int threads = 1;
};

enum class SolveStatus { Optimal, Infeasible, BudgetExhausted };

std::string_view status_name(SolveStatus status);

/// Source codes collapsed onto one target code.
struct Merge {
  std::vector<CodeValue> sources;
  CodeValue target = 0;
};

struct LayerTrace {
  int source_width = 0;
  int target_width = 0;
  std::vector<Merge> merges;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  /// True when `mappings` holds a feasible sequence (always for Optimal).
  bool has_solution = false;
  double objective = 0.0;
  EntropyLedger ledger;
  std::vector<MappingAssignment> mappings;
  std::vector<LayerRealization> realizations;
  std::vector<IntegerLayer> weights;
  std::vector<LayerTrace> trace;
  /// Layer states along the solution, states[0] the input layer.
  std::vector<LayerState> states;
  double c_nu = 0.0;
  /// H(X|Y) - H(X_nu|Y) + epsilon.
  double bound = 0.0;
  double h_x_given_y = 0.0;
  /// Total minimal |w|_1 + |b| over all neurons; secondary tie-break key.
  Rational weight_norm;
  std::uint64_t nodes = 0;
};

/// Exact search for the mapping sequence maximizing sum_n (nu - n) delta_{n+1}
/// subject to total distortion <= epsilon and per-layer threshold realizability.
/// Ties on objective (within 1e-9) go to the smaller total weight norm, then to
/// the lexicographically smaller layer-major code tuple.
SolveResult solve(const Problem& problem, const Topology& topology, const SolveOptions& options = {});

/// Lexicographic odometer over every code tuple of `width` bits for the
/// combos of a state: (2^width)^k assignments, first is all zeros.
class AssignmentStream {
 public:
  AssignmentStream(std::size_t k, int width);

  std::optional<MappingAssignment> next();
  /// Total number of assignments, saturating at UINT64_MAX.
  std::uint64_t count() const;

 private:
  std::size_t k_;
  int width_;
  std::vector<CodeValue> codes_;
  bool started_ = false;
  bool done_ = false;
};

AssignmentStream enumerate_assignments(const LayerState& state, int width);

/// Admissible upper bound on the weighted objective still attainable from
/// layer `stage`: (nu - stage) * min(H(X_n), H(X_n|Y) + epsilon - spent).
double bound_remaining(const LayerState& state, int stage, int nu, double distortion_spent, double epsilon);
double bound_remaining(double entropy, double conditional_entropy, int stage, int nu, double distortion_spent, double epsilon);

std::vector<LayerTrace> make_trace(const std::vector<LayerState>& states, const std::vector<MappingAssignment>& mappings);

nlohmann::json to_json(const SolveResult& result);

}  // namespace entroflow
