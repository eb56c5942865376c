#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <gmpxx.h>

#include "entroflow/entropy_flow.hpp"

namespace entroflow {

using Rational = mpq_class;

inline constexpr int kMaxSeparabilityDimension = kMaxInputBits;
inline constexpr std::size_t kMaxSeparabilityPoints = std::size_t{1} << kMaxInputBits;

/// One threshold neuron realizing a labeling with unit margin:
/// w.x + b >= 1 on label-1 points and w.x + b <= -1 on label-0 points.
/// Weights are indexed by code component (0 = leftmost bit).
struct SeparabilityCertificate {
  std::vector<Rational> weights;
  Rational bias;

  /// |w|_1 + |b|; the oracle returns a certificate minimizing this.
  Rational l1_norm() const;
  bool verifies(std::span<const CodeValue> points, int dimension, std::span<const std::uint8_t> labels) const;
};

/// Nonnegative multipliers lambda with sum lambda_i s_i (x_i, 1) = 0 and
/// sum lambda > 0, s_i = +1 on label 1 and -1 on label 0: a point of the
/// label-1 hull coincides with a point of the label-0 hull.
struct InfeasibilityWitness {
  std::vector<Rational> multipliers;

  bool verifies(std::span<const CodeValue> points, int dimension, std::span<const std::uint8_t> labels) const;
  std::string statement(std::span<const CodeValue> points, int dimension, std::span<const std::uint8_t> labels) const;
};

using SeparabilityResult = std::variant<SeparabilityCertificate, InfeasibilityWitness>;

inline bool is_separable(const SeparabilityResult& r) { return std::holds_alternative<SeparabilityCertificate>(r); }

/// Exact linear-separability decision. Points must be distinct codes of
/// `dimension` bits and labels 0/1. Throws std::invalid_argument on malformed
/// input and std::out_of_range past the supported size.
SeparabilityResult check_separable(std::span<const CodeValue> points, int dimension, std::span<const std::uint8_t> labels);

/// Memo of check_separable keyed by (dimension, point set, labels). Safe for
/// concurrent readers and writers; results do not depend on interleaving.
class SeparabilityCache {
 public:
  std::shared_ptr<const SeparabilityResult> check(std::span<const CodeValue> points, int dimension,
                                                  std::span<const std::uint8_t> labels);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const SeparabilityResult>> entries_;
};

struct LayerRealization {
  int input_width = 0;
  std::vector<SeparabilityCertificate> neurons;

  Rational l1_norm() const;
};

struct FeasibilityResult {
  std::optional<LayerRealization> realization;
  /// First neuron (0-based output component) whose labeling is not separable.
  int failing_neuron = -1;

  bool feasible() const { return realization.has_value(); }
};

/// Per-output-bit separability of `map` over the source codes of `state`.
FeasibilityResult layer_feasible(const LayerState& state, const MappingAssignment& map, SeparabilityCache* cache = nullptr);

/// All linearly separable labelings of the full m-cube, m <= 4. Bit i of a
/// label vector is the label of the point with code value i.
std::set<std::uint32_t> enumerate_threshold_functions(int m);

/// Integer weights: row j is neuron j, columns follow input code components.
struct IntegerLayer {
  int input_width = 0;
  std::vector<std::vector<long long>> weights;
  std::vector<long long> biases;

  CodeValue forward(CodeValue input) const;
  int output_width() const { return static_cast<int>(biases.size()); }
};

IntegerLayer synthesize_layer_weights(const LayerRealization& realization);

/// Smallest integer multiple of a certificate (denominators cleared, common factor removed).
std::pair<std::vector<long long>, long long> integer_weights(const SeparabilityCertificate& certificate);

}  // namespace entroflow
