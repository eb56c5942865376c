#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace entroflow {

/// Malformed input document (bad JSON, wrong field types, bad bitstring characters).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a problem invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxInputBits = 12;
inline constexpr double kProbabilityTolerance = 1e-9;

/// A bit vector stored in the low `width` bits of `value`; component 0 is the
/// most significant of those bits, matching the printed bitstring.
using CodeValue = std::uint32_t;

std::string format_code(CodeValue value, int width);
CodeValue parse_code(std::string_view text, int expected_width);
/// Component `index` (0 = leftmost character) of a code of the given width.
inline int code_bit(CodeValue value, int width, int index) {
  return static_cast<int>((value >> (width - 1 - index)) & 1u);
}

struct SupportRow {
  CodeValue input = 0;
  double probability = 0.0;
  /// Distribution over Problem::y_alphabet.
  std::vector<double> target;

  friend bool operator==(const SupportRow&, const SupportRow&) = default;
};

/// A supervised instance over finite alphabets: P(X) on a set of input bit
/// vectors plus the target conditional P(Y|X). Support rows are kept sorted by
/// input code; y_alphabet holds only symbols with positive prior.
struct Problem {
  int input_bits = 0;
  std::vector<std::string> y_alphabet;
  std::vector<SupportRow> support;

  std::vector<double> y_prior() const;
  friend bool operator==(const Problem&, const Problem&) = default;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const Problem& problem);

Problem parse_problem(const nlohmann::json& document);
Problem load_problem(const std::filesystem::path& path);
nlohmann::json to_json(const Problem& problem);

enum class Gate { And, Or, Xor };

Gate parse_gate(std::string_view name);
std::string_view gate_name(Gate gate);

/// Deterministic boolean gate target. `distribution` lists P(x) for inputs in
/// ascending code order (00, 01, 10, 11 for arity 2); uniform when absent.
Problem builtin_gate(Gate gate, int arity, const std::optional<std::vector<double>>& distribution = std::nullopt);

struct Topology {
  std::vector<int> neurons_per_layer;

  int nu() const { return static_cast<int>(neurons_per_layer.size()); }
};

void validate(const Topology& topology);

}  // namespace entroflow
