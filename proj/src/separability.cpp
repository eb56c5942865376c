#include "entroflow/separability.hpp"

#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace entroflow {

namespace {

void check_inputs(std::span<const CodeValue> points, int dimension, std::span<const std::uint8_t> labels) {
  if (dimension < 0 || dimension > kMaxSeparabilityDimension) {
    throw std::out_of_range("separability supports dimensions 0.." + std::to_string(kMaxSeparabilityDimension));
  }
  if (points.size() > kMaxSeparabilityPoints) throw std::out_of_range("too many points for the separability oracle");
  if (points.size() != labels.size()) throw std::invalid_argument("points and labels differ in length");
  std::set<CodeValue> seen;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (dimension < 32 && points[i] >> dimension) throw std::invalid_argument("point does not fit the dimension");
    if (!seen.insert(points[i]).second) throw std::invalid_argument("points must be distinct");
    if (labels[i] > 1) throw std::invalid_argument("labels must be 0 or 1");
  }
}

// Feature f of point x: code components, then the constant 1 for the bias.
int feature(CodeValue x, int dimension, int f) { return f == dimension ? 1 : code_bit(x, dimension, f); }

int sign_of(std::uint8_t label) { return label ? 1 : -1; }

// Dense tableau for
//   max sum_i y_i   s.t.  -1 <= sum_i y_i s_i a_if <= 1 for every feature f,  y >= 0,
// the LP dual of  min |w|_1 + |b|  s.t.  s_i (w.x_i + b) >= 1.
// Unbounded iff the margin system is infeasible; the unbounded ray is then a
// Farkas witness. Bland's rule keeps the pivot sequence finite and deterministic.
class MarginDualSimplex {
 public:
  MarginDualSimplex(std::span<const CodeValue> points, int dimension, std::span<const std::uint8_t> labels)
      : n_(points.size()), features_(dimension + 1), rows_(2 * static_cast<std::size_t>(features_)),
        cols_(n_ + rows_), table_(rows_ + 1, std::vector<Rational>(cols_ + 1)), basis_(rows_) {
    for (std::size_t f = 0; f < static_cast<std::size_t>(features_); ++f) {
      for (std::size_t i = 0; i < n_; ++i) {
        const int g = sign_of(labels[i]) * feature(points[i], dimension, static_cast<int>(f));
        table_[2 * f][i] = g;
        table_[2 * f + 1][i] = -g;
      }
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      table_[r][n_ + r] = 1;
      table_[r][cols_] = 1;
      basis_[r] = n_ + r;
    }
    for (std::size_t i = 0; i < n_; ++i) table_[rows_][i] = -1;
  }

  SeparabilityResult solve(int dimension) {
    for (;;) {
      std::size_t entering = cols_;
      for (std::size_t c = 0; c < cols_; ++c) {
        if (sgn(table_[rows_][c]) < 0) {
          entering = c;
          break;
        }
      }
      if (entering == cols_) return certificate(dimension);

      std::size_t leaving = rows_;
      Rational best_ratio;
      for (std::size_t r = 0; r < rows_; ++r) {
        if (sgn(table_[r][entering]) <= 0) continue;
        Rational ratio = table_[r][cols_] / table_[r][entering];
        if (leaving == rows_ || ratio < best_ratio || (ratio == best_ratio && basis_[r] < basis_[leaving])) {
          leaving = r;
          best_ratio = ratio;
        }
      }
      if (leaving == rows_) return witness(entering);
      pivot(leaving, entering);
    }
  }

 private:
  void pivot(std::size_t row, std::size_t col) {
    const Rational inv = 1 / table_[row][col];
    for (auto& v : table_[row]) v *= inv;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == row || sgn(table_[r][col]) == 0) continue;
      const Rational factor = table_[r][col];
      for (std::size_t c = 0; c <= cols_; ++c) {
        if (sgn(table_[row][c]) != 0) table_[r][c] -= factor * table_[row][c];
      }
    }
    basis_[row] = col;
  }

  SeparabilityCertificate certificate(int dimension) const {
    // Row duals are the reduced costs of the slack columns.
    SeparabilityCertificate cert;
    cert.weights.resize(static_cast<std::size_t>(dimension));
    for (std::size_t f = 0; f < static_cast<std::size_t>(features_); ++f) {
      Rational w = table_[rows_][n_ + 2 * f] - table_[rows_][n_ + 2 * f + 1];
      if (f == static_cast<std::size_t>(dimension)) {
        cert.bias = w;
      } else {
        cert.weights[f] = w;
      }
    }
    return cert;
  }

  InfeasibilityWitness witness(std::size_t entering) const {
    InfeasibilityWitness out;
    out.multipliers.assign(n_, Rational(0));
    if (entering < n_) out.multipliers[entering] = 1;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (basis_[r] < n_) out.multipliers[basis_[r]] = -table_[r][entering];
    }
    return out;
  }

  std::size_t n_;
  int features_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::vector<Rational>> table_;
  std::vector<std::size_t> basis_;
};

std::string cache_key(std::span<const CodeValue> points, int dimension, std::span<const std::uint8_t> labels) {
  std::string key;
  key.reserve(2 + points.size() * 5);
  key.push_back(static_cast<char>(dimension));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const CodeValue p = points[i];
    key.append(reinterpret_cast<const char*>(&p), sizeof p);
    key.push_back(static_cast<char>(labels[i]));
  }
  return key;
}

long long to_long_long(const mpz_class& value) {
  if (!value.fits_slong_p()) throw std::overflow_error("integer weight does not fit in 64 bits");
  return value.get_si();
}

}  // namespace

Rational SeparabilityCertificate::l1_norm() const {
  Rational total = abs(bias);
  for (const auto& w : weights) total += abs(w);
  return total;
}

bool SeparabilityCertificate::verifies(std::span<const CodeValue> points, int dimension,
                                       std::span<const std::uint8_t> labels) const {
  if (weights.size() != static_cast<std::size_t>(dimension) || points.size() != labels.size()) return false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Rational z = bias;
    for (int f = 0; f < dimension; ++f) {
      if (code_bit(points[i], dimension, f)) z += weights[static_cast<std::size_t>(f)];
    }
    if (labels[i] ? z < 1 : z > -1) return false;
  }
  return true;
}

bool InfeasibilityWitness::verifies(std::span<const CodeValue> points, int dimension,
                                    std::span<const std::uint8_t> labels) const {
  if (multipliers.size() != points.size() || points.size() != labels.size()) return false;
  Rational total = 0;
  std::vector<Rational> combo(static_cast<std::size_t>(dimension) + 1);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Rational& m = multipliers[i];
    if (sgn(m) < 0) return false;
    total += m;
    for (int f = 0; f <= dimension; ++f) {
      if (feature(points[i], dimension, f)) combo[static_cast<std::size_t>(f)] += sign_of(labels[i]) * m;
    }
  }
  if (sgn(total) <= 0) return false;
  for (const auto& c : combo) {
    if (sgn(c) != 0) return false;
  }
  return true;
}

std::string InfeasibilityWitness::statement(std::span<const CodeValue> points, int dimension,
                                            std::span<const std::uint8_t> labels) const {
  // Both label classes carry equal total mass; normalize each side to a convex combination.
  Rational side_mass = 0;
  for (const auto& m : multipliers) side_mass += m;
  side_mass /= 2;
  auto side = [&](std::uint8_t label) {
    std::ostringstream out;
    bool first = true;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (labels[i] != label || sgn(multipliers[i]) == 0) continue;
      if (!first) out << " + ";
      first = false;
      out << Rational(multipliers[i] / side_mass) << "*" << format_code(points[i], dimension);
    }
    return out.str();
  };
  return "not linearly separable: " + side(1) + " (label 1) = " + side(0) + " (label 0)";
}

SeparabilityResult check_separable(std::span<const CodeValue> points, int dimension, std::span<const std::uint8_t> labels) {
  check_inputs(points, dimension, labels);
  MarginDualSimplex lp(points, dimension, labels);
  SeparabilityResult result = lp.solve(dimension);
  const bool ok = std::visit([&](const auto& r) { return r.verifies(points, dimension, labels); }, result);
  if (!ok) throw std::logic_error("separability oracle produced an unverifiable result");
  return result;
}

std::shared_ptr<const SeparabilityResult> SeparabilityCache::check(std::span<const CodeValue> points, int dimension,
                                                                   std::span<const std::uint8_t> labels) {
  const std::string key = cache_key(points, dimension, labels);
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
  }
  auto result = std::make_shared<const SeparabilityResult>(check_separable(points, dimension, labels));
  std::unique_lock lock(mutex_);
  return entries_.try_emplace(key, std::move(result)).first->second;
}

std::size_t SeparabilityCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

Rational LayerRealization::l1_norm() const {
  Rational total = 0;
  for (const auto& n : neurons) total += n.l1_norm();
  return total;
}

FeasibilityResult layer_feasible(const LayerState& state, const MappingAssignment& map, SeparabilityCache* cache) {
  if (map.target_codes.size() != state.k()) throw std::invalid_argument("mapping does not cover the layer state");
  std::vector<CodeValue> points;
  points.reserve(state.k());
  for (const auto& c : state.combos) points.push_back(c.code);

  FeasibilityResult out;
  LayerRealization realization{state.width, {}};
  std::vector<std::uint8_t> labels(state.k());
  for (int j = 0; j < map.width; ++j) {
    for (std::size_t i = 0; i < state.k(); ++i) labels[i] = static_cast<std::uint8_t>(code_bit(map.target_codes[i], map.width, j));
    std::shared_ptr<const SeparabilityResult> result =
        cache ? cache->check(points, state.width, labels)
              : std::make_shared<const SeparabilityResult>(check_separable(points, state.width, labels));
    if (!is_separable(*result)) {
      out.failing_neuron = j;
      return out;
    }
    realization.neurons.push_back(std::get<SeparabilityCertificate>(*result));
  }
  out.realization = std::move(realization);
  return out;
}

std::set<std::uint32_t> enumerate_threshold_functions(int m) {
  if (m < 1 || m > 4) throw std::out_of_range("threshold enumeration supports 1 <= m <= 4");
  constexpr int kMaxWeight = 5;
  const int corners = 1 << m;
  const int bias_limit = kMaxWeight * m + 1;
  std::set<std::uint32_t> functions;
  std::vector<int> w(static_cast<std::size_t>(m), -kMaxWeight);
  for (;;) {
    for (int b = -bias_limit; b <= bias_limit; ++b) {
      std::uint32_t labels = 0;
      for (int x = 0; x < corners; ++x) {
        int z = b;
        for (int f = 0; f < m; ++f) z += w[static_cast<std::size_t>(f)] * code_bit(static_cast<CodeValue>(x), m, f);
        if (z > 0) labels |= 1u << x;
      }
      functions.insert(labels);
    }
    int f = 0;
    while (f < m && w[static_cast<std::size_t>(f)] == kMaxWeight) w[static_cast<std::size_t>(f++)] = -kMaxWeight;
    if (f == m) break;
    ++w[static_cast<std::size_t>(f)];
  }
  return functions;
}

std::pair<std::vector<long long>, long long> integer_weights(const SeparabilityCertificate& certificate) {
  mpz_class lcm = certificate.bias.get_den();
  for (const auto& w : certificate.weights) mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), w.get_den_mpz_t());

  std::vector<mpz_class> scaled;
  for (const auto& w : certificate.weights) scaled.push_back(mpz_class(w.get_num() * (lcm / w.get_den())));
  scaled.push_back(mpz_class(certificate.bias.get_num() * (lcm / certificate.bias.get_den())));

  mpz_class common = 0;
  for (const auto& v : scaled) mpz_gcd(common.get_mpz_t(), common.get_mpz_t(), v.get_mpz_t());
  if (common > 1) {
    for (auto& v : scaled) v /= common;
  }

  std::vector<long long> weights;
  for (std::size_t f = 0; f + 1 < scaled.size(); ++f) weights.push_back(to_long_long(scaled[f]));
  return {weights, to_long_long(scaled.back())};
}

CodeValue IntegerLayer::forward(CodeValue input) const {
  CodeValue out = 0;
  for (std::size_t j = 0; j < biases.size(); ++j) {
    long long z = biases[j];
    for (int f = 0; f < input_width; ++f) {
      if (code_bit(input, input_width, f)) z += weights[j][static_cast<std::size_t>(f)];
    }
    out = (out << 1) | static_cast<CodeValue>(z > 0);
  }
  return out;
}

IntegerLayer synthesize_layer_weights(const LayerRealization& realization) {
  IntegerLayer layer;
  layer.input_width = realization.input_width;
  for (const auto& neuron : realization.neurons) {
    auto [w, b] = integer_weights(neuron);
    layer.weights.push_back(std::move(w));
    layer.biases.push_back(b);
  }
  return layer;
}

}  // namespace entroflow
