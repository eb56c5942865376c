#include "entroflow/problem.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace entroflow {

namespace {

std::string describe(double value) {
  std::ostringstream out;
  out << value;
  return out.str();
}

double row_sum(const std::vector<double>& row) {
  double total = 0.0;
  for (double v : row) total += v;
  return total;
}

}  // namespace

std::string format_code(CodeValue value, int width) {
  std::string text(static_cast<std::size_t>(width), '0');
  for (int i = 0; i < width; ++i) {
    if (code_bit(value, width, i)) text[static_cast<std::size_t>(i)] = '1';
  }
  return text;
}

CodeValue parse_code(std::string_view text, int expected_width) {
  CodeValue value = 0;
  for (char c : text) {
    if (c != '0' && c != '1') throw ParseError("bitstring \"" + std::string(text) + "\" contains a non-binary character");
    value = (value << 1) | static_cast<CodeValue>(c == '1');
  }
  if (static_cast<int>(text.size()) != expected_width) {
    throw ValidationError("bit length mismatch: \"" + std::string(text) + "\" has " + std::to_string(text.size()) +
                          " bits, expected " + std::to_string(expected_width));
  }
  return value;
}

std::vector<double> Problem::y_prior() const {
  std::vector<double> prior(y_alphabet.size(), 0.0);
  for (const auto& row : support) {
    for (std::size_t y = 0; y < prior.size() && y < row.target.size(); ++y) prior[y] += row.probability * row.target[y];
  }
  return prior;
}

namespace {

void require_positive(double probability, const std::string& code) {
  if (!(probability > 0.0)) {
    throw ValidationError("nonpositive probability " + describe(probability) + " for " + code +
                          "; remove zero-mass combinations from the distribution");
  }
}

}  // namespace

void validate(const Problem& problem) {
  if (problem.input_bits < 1 || problem.input_bits > kMaxInputBits) {
    throw ValidationError("input_bits must be in [1, " + std::to_string(kMaxInputBits) + "], got " +
                          std::to_string(problem.input_bits));
  }
  if (problem.support.empty()) throw ValidationError("distribution is empty");
  if (problem.y_alphabet.empty()) throw ValidationError("target alphabet is empty");

  const CodeValue limit = CodeValue{1} << problem.input_bits;
  std::set<CodeValue> seen;
  double total = 0.0;
  for (const auto& row : problem.support) {
    const std::string code = format_code(row.input, problem.input_bits);
    if (row.input >= limit) throw ValidationError("bit length mismatch: input exceeds " + std::to_string(problem.input_bits) + " bits");
    if (!seen.insert(row.input).second) throw ValidationError("duplicate bitvector " + code);
    require_positive(row.probability, code);
    if (row.probability > 1.0 + kProbabilityTolerance) throw ValidationError("probability above 1 for " + code);
    if (row.target.size() != problem.y_alphabet.size()) throw ValidationError("target row for " + code + " has wrong arity");
    for (double v : row.target) {
      if (!(v >= 0.0)) throw ValidationError("negative target probability for " + code);
    }
    const double s = row_sum(row.target);
    if (std::abs(s - 1.0) > kProbabilityTolerance) throw ValidationError("target row for " + code + " sums to " + describe(s));
    total += row.probability;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) throw ValidationError("distribution sums to " + describe(total));

  const auto prior = problem.y_prior();
  for (std::size_t y = 0; y < prior.size(); ++y) {
    if (!(prior[y] > 0.0)) throw ValidationError("target symbol \"" + problem.y_alphabet[y] + "\" has zero prior");
  }
}

Problem parse_problem(const nlohmann::json& document) {
  if (!document.is_object()) throw ParseError("problem document must be a JSON object");
  for (const char* key : {"input_bits", "distribution", "target"}) {
    if (!document.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"");
  }
  const auto& bits = document.at("input_bits");
  if (!bits.is_number_integer()) throw ParseError("\"input_bits\" must be an integer");
  const auto& dist = document.at("distribution");
  const auto& target = document.at("target");
  if (!dist.is_object()) throw ParseError("\"distribution\" must be an object");
  if (!target.is_object()) throw ParseError("\"target\" must be an object");

  Problem problem;
  problem.input_bits = bits.get<int>();
  if (problem.input_bits < 1 || problem.input_bits > kMaxInputBits) {
    throw ValidationError("input_bits must be in [1, " + std::to_string(kMaxInputBits) + "], got " +
                          std::to_string(problem.input_bits));
  }

  // Raw target rows keyed by symbol; the alphabet is fixed once all rows are read.
  std::map<CodeValue, std::pair<double, std::map<std::string, double>>> rows;
  for (const auto& [key, value] : dist.items()) {
    if (!value.is_number()) throw ParseError("probability for \"" + key + "\" must be a number");
    const CodeValue code = parse_code(key, problem.input_bits);
    if (rows.contains(code)) throw ValidationError("duplicate bitvector " + key);
    rows[code].first = value.get<double>();
  }
  for (const auto& [key, value] : target.items()) {
    const CodeValue code = parse_code(key, problem.input_bits);
    auto it = rows.find(code);
    if (it == rows.end()) throw ValidationError("target given for " + key + " which is not in the distribution");
    auto& cond = it->second.second;
    if (value.is_string()) {
      cond[value.get<std::string>()] = 1.0;
    } else if (value.is_object()) {
      for (const auto& [symbol, mass] : value.items()) {
        if (!mass.is_number()) throw ParseError("target mass for \"" + key + "\" / \"" + symbol + "\" must be a number");
        cond[symbol] = mass.get<double>();
      }
    } else {
      throw ParseError("target for \"" + key + "\" must be a symbol string or an object");
    }
  }
  for (const auto& [code, row] : rows) {
    if (row.second.empty()) throw ValidationError("missing target for " + format_code(code, problem.input_bits));
    require_positive(row.first, format_code(code, problem.input_bits));
  }

  // Alphabet: sorted symbols with positive prior.
  std::map<std::string, double> prior;
  for (const auto& [code, row] : rows) {
    for (const auto& [symbol, mass] : row.second) prior[symbol] += row.first * mass;
  }
  for (const auto& [symbol, p] : prior) {
    if (p > 0.0) problem.y_alphabet.push_back(symbol);
  }
  for (const auto& [code, row] : rows) {
    SupportRow out{code, row.first, std::vector<double>(problem.y_alphabet.size(), 0.0)};
    for (std::size_t y = 0; y < problem.y_alphabet.size(); ++y) {
      auto it = row.second.find(problem.y_alphabet[y]);
      if (it != row.second.end()) out.target[y] = it->second;
    }
    // Mass on a dropped symbol still has to count against the row sum check.
    double dropped = 0.0;
    for (const auto& [symbol, mass] : row.second) {
      if (std::find(problem.y_alphabet.begin(), problem.y_alphabet.end(), symbol) == problem.y_alphabet.end()) dropped += mass;
    }
    if (dropped != 0.0) throw ValidationError("target row for " + format_code(code, problem.input_bits) + " puts mass on a zero-prior symbol");
    problem.support.push_back(std::move(out));
  }

  validate(problem);
  return problem;
}

Problem load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  nlohmann::json document;
  try {
    document = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_problem(document);
}

nlohmann::json to_json(const Problem& problem) {
  nlohmann::json dist = nlohmann::json::object();
  nlohmann::json target = nlohmann::json::object();
  for (const auto& row : problem.support) {
    const std::string key = format_code(row.input, problem.input_bits);
    dist[key] = row.probability;
    auto point = std::find(row.target.begin(), row.target.end(), 1.0);
    if (point != row.target.end()) {
      target[key] = problem.y_alphabet[static_cast<std::size_t>(point - row.target.begin())];
    } else {
      nlohmann::json cond = nlohmann::json::object();
      for (std::size_t y = 0; y < row.target.size(); ++y) {
        if (row.target[y] != 0.0) cond[problem.y_alphabet[y]] = row.target[y];
      }
      target[key] = cond;
    }
  }
  return {{"input_bits", problem.input_bits}, {"distribution", dist}, {"target", target}};
}

Gate parse_gate(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  if (upper == "AND") return Gate::And;
  if (upper == "OR") return Gate::Or;
  if (upper == "XOR") return Gate::Xor;
  throw ValidationError("unknown gate \"" + std::string(name) + "\" (expected AND, OR or XOR)");
}

std::string_view gate_name(Gate gate) {
  switch (gate) {
    case Gate::And: return "AND";
    case Gate::Or: return "OR";
    case Gate::Xor: return "XOR";
  }
  return "?";
}

Problem builtin_gate(Gate gate, int arity, const std::optional<std::vector<double>>& distribution) {
  if (arity != 2 && arity != 3) throw ValidationError("invalid arity " + std::to_string(arity) + " (expected 2 or 3)");
  const std::size_t n = std::size_t{1} << arity;
  if (distribution && distribution->size() != n) {
    throw ValidationError("explicit distribution has " + std::to_string(distribution->size()) + " entries, expected " +
                          std::to_string(n));
  }

  Problem problem;
  problem.input_bits = arity;
  problem.y_alphabet = {"0", "1"};
  for (CodeValue x = 0; x < n; ++x) {
    const int ones = std::popcount(x);
    int y = 0;
    switch (gate) {
      case Gate::And: y = ones == arity; break;
      case Gate::Or: y = ones > 0; break;
      case Gate::Xor: y = ones % 2; break;
    }
    SupportRow row{x, distribution ? (*distribution)[x] : 1.0 / static_cast<double>(n), {0.0, 0.0}};
    row.target[static_cast<std::size_t>(y)] = 1.0;
    problem.support.push_back(std::move(row));
  }
  validate(problem);
  return problem;
}

void validate(const Topology& topology) {
  if (topology.neurons_per_layer.empty()) throw ValidationError("topology needs at least one layer");
  for (int m : topology.neurons_per_layer) {
    if (m < 1) throw ValidationError("every layer needs at least one neuron");
  }
}

}  // namespace entroflow
