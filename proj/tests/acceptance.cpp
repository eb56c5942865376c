// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Reference values are restated here rather than taken from report.hpp so the
// library's own table cannot vouch for itself.
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <fmt/core.h>

#include "entroflow/entropy_flow.hpp"
#include "entroflow/separability.hpp"
#include "entroflow/solver.hpp"
#include "test_support.hpp"

using namespace entroflow;
namespace oracle = entroflow::testing;

namespace {

constexpr double kBitTolerance = 1e-3;
constexpr double kPropertyTolerance = 1e-9;

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  fmt::print("{} {} {}: {}\n", ok ? "PASS" : "FAIL", id, name, detail);
}

struct GateRow {
  std::string name;
  Problem problem;
  std::vector<int> layers;
  bool exists;
  double objective, c_nu, h_x_given_y;  // NaN where the table leaves it blank
};

std::vector<GateRow> gate_rows() {
  const double blank = std::nan("");
  // OR(2)* is judged by objective = C_nu = H(X|Y) = 0.476, not its printed 0.888.
  return {
      {"AND(2)", builtin_gate(Gate::And, 2), {1}, true, 1.189, 1.189, 1.189},
      {"AND(2)", builtin_gate(Gate::And, 2), {2, 1}, true, 2.377, 1.189, blank},
      {"AND(2)", builtin_gate(Gate::And, 2), {2, 2, 1}, true, 3.566, 1.189, blank},
      {"XOR(2)", builtin_gate(Gate::Xor, 2), {1}, false, blank, blank, blank},
      {"XOR(2)", builtin_gate(Gate::Xor, 2), {2, 1}, true, 1.500, 1.000, 1.000},
      {"XOR(2)", builtin_gate(Gate::Xor, 2), {2, 2, 1}, true, 2.500, 1.000, blank},
      {"AND(3)", builtin_gate(Gate::And, 3), {1}, true, 2.456, 2.456, 2.456},
      {"XOR(3)", builtin_gate(Gate::Xor, 3), {1}, false, blank, blank, blank},
      {"OR(2)*", builtin_gate(Gate::Or, 2, std::vector<double>{0.7, 0.1, 0.1, 0.1}), {1}, true, 0.476, 0.476, 0.476},
  };
}

bool close_or_blank(double got, double want) { return std::isnan(want) || std::abs(got - want) <= kBitTolerance; }

// H(R|Y) from the joint, R = rep(x).
double conditional_entropy_joint(const Problem& problem, const std::function<CodeValue(CodeValue)>& rep) {
  std::map<std::pair<CodeValue, std::size_t>, double> joint;
  std::vector<double> py(problem.y_alphabet.size(), 0.0);
  for (const auto& row : problem.support) {
    for (std::size_t y = 0; y < py.size(); ++y) {
      joint[{rep(row.input), y}] += row.probability * row.target[y];
      py[y] += row.probability * row.target[y];
    }
  }
  double h = 0.0;
  for (const auto& [key, p] : joint) h += oracle::h2(p);
  for (double p : py) h -= oracle::h2(p);
  return h;
}

// Input code -> code after every chosen layer, read off the solver's states.
std::map<CodeValue, std::vector<CodeValue>> codes_by_layer(const Problem& problem, const SolveResult& r) {
  std::map<CodeValue, std::vector<CodeValue>> out;
  for (const auto& row : problem.support) {
    CodeValue code = row.input;
    auto& path = out[row.input];
    for (std::size_t n = 0; n < r.mappings.size(); ++n) {
      const auto& combos = r.states[n].combos;
      std::size_t i = 0;
      while (combos[i].code != code) ++i;
      code = r.mappings[n].target_codes[i];
      path.push_back(code);
    }
  }
  return out;
}

std::vector<CodeValue> flat_codes(const SolveResult& r) {
  std::vector<CodeValue> out;
  for (const auto& m : r.mappings) out.insert(out.end(), m.target_codes.begin(), m.target_codes.end());
  return out;
}

void table_reproduction() {
  const auto start = std::chrono::steady_clock::now();
  int matched = 0;
  std::string misses;
  for (const auto& row : gate_rows()) {
    const auto r = solve(row.problem, Topology{row.layers});
    bool ok = r.has_solution == row.exists && r.status != SolveStatus::BudgetExhausted;
    if (ok && row.exists) {
      ok = close_or_blank(r.objective, row.objective) && close_or_blank(r.c_nu, row.c_nu) &&
           close_or_blank(r.h_x_given_y, row.h_x_given_y);
    }
    if (row.name == "OR(2)*") {
      // Direct: only Y=1 carries uncertainty, three equiprobable inputs with mass 0.3.
      const double direct = 0.3 * std::log2(3.0);
      ok = ok && std::abs(direct - 0.476) <= kBitTolerance && std::abs(r.objective - r.c_nu) <= kBitTolerance &&
           std::abs(r.c_nu - r.h_x_given_y) <= kBitTolerance && std::abs(r.h_x_given_y - direct) <= kPropertyTolerance;
    }
    matched += ok;
    if (!ok) misses += fmt::format(" {}[{}]", row.name, row.layers.size());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(1, "gate table reproduction", matched == 9 && seconds < 60.0,
         fmt::format("{}/9 rows within {}, {:.2f} s{}", matched, kBitTolerance, seconds, misses));
}

void flow_properties() {
  std::mt19937_64 rng(20240611);
  int instances = 0, entropy_ok = 0, conditional_ok = 0, distortion_ok = 0, dpi_ok = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const Problem p = oracle::random_problem(rng, 1 + trial % 3, 2 + trial % 2, trial % 3 == 0);
    std::vector<MappingAssignment> maps;
    LayerState cur = initial_state(p);
    std::uniform_int_distribution<int> width(1, 3);
    const int nu = 1 + trial % 3;
    for (int n = 0; n < nu; ++n) {
      maps.push_back(oracle::random_mapping(rng, cur, width(rng)));
      cur = apply_mapping(cur, maps.back());
    }
    const FlowTrace flow = propagate(initial_state(p), maps);
    std::map<CodeValue, CodeValue> final_code;
    for (const auto& row : p.support) {
      CodeValue code = row.input;
      for (std::size_t n = 0; n < maps.size(); ++n) {
        const auto& combos = flow.states[n].combos;
        std::size_t i = 0;
        while (combos[i].code != code) ++i;
        code = maps[n].target_codes[i];
      }
      final_code[row.input] = code;
    }
    auto identity = [](CodeValue x) { return x; };
    auto last = [&](CodeValue x) { return final_code.at(x); };
    std::vector<CodeValue> first_rep, last_rep;
    for (const auto& row : p.support) {
      first_rep.push_back(row.input);
      last_rep.push_back(final_code.at(row.input));
    }

    double sum_delta = 0.0, sum_delta_prime = 0.0;
    for (const auto& rec : flow.ledger.layers) {
      sum_delta += rec.delta;
      sum_delta_prime += rec.delta_prime;
    }
    const double ixy = oracle::mutual_info_joint(p, identity);
    const double ivy = oracle::mutual_info_joint(p, last);
    ++instances;
    entropy_ok += std::abs(sum_delta - (oracle::entropy_of_rep(p, first_rep) - oracle::entropy_of_rep(p, last_rep))) <= kPropertyTolerance;
    conditional_ok += std::abs(sum_delta_prime - (conditional_entropy_joint(p, identity) - conditional_entropy_joint(p, last))) <=
                      kPropertyTolerance;
    distortion_ok += std::abs(flow.ledger.distortion - (ixy - ivy)) <= kPropertyTolerance;
    dpi_ok += ivy <= ixy + kPropertyTolerance && mutual_info_with_target(flow.states.back()) <= ixy + kPropertyTolerance;
  }
  report(2, "entropy-flow telescoping", entropy_ok == instances, fmt::format("{}/{} instances", entropy_ok, instances));
  report(2, "conditional-flow telescoping", conditional_ok == instances, fmt::format("{}/{} instances", conditional_ok, instances));
  report(2, "distortion identity", distortion_ok == instances, fmt::format("{}/{} instances", distortion_ok, instances));
  report(2, "data processing", dpi_ok == instances, fmt::format("{}/{} instances", dpi_ok, instances));

  // The compression bound holds for chains that meet their budget, so take
  // solver output at random budgets.
  int solved = 0, bound_ok = 0;
  for (int trial = 0; solved < 120 && trial < 1000; ++trial) {
    const Problem p = oracle::random_problem(rng, 2, 2 + trial % 2, trial % 2 == 0);
    SolveOptions o;
    o.epsilon = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
    const std::vector<int> layers = trial % 2 ? std::vector<int>{2, 1} : std::vector<int>{1, 1};
    const auto r = solve(p, Topology{layers}, o);
    if (!r.has_solution) continue;
    ++solved;
    const auto paths = codes_by_layer(p, r);
    const double h_before = conditional_entropy_joint(p, [](CodeValue x) { return x; });
    const double h_after = conditional_entropy_joint(p, [&](CodeValue x) { return paths.at(x).back(); });
    bound_ok += r.c_nu <= h_before - h_after + o.epsilon + kPropertyTolerance;
  }
  report(2, "compression bound", solved >= 100 && bound_ok == solved, fmt::format("{}/{} solved instances", bound_ok, solved));
}

void separability_oracle() {
  bool ok = true;
  std::string detail;
  for (int m = 2; m <= 3; ++m) {
    std::vector<CodeValue> pts;
    for (CodeValue x = 0; x < (CodeValue{1} << m); ++x) pts.push_back(x);
    int agree = 0, separable = 0, brute = 0;
    std::set<std::uint32_t> infeasible;
    const std::uint32_t labelings = 1u << pts.size();
    for (std::uint32_t truth = 0; truth < labelings; ++truth) {
      std::vector<std::uint8_t> labels;
      for (std::size_t i = 0; i < pts.size(); ++i) labels.push_back(static_cast<std::uint8_t>((truth >> i) & 1u));
      const auto result = check_separable(pts, m, labels);
      const bool exact = is_separable(result) && std::visit([&](const auto& c) { return c.verifies(pts, m, labels); }, result);
      const bool enumerated = oracle::brute_force_separable(pts, m, labels);
      agree += exact == enumerated;
      separable += exact;
      brute += enumerated;
      if (!exact) infeasible.insert(truth);
    }
    const int expected = m == 2 ? 14 : 104;
    ok = ok && agree == static_cast<int>(labelings) && separable == expected && brute == expected;
    if (m == 2) ok = ok && infeasible == std::set<std::uint32_t>{0b0110, 0b1001};
    detail += fmt::format("m={}: {}/{} agree, {} separable; ", m, agree, labelings, separable);
  }
  report(3, "separability vs integer-weight enumeration", ok, detail + "m=2 infeasible = {XOR, XNOR}");
}

struct SolveCase {
  std::string name;
  Problem problem;
  std::vector<int> layers;
  double epsilon;
};

std::vector<SolveCase> solve_cases() {
  std::vector<SolveCase> cases;
  for (const auto& row : gate_rows()) cases.push_back({row.name, row.problem, row.layers, 1e-9});
  std::mt19937_64 rng(77);
  for (int i = 0; i < 20; ++i) {
    cases.push_back({fmt::format("random#{}", i), oracle::random_problem(rng, 2, 2 + i % 2, i % 3 == 0),
                     i % 2 ? std::vector<int>{2, 1} : std::vector<int>{1, 1}, i % 4 == 3 ? 0.25 : 1e-9});
  }
  return cases;
}

void solver_equivalence_and_weights() {
  int equal = 0, total = 0, realized = 0, optimal = 0;
  std::string misses;
  SolveResult xor_two;
  for (const auto& c : solve_cases()) {
    SolveOptions fast, naive;
    fast.epsilon = naive.epsilon = c.epsilon;
    naive.prune = naive.dedupe_states = false;
    const auto a = solve(c.problem, Topology{c.layers}, fast);
    const auto b = solve(c.problem, Topology{c.layers}, naive);
    ++total;
    const bool same = a.status == b.status && a.has_solution == b.has_solution &&
                      (!a.has_solution || (std::abs(a.objective - b.objective) <= kPropertyTolerance && flat_codes(a) == flat_codes(b)));
    equal += same;
    if (!same) misses += " " + c.name;

    if (a.status != SolveStatus::Optimal) continue;
    ++optimal;
    bool ok = true;
    for (std::size_t n = 0; n < a.mappings.size(); ++n) {
      for (std::size_t i = 0; i < a.states[n].k(); ++i) {
        ok = ok && a.weights[n].forward(a.states[n].combos[i].code) == a.mappings[n].target_codes[i];
      }
    }
    std::map<CodeValue, CodeValue> network;
    for (const auto& row : c.problem.support) {
      CodeValue x = row.input;
      for (const auto& layer : a.weights) x = layer.forward(x);
      network[row.input] = x;
    }
    const double achieved = oracle::mutual_info_joint(c.problem, [](CodeValue x) { return x; }) -
                            oracle::mutual_info_joint(c.problem, [&](CodeValue x) { return network.at(x); });
    ok = ok && std::abs(achieved - a.ledger.distortion) <= kPropertyTolerance;
    realized += ok;
  }
  report(4, "pruned search equals exhaustive search", equal == total, fmt::format("{}/{} configurations{}", equal, total, misses));
  report(5, "integer weights reproduce mappings and distortion", realized == optimal && optimal > 0,
         fmt::format("{}/{} optimal results", realized, optimal));
}

void xor_trace() {
  const Problem p = builtin_gate(Gate::Xor, 2);
  const auto r = solve(p, Topology{{2, 1}});
  bool ok = r.status == SolveStatus::Optimal && r.trace.size() == 2;
  std::string detail = "no solution";
  if (ok) {
    bool merges_corners = false;
    for (const auto& m : r.trace[0].merges) merges_corners = merges_corners || m.sources == std::vector<CodeValue>{0b00, 0b11};
    std::size_t survivors = 0;
    std::set<CodeValue> outputs;
    for (const auto& m : r.trace[1].merges) {
      survivors += m.sources.size();
      outputs.insert(m.target);
    }
    const auto paths = codes_by_layer(p, r);
    std::vector<CodeValue> x, x1, x2;
    for (const auto& row : p.support) {
      x.push_back(row.input);
      x1.push_back(paths.at(row.input)[0]);
      x2.push_back(paths.at(row.input)[1]);
    }
    const double d1 = oracle::entropy_of_rep(p, x) - oracle::entropy_of_rep(p, x1);
    const double d2 = oracle::entropy_of_rep(p, x1) - oracle::entropy_of_rep(p, x2);
    ok = merges_corners && survivors == 3 && outputs.size() == 2 && std::abs(d1 - 0.5) <= kPropertyTolerance &&
         std::abs(d2 - 0.5) <= kPropertyTolerance && std::abs(r.ledger.layers[0].delta - d1) <= kPropertyTolerance &&
         std::abs(r.ledger.layers[1].delta - d2) <= kPropertyTolerance;
    detail = fmt::format("layer 1 merges {{00,11}}: {}, layer 2 maps {} codes to {} outputs, delta = ({:.3f}, {:.3f})",
                         merges_corners ? "yes" : "no", survivors, outputs.size(), d1, d2);
  }
  report(6, "XOR(2) two-layer trace", ok, detail);
}

}  // namespace

int main() {
  table_reproduction();
  flow_properties();
  separability_oracle();
  solver_equivalence_and_weights();
  xor_trace();
  fmt::print("{}\n", failures == 0 ? "all criteria pass" : fmt::format("{} criteria failed", failures));
  return failures == 0 ? 0 : 1;
}
