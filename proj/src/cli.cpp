#include "entroflow/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "entroflow/report.hpp"

namespace entroflow::cli {

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == sep) {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  return parts;
}

double parse_double(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("not a number: \"" + text + "\"");
  }
}

int parse_int(const std::string& text) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("not an integer: \"" + text + "\"");
  }
}

// NAME:ARITY[:p0,p1,...]
Problem gate_problem(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() < 2 || parts.size() > 3) throw ValidationError("gate must look like NAME:ARITY[:p0,p1,...]");
  const Gate gate = parse_gate(parts[0]);
  const int arity = parse_int(parts[1]);
  std::optional<std::vector<double>> distribution;
  if (parts.size() == 3) {
    distribution.emplace();
    for (const auto& p : split(parts[2], ',')) distribution->push_back(parse_double(p));
  }
  return builtin_gate(gate, arity, distribution);
}

Topology parse_layers(const std::string& text) {
  Topology topology;
  for (const auto& m : split(text, ',')) topology.neurons_per_layer.push_back(parse_int(m));
  validate(topology);
  return topology;
}

int worker_count() {
  if (const char* env = std::getenv("ENTROFLOW_THREADS")) {
    const int n = parse_int(env);
    if (n < 1) throw ValidationError("ENTROFLOW_THREADS must be positive");
    return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string block(const std::vector<CodeValue>& codes, int width) {
  std::vector<std::string> names;
  for (CodeValue c : codes) names.push_back(format_code(c, width));
  return fmt::format("{{{}}}", fmt::join(names, ","));
}

struct SolveArgs {
  std::string problem_path;
  std::string gate;
  std::string layers;
  double epsilon = 1e-9;
  bool json = false;
  bool weights = false;
  bool no_prune = false;
  bool no_dedupe = false;
  std::uint64_t max_nodes = SolveOptions{}.max_nodes;
};

int do_solve(const SolveArgs& args, std::ostream& out) {
  if (args.problem_path.empty() == args.gate.empty()) throw ValidationError("give exactly one of --problem or --gate");
  const Problem problem = args.gate.empty() ? load_problem(args.problem_path) : gate_problem(args.gate);
  const Topology topology = parse_layers(args.layers);
  SolveOptions options;
  options.epsilon = args.epsilon;
  options.prune = !args.no_prune;
  options.dedupe_states = !args.no_dedupe;
  options.max_nodes = args.max_nodes;
  options.threads = worker_count();
  const SolveResult result = solve(problem, topology, options);

  if (args.json) {
    out << to_json(result).dump(2) << "\n";
  } else if (!result.has_solution) {
    out << status_name(result.status) << "\n";
    out << fmt::format("H(X|Y)      {:.3f}\n", result.h_x_given_y);
  } else {
    out << fmt::format("status      {}\n", status_name(result.status));
    out << fmt::format("objective   {:.3f}\n", result.objective);
    out << fmt::format("C_nu        {:.3f}\n", result.c_nu);
    out << fmt::format("H(X|Y)      {:.3f}\n", result.h_x_given_y);
    out << fmt::format("bound       {:.3f}\n", result.bound);
    out << fmt::format("distortion  {:.3f}\n", result.ledger.distortion);
    for (std::size_t n = 0; n < result.trace.size(); ++n) {
      const auto& rec = result.ledger.layers[n];
      const auto& layer = result.trace[n];
      out << fmt::format("layer {}: delta {:.3f}  delta' {:.3f}  H {:.3f}  H|Y {:.3f}\n", n + 1, rec.delta, rec.delta_prime,
                         rec.entropy, rec.conditional_entropy);
      for (const auto& merge : layer.merges) {
        out << fmt::format("  {} -> {}\n", block(merge.sources, layer.source_width), format_code(merge.target, layer.target_width));
      }
      if (args.weights) {
        const auto& w = result.weights[n];
        for (std::size_t j = 0; j < w.biases.size(); ++j) {
          out << fmt::format("  neuron {}: w [{}] b {}\n", j + 1, fmt::join(w.weights[j], ", "), w.biases[j]);
        }
      }
    }
  }
  return result.has_solution ? kExitOk : kExitInfeasible;
}

int do_flow(const std::string& problem_path, const std::string& mapping_path, bool json, std::ostream& out) {
  const Problem problem = load_problem(problem_path);
  const nlohmann::json doc = read_json(mapping_path);
  if (!doc.is_array()) throw ParseError("mapping file must be a JSON list of per-layer objects");

  const LayerState initial = initial_state(problem);
  std::vector<MappingAssignment> maps;
  std::vector<FeasibilityResult> feasibility;
  LayerState current = initial;
  for (std::size_t n = 0; n < doc.size(); ++n) {
    const auto& layer = doc[n];
    if (!layer.is_object() || layer.empty()) throw ParseError("layer " + std::to_string(n + 1) + " mapping must be a non-empty object");
    if (layer.size() != current.k()) {
      throw ValidationError("layer " + std::to_string(n + 1) + " maps " + std::to_string(layer.size()) + " codes, " +
                            std::to_string(current.k()) + " are live");
    }
    MappingAssignment map;
    map.width = -1;
    for (const auto& combo : current.combos) {
      const std::string key = format_code(combo.code, current.width);
      if (!layer.contains(key)) throw ValidationError("layer " + std::to_string(n + 1) + " has no target for live code " + key);
      const auto& target = layer.at(key);
      if (!target.is_string()) throw ParseError("target codes must be bitstrings");
      const auto text = target.get<std::string>();
      if (map.width < 0) map.width = static_cast<int>(text.size());
      map.target_codes.push_back(parse_code(text, map.width));
    }
    if (map.width < 1 || map.width > kMaxLayerWidth) throw ValidationError("layer width must be in [1, 8]");
    feasibility.push_back(layer_feasible(current, map));
    current = apply_mapping(current, map);
    maps.push_back(std::move(map));
  }

  const FlowTrace flow = propagate(initial, maps);
  const auto info = mutual_info_with_input(flow.ledger, problem);
  const auto compression = compression_and_bound(flow.ledger, initial, flow.states.back());
  if (json) {
    nlohmann::json j = to_json(flow.ledger);
    for (std::size_t n = 0; n < maps.size(); ++n) {
      j["layers"][n]["I_X_Xn"] = info[n];
      j["layers"][n]["realizable"] = feasibility[n].feasible();
    }
    j["H_X"] = layer_entropy(initial);
    j["H_X_given_Y"] = conditional_layer_entropy(initial);
    j["bound"] = compression.bound;
    j["bound_ok"] = compression.ok;
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << fmt::format("H(X) {:.3f}  H(X|Y) {:.3f}\n", layer_entropy(initial), conditional_layer_entropy(initial));
  out << fmt::format("{:>5} {:>8} {:>8} {:>8} {:>8} {:>8}  {}\n", "layer", "delta", "delta'", "H", "H|Y", "I(X;Xn)", "realizable");
  for (std::size_t n = 0; n < maps.size(); ++n) {
    const auto& rec = flow.ledger.layers[n];
    const std::string realizable =
        feasibility[n].feasible() ? "yes" : fmt::format("no (neuron {})", feasibility[n].failing_neuron + 1);
    out << fmt::format("{:>5} {:>8.3f} {:>8.3f} {:>8.3f} {:>8.3f} {:>8.3f}  {}\n", n + 1, rec.delta, rec.delta_prime, rec.entropy,
                       rec.conditional_entropy, info[n], realizable);
  }
  out << fmt::format("objective {:.3f}  C_nu {:.3f}  bound {:.3f} ({})  distortion {:.3f}\n", flow.ledger.objective,
                     compression.c_nu, compression.bound, compression.ok ? "ok" : "violated", flow.ledger.distortion);
  return kExitOk;
}

int do_separable(const std::string& points_path, bool json, std::ostream& out) {
  const nlohmann::json doc = read_json(points_path);
  if (!doc.is_object() || !doc.contains("points") || !doc.contains("labels")) {
    throw ParseError("points file needs \"points\" and \"labels\"");
  }
  const auto& pts = doc.at("points");
  const auto& lbl = doc.at("labels");
  if (!pts.is_array() || !lbl.is_array()) throw ParseError("\"points\" and \"labels\" must be lists");
  if (pts.size() != lbl.size()) throw ValidationError("points and labels differ in length");
  int dimension = -1;
  std::vector<CodeValue> points;
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].is_string() || !lbl[i].is_number_integer()) throw ParseError("points are bitstrings and labels are 0/1");
    const auto text = pts[i].get<std::string>();
    if (dimension < 0) dimension = static_cast<int>(text.size());
    points.push_back(parse_code(text, dimension));
    const int label = lbl[i].get<int>();
    if (label != 0 && label != 1) throw ValidationError("labels must be 0 or 1");
    labels.push_back(static_cast<std::uint8_t>(label));
  }
  if (dimension < 0) dimension = 0;

  const SeparabilityResult result = check_separable(points, dimension, labels);
  if (const auto* cert = std::get_if<SeparabilityCertificate>(&result)) {
    const auto [w, b] = integer_weights(*cert);
    if (json) {
      std::vector<std::string> exact;
      for (const auto& r : cert->weights) exact.push_back(r.get_str());
      out << nlohmann::json{{"separable", true}, {"weights", w}, {"bias", b}, {"rational_weights", exact},
                            {"rational_bias", cert->bias.get_str()}}
                 .dump(2)
          << "\n";
    } else {
      out << fmt::format("SEPARABLE w [{}] b {}\n", fmt::join(w, ", "), b);
    }
  } else {
    const auto& witness = std::get<InfeasibilityWitness>(result);
    if (json) {
      std::vector<std::string> multipliers;
      for (const auto& m : witness.multipliers) multipliers.push_back(m.get_str());
      out << nlohmann::json{{"separable", false}, {"witness", multipliers},
                            {"statement", witness.statement(points, dimension, labels)}}
                 .dump(2)
          << "\n";
    } else {
      out << "INFEASIBLE " << witness.statement(points, dimension, labels) << "\n";
    }
  }
  return kExitOk;
}

int do_table1(bool json, std::ostream& out) {
  SolveOptions options;
  options.threads = worker_count();
  const auto outcomes = run_table1(options);
  bool all_pass = true;
  for (const auto& o : outcomes) all_pass = all_pass && o.pass;
  if (json) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& o : outcomes) rows.push_back(to_json(o));
    out << rows.dump(2) << "\n";
  } else {
    out << format_table1(outcomes);
  }
  return all_pass ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact information-bottleneck layer mapping solver for threshold networks"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "search optimal feasible layer mappings");
  solve_cmd->add_option("--problem", solve_args.problem_path, "problem JSON file");
  solve_cmd->add_option("--gate", solve_args.gate, "builtin gate NAME:ARITY[:p0,p1,...]");
  solve_cmd->add_option("--layers", solve_args.layers, "neurons per layer, e.g. 2,1")->required();
  solve_cmd->add_option("--epsilon", solve_args.epsilon, "distortion budget in bits");
  solve_cmd->add_option("--max-nodes", solve_args.max_nodes, "search node budget");
  solve_cmd->add_flag("--json", solve_args.json, "emit JSON");
  solve_cmd->add_flag("--weights", solve_args.weights, "print synthesized integer weights");
  solve_cmd->add_flag("--no-prune", solve_args.no_prune, "disable bound pruning");
  solve_cmd->add_flag("--no-dedupe", solve_args.no_dedupe, "disable duplicate-state elimination");

  std::string flow_problem;
  std::string flow_mapping;
  bool flow_json = false;
  auto* flow_cmd = app.add_subcommand("flow", "apply a mapping sequence and print the entropy ledger");
  flow_cmd->add_option("--problem", flow_problem, "problem JSON file")->required();
  flow_cmd->add_option("--mapping", flow_mapping, "mapping JSON file")->required();
  flow_cmd->add_flag("--json", flow_json, "emit JSON");

  std::string points_path;
  bool separable_json = false;
  auto* sep_cmd = app.add_subcommand("separable", "decide linear separability of a labeled point set");
  sep_cmd->add_option("--points", points_path, "points JSON file")->required();
  sep_cmd->add_flag("--json", separable_json, "emit JSON");

  bool table_json = false;
  auto* table_cmd = app.add_subcommand("table1", "reproduce the boolean-gate case study");
  table_cmd->add_flag("--json", table_json, "emit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (solve_cmd->parsed()) return do_solve(solve_args, out);
    if (flow_cmd->parsed()) return do_flow(flow_problem, flow_mapping, flow_json, out);
    if (sep_cmd->parsed()) return do_separable(points_path, separable_json, out);
    if (table_cmd->parsed()) return do_table1(table_json, out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitFailure;
}

}  // namespace entroflow::cli
