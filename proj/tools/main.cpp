// eikcouple command-line front end.
//
// Exit codes: 0 success, 2 invalid input (config, mesh, network, flags),
// 3 solver failure, 1 anything else (I/O).
// EIKCOUPLE_LOG=quiet|info|debug sets stderr verbosity (default info).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eikcouple/coupling.hpp"
#include "eikcouple/mesh_io.hpp"
#include "eikcouple/network.hpp"
#include "eikcouple/scenario.hpp"

namespace ek = eikcouple;

namespace {

enum class LogLevel { quiet, info, debug };

LogLevel log_level() {
  const char* env = std::getenv("EIKCOUPLE_LOG");
  if (!env) return LogLevel::info;
  const std::string v(env);
  if (v == "quiet" || v == "0") return LogLevel::quiet;
  if (v == "debug" || v == "2") return LogLevel::debug;
  return LogLevel::info;
}

struct Overrides {
  std::optional<std::string> mode;
  std::optional<int> n_max;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output_dir;
};

ek::ScenarioConfig load_with_overrides(const std::string& path, const Overrides& o) {
  auto cfg = ek::load_scenario(path);
  if (o.mode) cfg.solver.mode = ek::detail::parse_mode(*o.mode, "--mode");
  if (o.n_max) {
    if (*o.n_max < 1) throw ek::ValidationError("--n-max: must be >= 1");
    cfg.coupling.n_max = *o.n_max;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) {
    if (*o.threads < 1) throw ek::ValidationError("--threads: must be >= 1");
    cfg.threads = *o.threads;
  }
  if (o.output_dir) cfg.output_dir = std::filesystem::absolute(*o.output_dir).string();
  return cfg;
}

void print_summary(const ek::RunSummary& s) {
  auto ms = [](double x) { return ek::format_number(x, ek::kTimeDigits); };
  std::cout << "mean " << ms(s.mean_ms) << " ms, std " << ms(s.stddev_ms) << " ms, TAT " << ms(s.tat_ms)
            << " ms, EAT " << ms(s.eat_ms) << " ms\n"
            << "PMJs " << s.pmjs << ": OO " << s.counts.oo << ", OA " << s.counts.oa << ", A " << s.counts.antidromic
            << ", C " << s.counts.collision << '\n'
            << "iterations " << s.iterations << (s.fixed_point ? " (fixed point)" : " (no fixed point)") << ", "
            << ek::format_number(s.wall_clock_s, 4) << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled Purkinje network / myocardium activation solver"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path, mesh_path, network_path, out_path;

  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--mode", ov.mode, "Pseudo-time method: novel or classic")->check(CLI::IsMember({"novel", "classic"}));
    sub->add_option("--n-max", ov.n_max, "Coupling iterations");
    sub->add_option("--seed", ov.seed, "Seed for the synthetic tree");
    sub->add_option("--threads", ov.threads, "Worker threads for the muscle operator");
    sub->add_option("--output-dir", ov.output_dir, "Output directory");
  };

  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("config", config_path, "Scenario YAML")->required();
  add_overrides(run);

  auto* validate = app.add_subcommand("validate", "Check a scenario and print its effective configuration");
  validate->add_option("config", config_path, "Scenario YAML")->required();
  add_overrides(validate);

  auto* mesh_info = app.add_subcommand("mesh-info", "Describe a mesh file");
  mesh_info->add_option("mesh", mesh_path, "Mesh (.vtk or text)")->required();

  auto* network_info = app.add_subcommand("network-info", "Describe a network file");
  network_info->add_option("network", network_path, "Network text file")->required();

  int slab_dim = 3;
  std::vector<double> slab_lengths{0.04, 0.02, 0.002};
  std::vector<int> slab_divisions{40, 20, 2};
  auto* gen_slab = app.add_subcommand("gen-slab", "Write a structured simplicial slab");
  gen_slab->add_option("--dim", slab_dim, "Dimension (1-3)")->check(CLI::Range(1, 3));
  gen_slab->add_option("--lengths", slab_lengths, "Side lengths [m]")->expected(1, 3);
  gen_slab->add_option("--divisions", slab_divisions, "Divisions per axis")->expected(1, 3);
  gen_slab->add_option("-o,--output", out_path, "Output file (.vtk or text)")->required();

  ek::TreeSpec tree;
  std::vector<double> tree_root{0.0, 0.0, 0.0};
  auto* gen_tree = app.add_subcommand("gen-tree", "Write a synthetic binary tree network");
  gen_tree->add_option("--depth", tree.depth, "Generations below the root");
  gen_tree->add_option("--segment-length", tree.segment_length, "First segment length [m]");
  gen_tree->add_option("--length-ratio", tree.length_ratio, "Child/parent length ratio");
  gen_tree->add_option("--branch-angle", tree.branch_angle, "Sibling opening angle [rad]");
  gen_tree->add_option("--heading", tree.heading, "Direction of the first split [rad]");
  gen_tree->add_option("--jitter", tree.angle_jitter, "Random angle perturbation [rad]");
  gen_tree->add_option("--root", tree_root, "Root position [m]")->expected(3);
  gen_tree->add_option("--c-p", tree.conduction_velocity, "Conduction velocity [m/s]");
  gen_tree->add_option("--seed", ov.seed, "Seed for the jitter");
  gen_tree->add_option("-o,--output", out_path, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const LogLevel level = log_level();
  std::ostream* info = level == LogLevel::quiet ? nullptr : &std::cerr;

  try {
    if (*run) {
      auto cfg = load_with_overrides(config_path, ov);
      if (level == LogLevel::debug) cfg.solver.log = &std::cerr;
      const auto res = ek::run_scenario(cfg, info);
      print_summary(res.summary);
      if (info) *info << "outputs written to " << res.output_dir.string() << '\n';
    } else if (*validate) {
      const auto cfg = load_with_overrides(config_path, ov);
      const auto model = ek::build_model(cfg);
      std::cout << ek::effective_config(cfg, &model);
      if (info)
        *info << "valid: " << model.mesh.num_vertices() << " vertices, " << model.mesh.num_cells() << " cells, "
              << model.network.num_nodes() << " network nodes, " << model.registry.size() << " PMJs, "
              << model.muscular.size() << " muscular stimulus vertices\n";
    } else if (*mesh_info) {
      const auto mesh = ek::load_mesh(mesh_path);
      std::cout << "dim " << mesh.dim() << "\nvertices " << mesh.num_vertices() << "\ncells " << mesh.num_cells()
                << "\nmeasure " << ek::format_number(mesh.total_measure(), 9) << "\naverage_edge "
                << ek::format_number(mesh.average_edge_length(), 9) << "\ndiameter "
                << ek::format_number(mesh.bounding_diameter(), 9) << '\n';
    } else if (*network_info) {
      const auto net = ek::read_network(network_path);
      const auto act = ek::solve_network(net, {{{net.avn_node(), 0.0}}});
      double latest = 0.0;
      std::size_t reached = 0;
      for (ek::Index t : net.terminal_nodes())
        if (act.reached(t)) {
          ++reached;
          latest = std::max(latest, act.times[t]);
        }
      std::cout << "nodes " << net.num_nodes() << "\nedges " << net.num_edges() << "\nterminals "
                << net.terminal_nodes().size() << "\navn " << net.avn_node() << "\nc_p "
                << ek::format_number(net.conduction_velocity(), 9) << "\ntotal_length "
                << ek::format_number(net.total_length(), 9) << "\nterminals_reached " << reached
                << "\nlatest_terminal_ms " << ek::format_number(latest * 1e3, ek::kTimeDigits) << '\n';
    } else if (*gen_slab) {
      const auto mesh = ek::build_structured_slab(slab_dim, slab_lengths, slab_divisions);
      if (ek::mesh_format_from_path(out_path) == ek::MeshFormat::legacy_vtk_ascii)
        ek::write_vtk(out_path, mesh);
      else
        ek::write_text_mesh(out_path, mesh);
      if (info) *info << "wrote " << mesh.num_vertices() << " vertices, " << mesh.num_cells() << " cells\n";
    } else if (*gen_tree) {
      tree.root = {tree_root[0], tree_root[1], tree_root[2]};
      if (ov.seed) tree.seed = *ov.seed;
      const auto net = ek::build_synthetic_tree(tree);
      ek::write_network(out_path, net);
      if (info) *info << "wrote " << net.num_nodes() << " nodes, " << net.terminal_nodes().size() << " terminals\n";
    }
  } catch (const ek::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ek::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ek::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
