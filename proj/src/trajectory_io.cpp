#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fdelab/evolve.hpp"

namespace fdelab {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json grid_json(const Grid& g) {
  ordered_json j;
  j["dimension"] = g.dimension();
  ordered_json ext = ordered_json::array(), nodes = ordered_json::array();
  for (int k = 0; k < g.dimension(); ++k) {
    ext.push_back({g.axis(k).lo, g.axis(k).hi});
    nodes.push_back(g.nodes(k));
  }
  j["extents"] = ext;
  j["nodes"] = nodes;
  return j;
}

}  // namespace

void write_trajectory(const std::string& dir, const Trajectory& traj) {
  fs::create_directories(dir);
  ordered_json meta;
  meta["frame"] = to_string(traj.frame());
  meta["p"] = traj.p();
  meta["b"] = traj.b();
  const DtPolicy& pol = traj.policy();
  meta["dt_policy"] = {
      {"kind", pol.kind == DtPolicy::Kind::fixed ? "fixed" : "adaptive"},
      {"dt", pol.dt},
      {"dt_min", pol.dt_min},
      {"snapshot_interval", pol.snapshot_interval},
      {"geometric_ratio", pol.geometric_ratio},
      {"max_halvings", pol.max_halvings},
      {"extinction_guard", pol.extinction_guard},
  };
  if (!traj.empty()) meta["grid"] = grid_json(traj[0].u.grid());
  meta["extinction_floor"] = traj.extinction_floor;
  meta["reached_floor"] = traj.reached_floor;
  meta["steps"] = traj.steps;
  meta["halvings"] = traj.halvings;
  meta["snapshots"] = traj.size();
  std::ofstream(fs::path(dir) / "meta.json") << meta.dump(2) << '\n';

  std::ofstream times(fs::path(dir) / "times.csv");
  times << "k,t\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    times << k << ',' << format_double(traj[k].t) << '\n';
    write_csv((fs::path(dir) / ("snap_" + std::to_string(k) + ".csv")).string(), traj[k].u);
  }
  if (!times) throw ConfigError("failed writing " + dir + "/times.csv");
}

Trajectory read_trajectory(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "meta.json");
  if (!in) throw ConfigError("no meta.json in " + dir);
  const auto meta = nlohmann::json::parse(in);
  DtPolicy pol;
  const auto& jp = meta.at("dt_policy");
  pol.kind = jp.at("kind").get<std::string>() == "fixed" ? DtPolicy::Kind::fixed : DtPolicy::Kind::adaptive;
  pol.dt = jp.at("dt");
  pol.dt_min = jp.at("dt_min");
  pol.snapshot_interval = jp.at("snapshot_interval");
  pol.geometric_ratio = jp.at("geometric_ratio");
  pol.max_halvings = jp.at("max_halvings");
  pol.extinction_guard = jp.value("extinction_guard", true);
  Trajectory traj(frame_from_string(meta.at("frame")), meta.at("p"), meta.at("b"), pol);
  traj.extinction_floor = meta.value("extinction_floor", 0.0);
  traj.reached_floor = meta.value("reached_floor", false);
  traj.steps = meta.value("steps", 0L);
  traj.halvings = meta.value("halvings", 0L);

  const std::size_t count = meta.at("snapshots");
  if (count == 0) return traj;
  const auto& jg = meta.at("grid");
  std::vector<Interval> ext;
  std::vector<Index> nodes;
  for (const auto& e : jg.at("extents")) ext.push_back({e.at(0), e.at(1)});
  for (const auto& n : jg.at("nodes")) nodes.push_back(n.get<Index>());
  const GridPtr grid = build_grid(jg.at("dimension"), ext, nodes);

  std::ifstream times(fs::path(dir) / "times.csv");
  std::string line;
  std::getline(times, line);
  if (line != "k,t") throw ConfigError("bad times.csv header in " + dir);
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(times, line)) throw ConfigError("times.csv is short in " + dir);
    const auto comma = line.find(',');
    if (comma == std::string::npos || std::stoul(line.substr(0, comma)) != k) {
      throw ConfigError("times.csv row " + std::to_string(k) + " is malformed");
    }
    const double t = std::stod(line.substr(comma + 1));
    traj.append(t, read_csv((fs::path(dir) / ("snap_" + std::to_string(k) + ".csv")).string(), grid,
                            Boundary::dirichlet));
  }
  return traj;
}

}  // namespace fdelab
