#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fembem/solver.hpp"

namespace fembem {

using nlohmann::json;

struct RegionSpec {
  double mu_r = 1.0;
  Vec3 magnetization = Vec3::Zero();
  Vec3 current_density = Vec3::Zero();
};

// Azimuthal ring/loop current: j = (current / cross_section_area) e_phi(x)
// inside the named region, sampled at the quadrature points. Covers a
// circular coil without a dedicated coil mesher.
struct LoopSource {
  int region = 0;
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3(0, 0, 1);
  double current = 0.0;
  double cross_section_area = 1.0;
};

struct MotionStep {
  int component = 0;
  Vec3 rotation_axis = Vec3(0, 0, 1);
  double rotation_angle_deg = 0.0;
  Vec3 translation = Vec3::Zero();

  RigidMotion to_motion() const {
    RigidMotion m;
    m.component = component;
    m.rotation =
        Eigen::AngleAxisd(rotation_angle_deg * kPi / 180.0, rotation_axis.normalized())
            .toRotationMatrix();
    m.translation = translation;
    return m;
  }
};

struct AmpereLoopSpec {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3(0, 0, 1);
  double radius = 1.0;
  int samples = 256;
};

struct StudySpec {
  std::vector<std::string> meshes;
  std::string mode = "convergence";  // or "mu_sweep"
  std::vector<double> mu_values;
  int sweep_region = 1;
};

struct CaseConfig {
  std::string mesh;
  std::map<int, RegionSpec> regions;
  std::string source = "regions";  // "regions" | "loop"
  LoopSource loop;
  std::vector<std::vector<int>> cycles;  // node paths for the current sheets
  int sectors = 1;
  Vec3 sector_axis = Vec3(0, 0, 1);
  std::vector<MotionStep> motion;
  SolverConfig solver;
  bool warm_start = true;
  std::string output_directory = "out";
  bool write_vtk = true;
  bool write_csv = true;
  bool fem_only = false;
  std::string analytic = "none";  // "magnetized_sphere" | "uniform" | "none"
  Vec3 analytic_B = Vec3::Zero();
  double analytic_m0 = 1.0;
  std::vector<AmpereLoopSpec> ampere_loops;
  StudySpec study;
};

namespace detail {

inline Vec3 vec3_of(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json json_of(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

}  // namespace detail

inline CaseConfig parse_config(const json& j) {
  CaseConfig c;
  try {
    c.mesh = j.value("mesh", std::string{});
    if (j.contains("regions")) {
      for (auto it = j["regions"].begin(); it != j["regions"].end(); ++it) {
        RegionSpec r;
        const json& rj = it.value();
        r.mu_r = rj.value("mu_r", 1.0);
        if (rj.contains("magnetization")) r.magnetization = detail::vec3_of(rj["magnetization"]);
        if (rj.contains("current_density"))
          r.current_density = detail::vec3_of(rj["current_density"]);
        c.regions[std::stoi(it.key())] = r;
      }
    }
    c.source = j.value("source", std::string("regions"));
    if (j.contains("loop")) {
      const json& lj = j["loop"];
      c.loop.region = lj.value("region", 0);
      if (lj.contains("center")) c.loop.center = detail::vec3_of(lj["center"]);
      if (lj.contains("axis")) c.loop.axis = detail::vec3_of(lj["axis"]);
      c.loop.current = lj.value("current", 0.0);
      c.loop.cross_section_area = lj.value("cross_section_area", 1.0);
    }
    if (j.contains("cycles"))
      for (const auto& cj : j["cycles"]) c.cycles.push_back(cj.get<std::vector<int>>());
    if (j.contains("periodicity")) {
      c.sectors = j["periodicity"].value("sectors", 1);
      if (j["periodicity"].contains("axis"))
        c.sector_axis = detail::vec3_of(j["periodicity"]["axis"]);
    }
    if (j.contains("motion"))
      for (const auto& mj : j["motion"]) {
        MotionStep s;
        s.component = mj.value("component", 0);
        if (mj.contains("rotation_axis")) s.rotation_axis = detail::vec3_of(mj["rotation_axis"]);
        s.rotation_angle_deg = mj.value("rotation_angle_deg", 0.0);
        if (mj.contains("translation")) s.translation = detail::vec3_of(mj["translation"]);
        c.motion.push_back(s);
      }
    if (j.contains("solver")) {
      const json& sj = j["solver"];
      c.solver.tolerance = sj.value("tolerance", 1e-8);
      c.solver.max_iterations = sj.value("max_iterations", 5000);
      c.solver.diagonal_shift = sj.value("diagonal_shift", c.solver.diagonal_shift);
      c.solver.gradient_correction =
          sj.value("gradient_correction", c.solver.gradient_correction);
      c.warm_start = sj.value("warm_start", true);
    }
    if (j.contains("output")) {
      const json& oj = j["output"];
      c.output_directory = oj.value("directory", std::string("out"));
      c.write_vtk = oj.value("vtk", true);
      c.write_csv = oj.value("csv", true);
    }
    c.fem_only = j.value("fem_only", false);
    if (j.contains("analytic")) {
      const json& aj = j["analytic"];
      c.analytic = aj.value("type", std::string("none"));
      c.analytic_m0 = aj.value("m0", 1.0);
      if (aj.contains("B")) c.analytic_B = detail::vec3_of(aj["B"]);
    }
    if (j.contains("ampere_loops"))
      for (const auto& aj : j["ampere_loops"]) {
        AmpereLoopSpec a;
        if (aj.contains("center")) a.center = detail::vec3_of(aj["center"]);
        if (aj.contains("axis")) a.axis = detail::vec3_of(aj["axis"]);
        a.radius = aj.value("radius", 1.0);
        a.samples = aj.value("samples", 256);
        c.ampere_loops.push_back(a);
      }
    if (j.contains("study")) {
      const json& sj = j["study"];
      if (sj.contains("meshes")) c.study.meshes = sj["meshes"].get<std::vector<std::string>>();
      c.study.mode = sj.value("mode", std::string("convergence"));
      if (sj.contains("mu_values")) c.study.mu_values = sj["mu_values"].get<std::vector<double>>();
      c.study.sweep_region = sj.value("sweep_region", 1);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

inline json to_json(const CaseConfig& c) {
  json j;
  j["mesh"] = c.mesh;
  json regions = json::object();
  for (const auto& [tag, r] : c.regions) {
    json rj;
    rj["mu_r"] = r.mu_r;
    rj["magnetization"] = detail::json_of(r.magnetization);
    rj["current_density"] = detail::json_of(r.current_density);
    regions[std::to_string(tag)] = rj;
  }
  j["regions"] = regions;
  j["source"] = c.source;
  j["loop"] = {{"region", c.loop.region},
               {"center", detail::json_of(c.loop.center)},
               {"axis", detail::json_of(c.loop.axis)},
               {"current", c.loop.current},
               {"cross_section_area", c.loop.cross_section_area}};
  j["cycles"] = c.cycles;
  j["periodicity"] = {{"sectors", c.sectors}, {"axis", detail::json_of(c.sector_axis)}};
  json motion = json::array();
  for (const auto& m : c.motion)
    motion.push_back({{"component", m.component},
                      {"rotation_axis", detail::json_of(m.rotation_axis)},
                      {"rotation_angle_deg", m.rotation_angle_deg},
                      {"translation", detail::json_of(m.translation)}});
  j["motion"] = motion;
  j["solver"] = {{"tolerance", c.solver.tolerance},
                 {"max_iterations", c.solver.max_iterations},
                 {"diagonal_shift", c.solver.diagonal_shift},
                 {"gradient_correction", c.solver.gradient_correction},
                 {"warm_start", c.warm_start}};
  j["output"] = {{"directory", c.output_directory}, {"vtk", c.write_vtk}, {"csv", c.write_csv}};
  j["fem_only"] = c.fem_only;
  j["analytic"] = {{"type", c.analytic}, {"m0", c.analytic_m0}, {"B", detail::json_of(c.analytic_B)}};
  json loops = json::array();
  for (const auto& a : c.ampere_loops)
    loops.push_back({{"center", detail::json_of(a.center)},
                     {"axis", detail::json_of(a.axis)},
                     {"radius", a.radius},
                     {"samples", a.samples}});
  j["ampere_loops"] = loops;
  j["study"] = {{"meshes", c.study.meshes},
                {"mode", c.study.mode},
                {"mu_values", c.study.mu_values},
                {"sweep_region", c.study.sweep_region}};
  return j;
}

inline CaseConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

inline void save_config(const CaseConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config '" + path + "'");
  out << to_json(c).dump(2) << "\n";
}

// Validation shared by run and study (exit code 2 on failure).
inline void validate_config(const CaseConfig& c, const TetMesh& mesh) {
  c.solver.validate();
  if (c.sectors < 1) throw ConfigError("sector count must be >= 1");
  for (int t = 0; t < mesh.n_tets(); ++t)
    if (!c.regions.count(mesh.region_tag[t]))
      throw ConfigError("no material data for region tag " +
                        std::to_string(mesh.region_tag[t]));
  for (const auto& [tag, r] : c.regions)
    if (!(r.mu_r > 0.0))
      throw ConfigError("mu_r must be positive (region " + std::to_string(tag) + ")");
  if (c.source != "regions" && c.source != "loop")
    throw ConfigError("unknown source type '" + c.source + "'");
}

}  // namespace fembem
