#pragma once

#include <charconv>
#include <fstream>
#include <sstream>

#include "fembem/mesh.hpp"

namespace fembem {

// Reader for the Gmsh MSH 2.2 ASCII subset: $MeshFormat, $Nodes, $Elements.
// Element type 4 (4-node tetrahedron) is consumed, type 2 (triangle) is
// tolerated and ignored, anything else is an error. The first element tag is
// the physical region. Material data is attached later from the case config.
inline TetMesh load_msh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file '" + path + "'");

  TetMesh mesh;
  std::map<long, int> node_index;
  std::string line;
  long line_no = 0;

  auto fail = [&](const std::string& what) -> void {
    throw MeshError(path + ":" + std::to_string(line_no) + ": " + what);
  };
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };

  while (next_line()) {
    if (line == "$MeshFormat") {
      if (!next_line()) fail("truncated $MeshFormat");
      std::istringstream ls(line);
      std::string version;
      int file_type = -1, data_size = 0;
      ls >> version >> file_type >> data_size;
      if (!ls) fail("malformed $MeshFormat header");
      if (version.rfind("2.2", 0) != 0) fail("unsupported MSH version '" + version + "'");
      if (file_type != 0) fail("binary MSH files are not supported");
      (void)data_size;
      if (!next_line() || line != "$EndMeshFormat") fail("missing $EndMeshFormat");
    } else if (line == "$Nodes") {
      if (!next_line()) fail("truncated $Nodes");
      long n = std::stol(line);
      for (long i = 0; i < n; ++i) {
        if (!next_line()) fail("truncated node list");
        std::istringstream ls(line);
        long id;
        double x, y, z;
        ls >> id >> x >> y >> z;
        if (!ls) fail("malformed node line");
        if (!node_index.try_emplace(id, static_cast<int>(mesh.nodes.size())).second)
          fail("duplicate node id " + std::to_string(id));
        mesh.nodes.push_back(Vec3(x, y, z));
      }
      if (!next_line() || line != "$EndNodes") fail("missing $EndNodes");
    } else if (line == "$Elements") {
      if (!next_line()) fail("truncated $Elements");
      long n = std::stol(line);
      for (long i = 0; i < n; ++i) {
        if (!next_line()) fail("truncated element list");
        std::istringstream ls(line);
        long id;
        int type, ntags;
        ls >> id >> type >> ntags;
        if (!ls) fail("malformed element line");
        std::vector<long> tags(ntags);
        for (auto& t : tags) ls >> t;
        if (!ls) fail("malformed element tags");
        if (type == 2) {
          long a, b, c;
          ls >> a >> b >> c;
          if (!ls) fail("malformed triangle element");
          continue;  // surface elements are re-derived from the tets
        }
        if (type != 4)
          fail("unsupported element type " + std::to_string(type) +
               " (only 4-node tetrahedra and ignorable triangles)");
        std::array<int, 4> tet;
        for (int k = 0; k < 4; ++k) {
          long v;
          ls >> v;
          if (!ls) fail("malformed tetrahedron element");
          auto it = node_index.find(v);
          if (it == node_index.end()) fail("element references unknown node " + std::to_string(v));
          tet[k] = it->second;
        }
        mesh.tets.push_back(tet);
        mesh.region_tag.push_back(tags.empty() ? 0 : static_cast<int>(tags[0]));
      }
      if (!next_line() || line != "$EndElements") fail("missing $EndElements");
    } else if (!line.empty() && line[0] == '$') {
      // skip unknown section
      const std::string end = "$End" + line.substr(1);
      while (next_line() && line != end) {
      }
      if (line != end) fail("unterminated section");
    } else {
      fail("unexpected content outside a section");
    }
  }
  if (mesh.nodes.empty()) throw MeshError(path + ": no $Nodes section");
  if (mesh.tets.empty()) throw MeshError(path + ": no tetrahedra in $Elements");
  mesh.finalize();
  return mesh;
}

inline void write_msh(const TetMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file '" + path + "'");
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.nodes.size() << "\n";
  char buf[128];
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g %.17g\n", i + 1, mesh.nodes[i][0],
                  mesh.nodes[i][1], mesh.nodes[i][2]);
    out << buf;
  }
  out << "$EndNodes\n$Elements\n" << mesh.tets.size() << "\n";
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    out << (t + 1) << " 4 2 " << mesh.region_tag[t] << " " << mesh.region_tag[t];
    for (int v : mesh.tets[t]) out << " " << (v + 1);
    out << "\n";
  }
  out << "$EndElements\n";
  if (!out) throw IoError("failed writing mesh file '" + path + "'");
}

}  // namespace fembem
