// Writes the structured fixture meshes (ball, torus, two balls, box) as
// Gmsh MSH 2.2 files, for the demos and the convergence studies.

#include <CLI11.hpp>
#include <iostream>

#include "fembem/fixtures.hpp"
#include "fembem/gmsh.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fixture mesh generator"};
  app.require_subcommand(1);

  std::string out = "mesh.msh";
  int n = 4, nphi = 16, m = 2;
  double radius = 1.0, r0 = 2.0, side = 1.0, offset = 3.0;
  int air_from = -1;

  auto* ball = app.add_subcommand("ball", "cube-mapped ball (boundary nodes on the sphere)");
  ball->add_option("-n", n, "cells per axis (even)")->check(CLI::PositiveNumber);
  ball->add_option("--radius", radius);
  ball->add_option("--air-from", air_from, "tag cells beyond this shell as region 2");
  ball->add_option("-o,--out", out);

  auto* torus = app.add_subcommand("torus", "revolved square cross-section");
  torus->add_option("-m", m, "cells across the cross-section");
  torus->add_option("--nphi", nphi, "azimuthal steps");
  torus->add_option("--major-radius", r0);
  torus->add_option("--side", side);
  torus->add_option("-o,--out", out);

  auto* two = app.add_subcommand("two-balls", "two disjoint balls along z");
  two->add_option("-n", n);
  two->add_option("--offset", offset, "z offset of the second ball");
  two->add_option("-o,--out", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ball->parsed()) {
      fembem::write_msh(fembem::make_ball(n, radius, air_from), out);
    } else if (torus->parsed()) {
      auto fx = fembem::make_torus(m, nphi, r0, side);
      fembem::write_msh(fx.mesh, out);
      std::cout << "toroidal cycle:";
      for (int v : fx.toroidal_cycle) std::cout << " " << v;
      std::cout << "\npoloidal cycle:";
      for (int v : fx.poloidal_cycle) std::cout << " " << v;
      std::cout << "\n";
    } else if (two->parsed()) {
      fembem::write_msh(fembem::make_two_balls(n, fembem::Vec3(0, 0, offset)), out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}
