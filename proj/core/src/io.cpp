#include "ftlwave/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ftlwave/errors.hpp"

namespace ftlwave::io {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_profile_csv(std::ostream& os, const Profile& profile) {
  os << "x,Q\n";
  const auto& g = profile.grid();
  const auto& v = profile.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    os << format_g17(g[i]) << ',' << format_g17(v[i]) << '\n';
  }
}

Profile read_profile_csv(std::istream& is, double ell, double fbar) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("x,Q", 0) != 0) {
    throw Error("profile csv: missing 'x,Q' header");
  }
  std::vector<double> grid, values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double x, q;
    if (std::sscanf(line.c_str(), "%lf,%lf", &x, &q) != 2) {
      throw Error("profile csv: malformed line '" + line + "'");
    }
    grid.push_back(x);
    values.push_back(q);
  }
  return Profile(std::move(grid), std::move(values), ell, fbar);
}

void write_family(const ProfileFamily& family, const std::filesystem::path& dir,
                  const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / (prefix + "_index.csv"), std::ios::binary);
  index << "q0,filename\n";
  for (std::size_t i = 0; i < family.members().size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%03zu.csv", prefix.c_str(), i);
    std::ofstream member(dir / name, std::ios::binary);
    write_profile_csv(member, family.members()[i]);
    index << format_g17(family.q0s()[i]) << ',' << name << '\n';
  }
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,i,z,rho\n";
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    const auto& z = traj.positions[s];
    const auto& rho = traj.densities[s];
    for (std::size_t i = 0; i < z.size(); ++i) {
      os << format_g17(traj.times[s]) << ',' << i << ',' << format_g17(z[i]) << ','
         << format_g17(rho[i]) << '\n';
    }
  }
}

void write_events_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,i,kind\n";
  for (const Event& e : traj.events) {
    os << format_g17(e.t) << ',' << e.car << ','
       << (e.leader ? "leader_cross" : "car_cross") << '\n';
  }
}

void write_pde_csv(std::ostream& os, const PdeRun& run) {
  os << "t,x,rho\n";
  for (const PdeState& s : run.snapshots) {
    for (std::size_t j = 0; j < s.rho.size(); ++j) {
      os << format_g17(s.time) << ',' << format_g17(s.cell_center(j)) << ','
         << format_g17(s.rho[j]) << '\n';
    }
  }
}

void write_viscous_profile_csv(std::ostream& os, const ViscousProfile& profile) {
  os << "x,rho\n";
  for (std::size_t i = 0; i < profile.grid.size(); ++i) {
    os << format_g17(profile.grid[i]) << ',' << format_g17(profile.values[i]) << '\n';
  }
}

}  // namespace ftlwave::io
