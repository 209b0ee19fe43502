#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "ftlwave/ftl.hpp"
#include "ftlwave/profile.hpp"
#include "ftlwave/viscous.hpp"

namespace ftlwave::io {

/// Shortest representation that round-trips a double (17 significant digits).
std::string format_g17(double v);

// Line-oriented UTF-8 text, LF newlines, 17 significant digits throughout.

/// Header "x,Q", one "x,Q(x)" pair per line.
void write_profile_csv(std::ostream& os, const Profile& profile);
Profile read_profile_csv(std::istream& is, double ell, double fbar);

/// One file per member plus an index file "q0,filename".
void write_family(const ProfileFamily& family, const std::filesystem::path& dir,
                  const std::string& prefix);

/// Header "t,i,z,rho", one row per car per recorded time.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Header "t,i,kind" with kind in {car_cross, leader_cross}.
void write_events_csv(std::ostream& os, const Trajectory& traj);

/// Header "t,x,rho", one row per cell per recorded time.
void write_pde_csv(std::ostream& os, const PdeRun& run);

/// Header "x,rho".
void write_viscous_profile_csv(std::ostream& os, const ViscousProfile& profile);

}  // namespace ftlwave::io
