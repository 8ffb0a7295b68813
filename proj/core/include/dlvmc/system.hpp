#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dlvmc {

inline constexpr double kBohrPerAngstrom = 1.8897259886;

enum class LengthUnit { Bohr, Angstrom };

struct Nucleus {
  Eigen::Vector3d position;  // bohr
  int charge = 0;            // Z
};

/// Fixed physical system: nuclei plus electron/spin configuration.
/// Spin-up electrons occupy indices 0..n_up-1, spin-down the rest.
/// Immutable after construction; safe to share across threads.
struct Molecule {
  std::vector<Nucleus> nuclei;
  int n_el = 0;
  int n_up = 0;
  int n_dn = 0;

  int n_nuc() const { return static_cast<int>(nuclei.size()); }
  int total_charge() const;
  /// Sum over pairs Z_I Z_J / |R_I - R_J|, in Ha.
  double nuclear_repulsion() const;
  /// Throws ConfigError if any invariant is violated.
  void validate() const;
};

/// n_up = ceil(n_el/2), n_dn = floor(n_el/2).
std::pair<int, int> default_spin_assignment(int n_el);

/// Atomic number for an element symbol in H..Kr; nullopt if unknown.
std::optional<int> element_number(const std::string& symbol);
const std::string& element_symbol(int z);

/// Parse an XYZ-style listing: count line, comment line, "SYMBOL x y z" lines.
/// Coordinates are converted to bohr. Charge defaults to 0 (n_el = sum Z);
/// spin split defaults to minimal polarization unless n_up_override is given.
Molecule parse_geometry(const std::string& text, LengthUnit unit,
                        int charge = 0, std::optional<int> n_up_override = std::nullopt);

/// Inverse of parse_geometry (comment line dropped); full precision.
std::string emit_geometry(const Molecule& mol, LengthUnit unit);

}  // namespace dlvmc
