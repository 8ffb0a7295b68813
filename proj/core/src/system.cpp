#include "dlvmc/system.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "dlvmc/errors.hpp"

namespace dlvmc {

namespace {

const std::array<std::string, 36> kSymbols = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr"};

}  // namespace

std::optional<int> element_number(const std::string& symbol) {
  for (std::size_t i = 0; i < kSymbols.size(); ++i) {
    if (symbol == kSymbols[i]) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

const std::string& element_symbol(int z) {
  if (z < 1 || z > static_cast<int>(kSymbols.size()))
    throw ConfigError("element_symbol: Z out of supported range H..Kr: " + std::to_string(z));
  return kSymbols[static_cast<std::size_t>(z - 1)];
}

std::pair<int, int> default_spin_assignment(int n_el) {
  if (n_el < 1) throw ConfigError("default_spin_assignment: n_el must be >= 1");
  const int n_up = (n_el + 1) / 2;
  return {n_up, n_el - n_up};
}

int Molecule::total_charge() const {
  int z = 0;
  for (const auto& n : nuclei) z += n.charge;
  return z - n_el;
}

double Molecule::nuclear_repulsion() const {
  double v = 0.0;
  for (int i = 0; i < n_nuc(); ++i)
    for (int j = i + 1; j < n_nuc(); ++j)
      v += double(nuclei[i].charge) * double(nuclei[j].charge) /
           (nuclei[i].position - nuclei[j].position).norm();
  return v;
}

void Molecule::validate() const {
  if (nuclei.empty()) throw ConfigError("molecule has no nuclei");
  if (n_up + n_dn != n_el) throw ConfigError("n_up + n_dn != n_el");
  if (n_up < n_dn) throw ConfigError("canonical spin ordering requires n_up >= n_dn");
  if (n_el < 1) throw ConfigError("molecule has no electrons");
  if (n_dn < 0) throw ConfigError("n_dn < 0");
  for (const auto& n : nuclei) {
    if (n.charge < 1) throw ConfigError("nuclear charge must be >= 1");
    if (!n.position.allFinite()) throw ConfigError("non-finite nuclear position");
  }
  for (int i = 0; i < n_nuc(); ++i)
    for (int j = i + 1; j < n_nuc(); ++j)
      if ((nuclei[i].position - nuclei[j].position).norm() == 0.0)
        throw ConfigError("coincident nuclei at indices " + std::to_string(i) + "," +
                          std::to_string(j));
}

Molecule parse_geometry(const std::string& text, LengthUnit unit, int charge,
                        std::optional<int> n_up_override) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;

  auto next_line = [&](bool required) -> bool {
    if (!std::getline(in, line)) {
      if (required) throw ParseError("geometry: unexpected end of input at line " +
                                     std::to_string(lineno + 1));
      return false;
    }
    ++lineno;
    return true;
  };

  next_line(true);
  int count = 0;
  {
    std::istringstream ls(line);
    if (!(ls >> count) || count < 1)
      throw ParseError("geometry line 1: expected positive atom count, got '" + line + "'");
  }
  next_line(true);  // comment line, ignored

  Molecule mol;
  const double to_bohr = (unit == LengthUnit::Angstrom) ? kBohrPerAngstrom : 1.0;
  for (int i = 0; i < count; ++i) {
    next_line(true);
    std::istringstream ls(line);
    std::string sym;
    double x, y, z;
    if (!(ls >> sym >> x >> y >> z))
      throw ParseError("geometry line " + std::to_string(lineno) + ": expected 'SYMBOL x y z', got '" +
                       line + "'");
    std::string extra;
    if (ls >> extra)
      throw ParseError("geometry line " + std::to_string(lineno) + ": trailing content '" + extra + "'");
    auto zn = element_number(sym);
    if (!zn)
      throw ParseError("geometry line " + std::to_string(lineno) + ": unsupported element '" + sym +
                       "' (supported: H..Kr)");
    mol.nuclei.push_back({Eigen::Vector3d(x, y, z) * to_bohr, *zn});
  }

  int z_total = 0;
  for (const auto& n : mol.nuclei) z_total += n.charge;
  mol.n_el = z_total - charge;
  if (mol.n_el < 1)
    throw ConfigError("geometry: charge " + std::to_string(charge) + " leaves no electrons");
  if (n_up_override) {
    mol.n_up = *n_up_override;
    mol.n_dn = mol.n_el - mol.n_up;
  } else {
    std::tie(mol.n_up, mol.n_dn) = default_spin_assignment(mol.n_el);
  }
  mol.validate();
  return mol;
}

std::string emit_geometry(const Molecule& mol, LengthUnit unit) {
  const double from_bohr = (unit == LengthUnit::Angstrom) ? 1.0 / kBohrPerAngstrom : 1.0;
  std::ostringstream out;
  out.precision(17);
  out << mol.n_nuc() << "\n\n";
  for (const auto& n : mol.nuclei) {
    out << element_symbol(n.charge) << " " << n.position.x() * from_bohr << " "
        << n.position.y() * from_bohr << " " << n.position.z() * from_bohr << "\n";
  }
  return out.str();
}

}  // namespace dlvmc
