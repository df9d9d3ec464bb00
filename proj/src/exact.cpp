#include <stdexcept>

#include "kawasaki/plateau.hpp"

namespace kawasaki {

Rational omega2_rate_exact(PlateauExplorer& explorer, int i, int j) {
  if (i < 0 || i > 3 || j < 0 || j > 3) throw std::out_of_range("omega2_rate_exact: index out of range");
  const Neighborhood nb = uphill_neighborhood(explorer.catalog(), FamilyCatalog::omega1_class(i, j), explorer.torus());
  return absorption_mass_exact(explorer, nb.starts, {2});
}

}  // namespace kawasaki
