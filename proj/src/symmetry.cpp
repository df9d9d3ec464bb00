#include "kawasaki/droplet.hpp"

namespace kawasaki {

Site apply_dihedral(int g, Site s) {
  g &= 7;
  if (g >= 4) s.x = -s.x;
  for (int r = 0; r < g % 4; ++r) s = {-s.y, s.x};
  return s;
}

Configuration apply_dihedral(int g, const Configuration& config) {
  Configuration out(config.geometry_ptr());
  const Torus& t = config.geometry();
  for (const Site& s : config.occupied_coords()) out.set(t.index(apply_dihedral(g, s)), true);
  return out;
}

}  // namespace kawasaki
