#include "support/fixtures.hpp"

namespace uwcog::testing {

net::NetworkSpec crossing_spec() {
  net::NetworkSpec s;
  s.env.spreading_factor = 1.0;
  s.topology = net::Topology::crossing(10000.0, 4, 4, -2700.0, 50.0);
  s.traffic = {0.05, 0.2};
  return s;
}

net::NetworkSpec tiny_spec() {
  net::NetworkSpec s;
  s.env.spreading_factor = 1.0;
  s.topology = net::Topology::crossing(2500.0, 1, 1, 300.0, 50.0);
  s.traffic = {0.3, 0.6};
  return s;
}

net::NetworkSpec single_ray(net::NetworkSpec spec) {
  spec.multipath.surface_reflection = 0.0;
  spec.multipath.bottom_reflection = 0.0;
  spec.multipath.length_deviation_std = 0.0;
  spec.multipath.micropath_count = 1;
  spec.multipath.micropath_delay_spread = 0.0;
  return spec;
}

net::NetworkSpec lossless_spec(int pu_hops, int su_hops) {
  net::NetworkSpec s;
  s.env.spreading_factor = 1.0;
  for (int k = 0; k <= pu_hops; ++k) s.topology.pu_nodes.emplace_back(2500.0 * k, 0.0, -50.0);
  for (int k = 0; k <= su_hops; ++k) s.topology.su_nodes.emplace_back(-20000.0, 2500.0 * k, -50.0);
  s.tx_power_db = 260.0;
  return single_ray(s);
}

}  // namespace uwcog::testing
