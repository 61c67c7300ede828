#pragma once

#include "uwcog/netmodel.hpp"

namespace uwcog::testing {

/// 4 PU hops crossed by 4 SU hops, 2.5 km hops, cylindrical spreading.
net::NetworkSpec crossing_spec();

/// One PU hop crossed by one SU hop; six joint states.
net::NetworkSpec tiny_spec();

/// Deterministic, practically loss-free channel (single ray, very high power).
net::NetworkSpec lossless_spec(int pu_hops, int su_hops);

/// Deterministic single-ray channel with default power.
net::NetworkSpec single_ray(net::NetworkSpec spec);

}  // namespace uwcog::testing
