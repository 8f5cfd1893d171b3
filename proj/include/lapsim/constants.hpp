#pragma once

namespace lapsim {

// Standard gravity, exact by convention everywhere in the toolkit.
inline constexpr double kGravity = 9.81;

}  // namespace lapsim
