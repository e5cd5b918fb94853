#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "rbm/harness.hpp"
#include "rbm/model.hpp"

namespace rbm {

/// Shortest round-trip decimal form ('.' separator, locale independent).
std::string format_double(double v);

/// `tau,error,stderr,realizations` with a header row and LF line endings.
std::string table_csv(const ErrorTable& table);

/// `t,particle,x_1..x_d[,v_1..v_d]`, one row per particle per state.
void write_trajectory_csv(std::ostream& out, std::span<const ParticleState> states,
                          std::size_t n, std::size_t d);

}  // namespace rbm
