#pragma once

#include <cstdint>

// Counts attempted live network operations (chat backends, live search).
// Offline test suites assert the counter stays at zero.
namespace arbiter::net_guard {

std::uint64_t live_network_attempts();
void record_network_attempt();
void reset();

}  // namespace arbiter::net_guard
