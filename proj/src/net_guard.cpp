#include "arbiter/net_guard.hpp"

#include <atomic>

namespace arbiter::net_guard {

namespace {
std::atomic<std::uint64_t> g_attempts{0};
}

std::uint64_t live_network_attempts() {
    return g_attempts.load();
}

void record_network_attempt() {
    g_attempts.fetch_add(1);
}

void reset() {
    g_attempts.store(0);
}

}  // namespace arbiter::net_guard
