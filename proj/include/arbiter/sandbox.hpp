#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arbiter/core.hpp"

namespace arbiter {

struct ExecutionLimits {
    std::int64_t wall_clock_ms = 10'000;
    std::int64_t memory_bytes = std::int64_t{512} << 20;
    std::int64_t max_output_bytes = std::int64_t{64} << 10;
    // Network access is always denied; it is not a tunable.

    void check() const;
};

enum class ExecutionStatus { Completed, Timeout, MemoryExceeded, OutputTruncated, LaunchFailure };

std::string execution_status_to_string(ExecutionStatus status);

struct ExecutionOutcome {
    ExecutionStatus status = ExecutionStatus::Completed;
    int exit_code = 0;  // for Completed; 128+signal when the child was killed
    std::string stdout_text;
    std::string stderr_text;
    std::int64_t duration_ms = 0;

    bool operator==(const ExecutionOutcome&) const = default;
};

/// Classification applied after the child is reaped. Factored out so the
/// decision table is testable without forcing each condition in a real child.
ExecutionOutcome classify_execution(bool launch_failed, const std::string& launch_error,
                                    bool timed_out, bool output_truncated, int wait_status,
                                    std::int64_t max_rss_bytes, const ExecutionLimits& limits);

struct InterpreterSpec {
    std::vector<std::string> argv;  // "{file}" is replaced by the snippet path
    std::string file_extension;
};

/// Runs untrusted snippets in a separate process with OS resource limits,
/// denied network syscalls, and a per-run temp dir removed afterwards.
class ExecSandbox {
  public:
    /// Registers "python3" by default.
    ExecSandbox();

    void register_interpreter(const std::string& id, InterpreterSpec spec);
    bool has_interpreter(const std::string& id) const;

    ExecutionOutcome execute(const std::string& code, const std::string& interpreter_id,
                             const ExecutionLimits& limits = {}) const;

  private:
    std::map<std::string, InterpreterSpec> interpreters_;
};

}  // namespace arbiter
