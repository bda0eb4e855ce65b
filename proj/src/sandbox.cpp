#include "arbiter/sandbox.hpp"

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#ifdef __linux__
#include <linux/audit.h>
#include <linux/filter.h>
#include <linux/seccomp.h>
#include <sys/prctl.h>
#include <sys/syscall.h>
#endif

namespace arbiter {

void ExecutionLimits::check() const {
    if (wall_clock_ms <= 0 || memory_bytes <= 0 || max_output_bytes <= 0)
        throw error("execution limits must be positive");
}

std::string execution_status_to_string(ExecutionStatus status) {
    switch (status) {
        case ExecutionStatus::Completed: return "completed";
        case ExecutionStatus::Timeout: return "timeout";
        case ExecutionStatus::MemoryExceeded: return "memory_exceeded";
        case ExecutionStatus::OutputTruncated: return "output_truncated";
        case ExecutionStatus::LaunchFailure: return "launch_failure";
    }
    throw error("unknown execution status");
}

ExecutionOutcome classify_execution(bool launch_failed, const std::string& launch_error,
                                    bool timed_out, bool output_truncated, int wait_status,
                                    std::int64_t max_rss_bytes, const ExecutionLimits& limits) {
    ExecutionOutcome out;
    if (launch_failed) {
        out.status = ExecutionStatus::LaunchFailure;
        out.exit_code = 127;
        out.stderr_text = launch_error;
        return out;
    }
    if (timed_out) {
        out.status = ExecutionStatus::Timeout;
        out.exit_code = 128 + SIGKILL;
        return out;
    }
    if (WIFSIGNALED(wait_status)) {
        int sig = WTERMSIG(wait_status);
        out.exit_code = 128 + sig;
        // A kill/segfault near the address-space cap reads as the allocator
        // hitting the wall rather than a plain crash.
        if ((sig == SIGKILL || sig == SIGSEGV) &&
            max_rss_bytes >= limits.memory_bytes - limits.memory_bytes / 16) {
            out.status = ExecutionStatus::MemoryExceeded;
            return out;
        }
    } else if (WIFEXITED(wait_status)) {
        out.exit_code = WEXITSTATUS(wait_status);
    }
    out.status = output_truncated ? ExecutionStatus::OutputTruncated : ExecutionStatus::Completed;
    return out;
}

namespace {

struct TempDir {
    std::filesystem::path path;

    explicit TempDir() {
        std::string tmpl =
            (std::filesystem::temp_directory_path() / "arbiter-sbx-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw error("mkdtemp failed: " + std::string(strerror(errno)));
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

struct Pipe {
    int read_fd = -1;
    int write_fd = -1;

    Pipe() {
        int fds[2];
        if (pipe(fds) != 0) throw error("pipe failed: " + std::string(strerror(errno)));
        read_fd = fds[0];
        write_fd = fds[1];
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    void close_read() {
        if (read_fd >= 0) ::close(read_fd);
        read_fd = -1;
    }
    void close_write() {
        if (write_fd >= 0) ::close(write_fd);
        write_fd = -1;
    }
    Pipe(const Pipe&) = delete;
    Pipe& operator=(const Pipe&) = delete;
};

void set_rlimit(int resource, rlim_t value) {
    rlimit rl{value, value};
    setrlimit(resource, &rl);  // best-effort; the child cannot report failures usefully
}

#ifdef __linux__
#ifndef SECCOMP_RET_KILL_PROCESS
#define SECCOMP_RET_KILL_PROCESS SECCOMP_RET_KILL
#endif

#if defined(__x86_64__)
constexpr std::uint32_t kNativeAuditArch = AUDIT_ARCH_X86_64;
#elif defined(__aarch64__)
constexpr std::uint32_t kNativeAuditArch = AUDIT_ARCH_AARCH64;
#else
constexpr std::uint32_t kNativeAuditArch = 0;
#endif

/// Installs a syscall filter that turns socket creation and connection
/// attempts into EPERM. Returns false when the filter could not be installed;
/// callers must then refuse to run the snippet (fail closed).
bool deny_network_syscalls() {
    if (kNativeAuditArch == 0) return false;
    if (prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0) return false;

    const std::uint32_t denied[] = {
        __NR_socket,
        __NR_socketpair,
        __NR_connect,
    };
    constexpr std::uint32_t k = 3;

    std::vector<sock_filter> prog;
    prog.push_back(BPF_STMT(BPF_LD | BPF_W | BPF_ABS,
                            offsetof(struct seccomp_data, arch)));
    prog.push_back(BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, kNativeAuditArch, 1, 0));
    prog.push_back(BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS));
    prog.push_back(BPF_STMT(BPF_LD | BPF_W | BPF_ABS, offsetof(struct seccomp_data, nr)));
#if defined(__x86_64__)
    // x32 ABI numbers would sail past the equality checks below.
    prog.push_back(BPF_JUMP(BPF_JMP | BPF_JGE | BPF_K, 0x40000000u, 0, 1));
    prog.push_back(BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_KILL_PROCESS));
#endif
    for (std::uint32_t i = 0; i < k; ++i)
        prog.push_back(
            BPF_JUMP(BPF_JMP | BPF_JEQ | BPF_K, denied[i], static_cast<__u8>(k - i), 0));
    prog.push_back(BPF_STMT(BPF_RET | BPF_K, SECCOMP_RET_ALLOW));
    prog.push_back(BPF_STMT(BPF_RET | BPF_K,
                            SECCOMP_RET_ERRNO | (EPERM & SECCOMP_RET_DATA)));

    sock_fprog fprog{static_cast<unsigned short>(prog.size()), prog.data()};
    return prctl(PR_SET_SECCOMP, SECCOMP_MODE_FILTER, &fprog) == 0;
}
#else
bool deny_network_syscalls() { return false; }
#endif

/// Appends from chunk into sink up to the cap; reports whether anything was
/// dropped. Reading continues after the cap so the child never blocks on a
/// full pipe.
bool append_capped(std::string& sink, const char* data, ssize_t n, std::int64_t cap) {
    std::int64_t space = cap - static_cast<std::int64_t>(sink.size());
    if (space >= n) {
        sink.append(data, static_cast<std::size_t>(n));
        return false;
    }
    if (space > 0) sink.append(data, static_cast<std::size_t>(space));
    return true;
}

}  // namespace

ExecSandbox::ExecSandbox() {
    register_interpreter("python3", {{"python3", "{file}"}, ".py"});
}

void ExecSandbox::register_interpreter(const std::string& id, InterpreterSpec spec) {
    if (id.empty() || spec.argv.empty()) throw error("interpreter spec needs an id and argv");
    interpreters_[id] = std::move(spec);
}

bool ExecSandbox::has_interpreter(const std::string& id) const {
    return interpreters_.count(id) > 0;
}

ExecutionOutcome ExecSandbox::execute(const std::string& code, const std::string& interpreter_id,
                                      const ExecutionLimits& limits) const {
    limits.check();
    auto it = interpreters_.find(interpreter_id);
    if (it == interpreters_.end()) throw error("unregistered interpreter: " + interpreter_id);
    const InterpreterSpec& interp = it->second;

    TempDir dir;
    std::filesystem::path snippet = dir.path / ("snippet" + interp.file_extension);
    {
        std::ofstream out(snippet, std::ios::binary);
        if (!out) throw error("cannot write snippet file: " + snippet.string());
        out << code;
    }

    std::vector<std::string> argv_strings;
    for (const std::string& part : interp.argv) {
        std::string expanded;
        std::size_t pos = 0, found;
        while ((found = part.find("{file}", pos)) != std::string::npos) {
            expanded += part.substr(pos, found - pos);
            expanded += snippet.string();
            pos = found + 6;
        }
        expanded += part.substr(pos);
        argv_strings.push_back(std::move(expanded));
    }

    Pipe out_pipe, err_pipe, status_pipe;
    fcntl(status_pipe.write_fd, F_SETFD, FD_CLOEXEC);

    auto start = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) throw error("fork failed: " + std::string(strerror(errno)));

    if (pid == 0) {
        // --- child ---
        setpgid(0, 0);
        out_pipe.close_read();
        err_pipe.close_read();
        status_pipe.close_read();

        auto bail = [&](int stage) {
            int msg[2] = {stage, errno};
            ssize_t ignored = write(status_pipe.write_fd, msg, sizeof(msg));
            (void)ignored;
            _exit(127);
        };

        int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        dup2(out_pipe.write_fd, STDOUT_FILENO);
        dup2(err_pipe.write_fd, STDERR_FILENO);
        out_pipe.close_write();
        err_pipe.close_write();

        if (chdir(dir.path.c_str()) != 0) bail(0);

        set_rlimit(RLIMIT_AS, static_cast<rlim_t>(limits.memory_bytes));
        set_rlimit(RLIMIT_CPU, static_cast<rlim_t>(limits.wall_clock_ms / 1000 + 2));
        set_rlimit(RLIMIT_FSIZE, rlim_t{64} << 20);
        set_rlimit(RLIMIT_CORE, 0);
        set_rlimit(RLIMIT_NPROC, 256);

        if (!deny_network_syscalls()) {
            errno = ENOSYS;
            bail(1);
        }

        std::vector<char*> argv;
        for (auto& s : argv_strings) argv.push_back(s.data());
        argv.push_back(nullptr);
        execvp(argv[0], argv.data());
        bail(2);
    }

    // --- parent ---
    setpgid(pid, pid);  // mirrored in the child; whichever runs first wins
    out_pipe.close_write();
    err_pipe.close_write();
    status_pipe.close_write();

    // The status pipe closes on successful exec; data means setup/exec failed.
    bool launch_failed = false;
    std::string launch_error;
    {
        int msg[2];
        ssize_t n = read(status_pipe.read_fd, msg, sizeof(msg));
        if (n == static_cast<ssize_t>(sizeof(msg))) {
            launch_failed = true;
            const char* stage_name[] = {"workdir setup", "network denial setup", "interpreter launch"};
            int stage = (msg[0] >= 0 && msg[0] <= 2) ? msg[0] : 2;
            launch_error =
                std::string(stage_name[stage]) + " failed: " + strerror(msg[1]);
        }
    }
    status_pipe.close_read();

    fcntl(out_pipe.read_fd, F_SETFL, O_NONBLOCK);
    fcntl(err_pipe.read_fd, F_SETFL, O_NONBLOCK);

    std::string stdout_text, stderr_text;
    bool truncated = false;
    bool timed_out = false;
    bool killed = false;
    bool reaped = false;
    int wait_status = 0;
    rusage usage{};
    auto deadline = start + std::chrono::milliseconds(limits.wall_clock_ms);
    auto hard_stop = deadline + std::chrono::milliseconds(2000);
    std::chrono::steady_clock::time_point reap_time{};

    auto kill_group = [&] {
        kill(-pid, SIGKILL);
        kill(pid, SIGKILL);
        killed = true;
    };

    while (out_pipe.read_fd >= 0 || err_pipe.read_fd >= 0 || !reaped) {
        auto now = std::chrono::steady_clock::now();
        if (!killed && now >= deadline && !reaped) {
            timed_out = true;
            kill_group();
        }
        if (now >= hard_stop) break;  // something inherited the pipes; stop waiting
        if (reaped && reap_time.time_since_epoch().count() != 0 &&
            now >= reap_time + std::chrono::milliseconds(500))
            break;

        pollfd fds[2];
        nfds_t nfds = 0;
        int out_idx = -1, err_idx = -1;
        if (out_pipe.read_fd >= 0) {
            out_idx = static_cast<int>(nfds);
            fds[nfds++] = {out_pipe.read_fd, POLLIN, 0};
        }
        if (err_pipe.read_fd >= 0) {
            err_idx = static_cast<int>(nfds);
            fds[nfds++] = {err_pipe.read_fd, POLLIN, 0};
        }

        if (nfds > 0) {
            poll(fds, nfds, 25);
            char buf[4096];
            auto drain = [&](Pipe& p, int idx, std::string& sink) {
                if (idx < 0) return;
                if (fds[idx].revents & (POLLIN | POLLHUP | POLLERR)) {
                    while (true) {
                        ssize_t n = read(p.read_fd, buf, sizeof(buf));
                        if (n > 0) {
                            if (append_capped(sink, buf, n, limits.max_output_bytes))
                                truncated = true;
                            continue;
                        }
                        if (n == 0) {
                            p.close_read();
                        }  // n < 0: EAGAIN or error; either way stop for now
                        break;
                    }
                }
            };
            drain(out_pipe, out_idx, stdout_text);
            drain(err_pipe, err_idx, stderr_text);
        } else {
            struct timespec ts{0, 10'000'000};
            nanosleep(&ts, nullptr);
        }

        if (!reaped) {
            int status = 0;
            rusage ru{};
            pid_t r = wait4(pid, &status, WNOHANG, &ru);
            if (r == pid) {
                reaped = true;
                wait_status = status;
                usage = ru;
                reap_time = std::chrono::steady_clock::now();
            }
        }
    }

    if (!reaped) {
        kill_group();
        wait4(pid, &wait_status, 0, &usage);
        reaped = true;
    }
    if (!killed) kill_group();  // sweep stray grandchildren in the group

    auto end = std::chrono::steady_clock::now();

    ExecutionOutcome outcome =
        classify_execution(launch_failed, launch_error, timed_out, truncated, wait_status,
                           static_cast<std::int64_t>(usage.ru_maxrss) * 1024, limits);
    if (!launch_failed) {
        outcome.stdout_text = std::move(stdout_text);
        outcome.stderr_text = std::move(stderr_text);
    } else if (!stderr_text.empty()) {
        outcome.stderr_text += "\n" + stderr_text;
    }
    outcome.duration_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
    return outcome;
}

}  // namespace arbiter
