#include "cotjudger/verifier.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "cotjudger/errors.hpp"

namespace cotjudger {

namespace fs = std::filesystem;

std::string_view to_string(VerificationMethod m) {
    return m == VerificationMethod::backend_verdict ? "backend_verdict" : "code_execution";
}

namespace {

constexpr size_t kStreamCap = 1 << 20;  // per-stream capture limit

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_command(const std::string& s) {
    std::vector<std::string> parts;
    std::istringstream is(s);
    std::string word;
    while (is >> word) parts.push_back(word);
    return parts;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* stem) {
        std::string tmpl = (fs::temp_directory_path() / (std::string(stem) + "XXXXXX")).string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) {
            throw EnvironmentError(std::string("mkdtemp failed: ") + std::strerror(errno));
        }
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

}  // namespace

std::string Verifier::extract_code(const std::string& answer_text) {
    const std::string fence = "```";
    const size_t open = answer_text.find(fence);
    if (open == std::string::npos) return trim(answer_text);
    size_t body = open + fence.size();
    // Skip an optional language tag on the fence line.
    const size_t eol = answer_text.find('\n', body);
    if (eol != std::string::npos) {
        const std::string tag = trim(answer_text.substr(body, eol - body));
        const bool is_lang_tag =
            !tag.empty() && tag.size() <= 20 && tag.find(' ') == std::string::npos;
        if (is_lang_tag || tag.empty()) body = eol + 1;
    }
    const size_t close = answer_text.find(fence, body);
    const std::string inner = close == std::string::npos
                                  ? answer_text.substr(body)
                                  : answer_text.substr(body, close - body);
    return trim(inner);
}

VerifiedAnswer Verifier::verify_answer(const AnswerCandidate& candidate,
                                       const CoTSample& sample) const {
    if (!candidate.contains_answer) {
        throw StageError("verify", "candidate for step " + std::to_string(candidate.step_id) +
                                       " carries no answer");
    }
    VerifiedAnswer out;
    out.step_id = candidate.step_id;
    out.answer_text = candidate.answer_text;

    if (sample.domain != Domain::programming) {
        out.method = VerificationMethod::backend_verdict;
        out.is_correct = candidate.is_correct.value_or(false);
        return out;
    }

    out.method = VerificationMethod::code_execution;
    const std::string code = extract_code(candidate.answer_text);
    if (code.empty()) {
        out.is_correct = false;
        out.detail = "no_extractable_code";
        return out;
    }
    if (!sample.tests) {
        out.is_correct = false;
        out.detail = "no_test_payload";
        return out;
    }
    ExecutionResult result = execute_code_tests(code, *sample.tests, options_.limits);
    out.is_correct = result.passed;
    if (!result.passed) {
        out.detail = result.timed_out ? "timeout" : trim(result.stderr_text).substr(0, 512);
    }
    return out;
}

ExecutionResult Verifier::execute_code_tests(const std::string& code,
                                             const std::string& tests,
                                             const ExecutionLimits& limits) const {
    if (limits.wall_seconds <= 0 || limits.memory_bytes == 0) {
        throw EnvironmentError("execution limits must be positive");
    }

    TempDir dir("cotjudger-exec-");
    const fs::path script = dir.path / "program.py";
    {
        std::ofstream out(script);
        out << code << "\n\n" << tests << "\n";
    }

    std::vector<std::string> argv_strings = split_command(options_.sandbox_prefix);
    argv_strings.push_back(options_.interpreter);
    argv_strings.push_back(script.string());
    std::vector<char*> argv;
    for (auto& s : argv_strings) argv.push_back(s.data());
    argv.push_back(nullptr);

    int out_pipe[2], err_pipe[2], status_pipe[2];
    if (pipe(out_pipe) || pipe(err_pipe) || pipe(status_pipe)) {
        throw EnvironmentError(std::string("pipe failed: ") + std::strerror(errno));
    }
    fcntl(status_pipe[1], F_SETFD, FD_CLOEXEC);

    const pid_t pid = fork();
    if (pid < 0) {
        throw EnvironmentError(std::string("fork failed: ") + std::strerror(errno));
    }

    if (pid == 0) {
        setsid();
        if (chdir(dir.path.c_str()) != 0) _exit(126);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        close(status_pipe[0]);

        rlimit mem{limits.memory_bytes, limits.memory_bytes};
        setrlimit(RLIMIT_AS, &mem);
        const rlim_t cpu = static_cast<rlim_t>(std::ceil(limits.wall_seconds)) + 1;
        rlimit cpu_lim{cpu, cpu + 1};
        setrlimit(RLIMIT_CPU, &cpu_lim);
        rlimit core{0, 0};
        setrlimit(RLIMIT_CORE, &core);

        setenv("HOME", dir.path.c_str(), 1);
        setenv("TMPDIR", dir.path.c_str(), 1);
        setenv("PYTHONDONTWRITEBYTECODE", "1", 1);

        execvp(argv[0], argv.data());
        const int err = errno;
        [[maybe_unused]] ssize_t n = write(status_pipe[1], &err, sizeof err);
        _exit(127);
    }

    close(out_pipe[1]);
    close(err_pipe[1]);
    close(status_pipe[1]);

    ExecutionResult result;
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(limits.wall_seconds);
    bool killed = false;

    struct pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    bool open_fd[2] = {true, true};
    std::string* sinks[2] = {&result.stdout_text, &result.stderr_text};

    while (open_fd[0] || open_fd[1]) {
        if (!killed && std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            killed = true;
            result.timed_out = true;
        }
        struct pollfd active[2];
        int map[2];
        nfds_t n = 0;
        for (int i = 0; i < 2; ++i) {
            if (open_fd[i]) {
                active[n] = fds[i];
                map[n] = i;
                ++n;
            }
        }
        const int rc = poll(active, n, 20);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (nfds_t i = 0; i < n; ++i) {
            if (active[i].revents & (POLLIN | POLLHUP | POLLERR)) {
                char buf[4096];
                const ssize_t got = read(active[i].fd, buf, sizeof buf);
                if (got > 0) {
                    std::string& sink = *sinks[map[i]];
                    if (sink.size() < kStreamCap) {
                        sink.append(buf, buf + std::min<size_t>(static_cast<size_t>(got),
                                                                kStreamCap - sink.size()));
                    }
                } else if (got == 0 ||
                           (got < 0 && errno != EAGAIN && errno != EINTR)) {
                    close(active[i].fd);
                    open_fd[map[i]] = false;
                }
            }
        }
    }
    for (int i = 0; i < 2; ++i) {
        if (open_fd[i]) close(fds[i].fd);
    }

    int exec_errno = 0;
    if (read(status_pipe[0], &exec_errno, sizeof exec_errno) == sizeof(exec_errno)) {
        close(status_pipe[0]);
        int ignored;
        waitpid(pid, &ignored, 0);
        throw EnvironmentError("cannot execute '" + argv_strings.front() +
                               "': " + std::strerror(exec_errno));
    }
    close(status_pipe[0]);

    // The child may have closed its streams and kept running; enforce the
    // wall clock while reaping.
    int status = 0;
    for (;;) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) break;
        if (!killed && std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            killed = true;
            result.timed_out = true;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    kill(-pid, SIGKILL);  // sweep stray grandchildren in the group

    if (WIFEXITED(status)) {
        result.exit_status = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_status = 128 + WTERMSIG(status);
    }
    result.passed = !result.timed_out && result.exit_status == 0;
    return result;
}

}  // namespace cotjudger
