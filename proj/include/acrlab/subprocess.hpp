#pragma once

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "acrlab/errors.hpp"

namespace acrlab {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;

    bool ok() const { return exit_code == 0; }
};

// Minimal fork/exec runner with captured stdout/stderr. No shell involved,
// so arguments never go through word splitting or globbing.
inline RunResult run_process(const std::vector<std::string>& argv,
                             const std::filesystem::path& cwd = {},
                             const std::string& stdin_data = {}) {
    if (argv.empty()) fail(Errc::config_error, "run_process: empty argv");

    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0)
        fail(Errc::config_error, "run_process: pipe() failed");

    const pid_t pid = fork();
    if (pid < 0) fail(Errc::config_error, "run_process: fork() failed");

    if (pid == 0) {
        // child
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        close(err_pipe[1]);
        if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(127);
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        _exit(127);
    }

    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);

    // Write stdin (if any), then poll both output pipes until EOF. Polling
    // avoids deadlock when the child fills one pipe while we block on the other.
    size_t written = 0;
    if (stdin_data.empty()) {
        close(in_pipe[1]);
        in_pipe[1] = -1;
    } else {
        fcntl(in_pipe[1], F_SETFL, O_NONBLOCK);
    }

    RunResult result;
    bool out_open = true, err_open = true;
    char buf[4096];
    while (out_open || err_open || in_pipe[1] >= 0) {
        struct pollfd fds[3];
        int nfds = 0;
        int out_idx = -1, err_idx = -1, in_idx = -1;
        if (out_open) {
            out_idx = nfds;
            fds[nfds++] = {out_pipe[0], POLLIN, 0};
        }
        if (err_open) {
            err_idx = nfds;
            fds[nfds++] = {err_pipe[0], POLLIN, 0};
        }
        if (in_pipe[1] >= 0) {
            in_idx = nfds;
            fds[nfds++] = {in_pipe[1], POLLOUT, 0};
        }
        if (poll(fds, static_cast<nfds_t>(nfds), -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (out_idx >= 0 && (fds[out_idx].revents & (POLLIN | POLLHUP))) {
            const ssize_t n = read(out_pipe[0], buf, sizeof(buf));
            if (n > 0)
                result.out.append(buf, static_cast<size_t>(n));
            else
                out_open = false;
        }
        if (err_idx >= 0 && (fds[err_idx].revents & (POLLIN | POLLHUP))) {
            const ssize_t n = read(err_pipe[0], buf, sizeof(buf));
            if (n > 0)
                result.err.append(buf, static_cast<size_t>(n));
            else
                err_open = false;
        }
        if (in_idx >= 0 && (fds[in_idx].revents & (POLLOUT | POLLERR | POLLHUP))) {
            if (fds[in_idx].revents & (POLLERR | POLLHUP)) {
                close(in_pipe[1]);
                in_pipe[1] = -1;
            } else {
                const ssize_t n =
                    write(in_pipe[1], stdin_data.data() + written, stdin_data.size() - written);
                if (n > 0) written += static_cast<size_t>(n);
                if (n < 0 || written >= stdin_data.size()) {
                    close(in_pipe[1]);
                    in_pipe[1] = -1;
                }
            }
        }
    }
    close(out_pipe[0]);
    close(err_pipe[0]);
    if (in_pipe[1] >= 0) close(in_pipe[1]);

    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    return result;
}

} // namespace acrlab
