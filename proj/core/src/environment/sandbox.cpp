#include "uta/environment/sandbox.hpp"

#include "uta/error.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace uta::env {

using nlohmann::json;

json to_json(const ExecRequest& r) {
    return json{{"id", r.id},
                {"code", r.code},
                {"tables", r.tables},
                {"time_limit_ms", r.time_limit_ms},
                {"output_cap_bytes", r.output_cap_bytes}};
}

json to_json(const ExecResponse& r) {
    return json{{"id", r.id},
                {"ok", r.ok},
                {"stdout", r.stdout_text},
                {"value", r.value},
                {"error_text", r.error_text ? json(*r.error_text) : json(nullptr)},
                {"elapsed_ms", r.elapsed_ms}};
}

ExecResponse exec_response_from_json(const json& j) {
    ExecResponse r;
    r.id = j.at("id").get<std::string>();
    r.ok = j.at("ok").get<bool>();
    r.stdout_text = j.value("stdout", std::string{});
    r.value = j.value("value", json(nullptr));
    if (j.contains("error_text") && j["error_text"].is_string()) {
        r.error_text = j["error_text"].get<std::string>();
    }
    r.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
    return r;
}

std::string validate_request_frame(const json& f) {
    if (!f.is_object()) return "frame is not an object";
    if (!f.contains("id") || !f["id"].is_string() || f["id"].get<std::string>().empty()) return "id: non-empty string required";
    if (!f.contains("code") || !f["code"].is_string()) return "code: string required";
    if (!f.contains("tables") || !f["tables"].is_object()) return "tables: object required";
    for (const auto& [name, rows] : f["tables"].items()) {
        if (!rows.is_array()) return "tables." + name + ": array of row objects required";
        for (const auto& row : rows) {
            if (!row.is_object()) return "tables." + name + ": rows must be objects";
        }
    }
    for (const char* key : {"time_limit_ms", "output_cap_bytes"}) {
        if (!f.contains(key) || !f[key].is_number_integer() || f[key].get<std::int64_t>() <= 0) {
            return std::string(key) + ": positive integer required";
        }
    }
    return {};
}

std::string validate_response_frame(const json& f) {
    if (!f.is_object()) return "frame is not an object";
    if (!f.contains("id") || !f["id"].is_string()) return "id: string required";
    if (!f.contains("ok") || !f["ok"].is_boolean()) return "ok: boolean required";
    if (!f.contains("stdout") || !f["stdout"].is_string()) return "stdout: string required";
    if (!f.contains("value")) return "value: required (may be null)";
    if (!f.contains("error_text") || !(f["error_text"].is_string() || f["error_text"].is_null())) {
        return "error_text: string or null required";
    }
    if (!f["ok"].get<bool>() && !f["error_text"].is_string()) return "error_text: required when ok is false";
    if (!f.contains("elapsed_ms") || !f["elapsed_ms"].is_number() || f["elapsed_ms"].get<double>() < 0) {
        return "elapsed_ms: nonnegative number required";
    }
    return {};
}

SandboxClient::SandboxClient(SandboxOptions options) : options_(std::move(options)) {
    if (options_.command.empty()) {
        throw ConfigError("sandbox command is empty");
    }
    // A dead worker must surface as EPIPE on write, not kill the process.
    std::signal(SIGPIPE, SIG_IGN);
}

SandboxClient::~SandboxClient() {
    std::lock_guard lock(mutex_);
    stop(false);
}

void SandboxClient::stop(bool force) {
    if (to_child_ >= 0) {
        ::close(to_child_);
        to_child_ = -1;
    }
    if (from_child_ >= 0) {
        ::close(from_child_);
        from_child_ = -1;
    }
    if (pid_ > 0) {
        if (force) {
            ::kill(pid_, SIGKILL);
        } else {
            // Closing stdin asks the worker to exit; give it a moment.
            for (int i = 0; i < 20; ++i) {
                int status = 0;
                if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                    pid_ = -1;
                    break;
                }
                ::usleep(5000);
            }
            if (pid_ > 0) {
                ::kill(pid_, SIGKILL);
            }
        }
        if (pid_ > 0) {
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
        pid_ = -1;
    }
    read_buffer_.clear();
}

void SandboxClient::ensure_started() {
    if (pid_ > 0) {
        return;
    }
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) {
        throw BackendError("sandbox: pipe failed", 1, true);
    }
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw BackendError("sandbox: pipe failed", 1, true);
    }

    std::vector<char*> argv;
    for (auto& a : options_.command) {
        argv.push_back(a.data());
    }
    argv.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) {
        throw BackendError("sandbox: fork failed", 1, true);
    }
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::execvp(argv[0], argv.data());
        _exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    if (started_once_) {
        ++restarts_;
    }
    started_once_ = true;

    const auto hello = read_line(std::chrono::steady_clock::now() + options_.startup_timeout);
    if (!hello) {
        stop(true);
        throw BackendError("sandbox: worker did not send hello frame", 1, true);
    }
    json frame;
    try {
        frame = json::parse(*hello);
    } catch (const json::exception&) {
        stop(true);
        throw BackendError("sandbox: malformed hello frame", 1, false);
    }
    if (!frame.is_object() || !frame.contains("hello") || !frame["hello"].is_number_integer()) {
        stop(true);
        throw BackendError("sandbox: malformed hello frame", 1, false);
    }
    if (frame["hello"].get<int>() != kSandboxProtocolVersion) {
        const int got = frame["hello"].get<int>();
        stop(true);
        throw BackendError("sandbox: protocol version mismatch (worker " + std::to_string(got) + ", expected " +
                               std::to_string(kSandboxProtocolVersion) + ")",
                           1, false);
    }
}

bool SandboxClient::write_line(const std::string& line) {
    std::string buf = line;
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
        const ssize_t n = ::write(to_child_, buf.data() + off, buf.size() - off);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

std::optional<std::string> SandboxClient::read_line(std::chrono::steady_clock::time_point deadline) {
    for (;;) {
        if (const auto nl = read_buffer_.find('\n'); nl != std::string::npos) {
            std::string line = read_buffer_.substr(0, nl);
            read_buffer_.erase(0, nl + 1);
            return line;
        }
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            return std::nullopt;
        }
        const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(std::max<long long>(1, wait)));
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            return std::nullopt;
        }
        if (rc == 0) {
            continue;
        }
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) {
                continue;
            }
            return std::nullopt;  // EOF: worker exited
        }
        read_buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

ExecResponse SandboxClient::execute(const ExecRequest& request) {
    std::lock_guard lock(mutex_);
    ensure_started();

    const auto start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    };
    auto failure = [&](std::string why) {
        ExecResponse r;
        r.id = request.id;
        r.ok = false;
        r.value = nullptr;
        r.error_text = std::move(why);
        r.elapsed_ms = elapsed_ms();
        return r;
    };

    if (!write_line(to_json(request).dump())) {
        stop(true);
        return failure("worker crashed");
    }
    const auto budget = std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(request.time_limit_ms) * options_.kill_factor));
    const auto deadline = start + budget;
    const auto line = read_line(deadline);
    if (!line) {
        const bool timed_out = std::chrono::steady_clock::now() >= deadline;
        stop(true);
        return failure(timed_out ? "timeout" : "worker crashed");
    }

    json frame;
    try {
        frame = json::parse(*line);
    } catch (const json::exception&) {
        stop(true);
        return failure("protocol: response is not JSON");
    }
    if (const auto why = validate_response_frame(frame); !why.empty()) {
        stop(true);
        return failure("protocol: " + why);
    }
    ExecResponse resp = exec_response_from_json(frame);
    if (resp.id != request.id) {
        stop(true);
        return failure("protocol: response id mismatch");
    }
    return resp;
}

bool SandboxClient::health_check() {
    std::lock_guard lock(mutex_);
    try {
        ensure_started();
    } catch (const BackendError&) {
        return false;
    }
    const std::uint64_t token = next_health_++;
    if (!write_line(json{{"health", token}}.dump())) {
        stop(true);
        return false;
    }
    const auto line = read_line(std::chrono::steady_clock::now() + options_.startup_timeout);
    if (!line) {
        stop(true);
        return false;
    }
    try {
        const json frame = json::parse(*line);
        return frame.is_object() && frame.value("health", std::uint64_t{0}) == token;
    } catch (const json::exception&) {
        stop(true);
        return false;
    }
}

}  // namespace uta::env
