#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace uta::env {

/// Protocol version announced in the worker's {"hello": N} frame.
inline constexpr int kSandboxProtocolVersion = 1;

struct ExecRequest {
    std::string id;
    std::string code;
    nlohmann::json tables = nlohmann::json::object();  // name -> [ {column: value}, ... ]
    std::int64_t time_limit_ms = 2000;
    std::int64_t output_cap_bytes = 65536;
};

struct ExecResponse {
    std::string id;
    bool ok = false;
    std::string stdout_text;
    nlohmann::json value;  // final expression result, serialized by the worker
    std::optional<std::string> error_text;
    std::int64_t elapsed_ms = 0;
};

nlohmann::json to_json(const ExecRequest& r);
nlohmann::json to_json(const ExecResponse& r);
ExecResponse exec_response_from_json(const nlohmann::json& j);

/// Empty string when `frame` is a well-formed request / response frame,
/// otherwise a short description of the first violation.
std::string validate_request_frame(const nlohmann::json& frame);
std::string validate_response_frame(const nlohmann::json& frame);

/// Runs CodeTool scripts. Implementations must be safe to call from
/// several episodes; they serialize internally if needed.
class CodeExecutor {
public:
    virtual ~CodeExecutor() = default;
    virtual ExecResponse execute(const ExecRequest& request) = 0;
};

struct SandboxOptions {
    std::vector<std::string> command;  // argv of the worker process
    std::chrono::milliseconds startup_timeout{5000};
    /// The supervisor hard-kills a request after time_limit * kill_factor.
    double kill_factor = 1.5;
};

/// Supervises one out-of-process worker speaking line-delimited JSON over
/// stdin/stdout: spawn on demand, handshake check, health check, restart
/// after a crash, SIGKILL on timeout. One request in flight at a time.
class SandboxClient final : public CodeExecutor {
public:
    explicit SandboxClient(SandboxOptions options);
    ~SandboxClient() override;

    SandboxClient(const SandboxClient&) = delete;
    SandboxClient& operator=(const SandboxClient&) = delete;

    /// Never throws for worker-side failures; they come back as ok=false
    /// with error_text "timeout", "worker crashed", "protocol: ...".
    /// Throws BackendError when the worker cannot be started or refuses the
    /// handshake.
    ExecResponse execute(const ExecRequest& request) override;

    /// Round-trips a {"health": n} frame. False when the worker is down.
    bool health_check();

    int restarts() const noexcept { return restarts_; }
    bool running() const noexcept { return pid_ > 0; }

private:
    void ensure_started();
    void stop(bool force);
    bool write_line(const std::string& line);
    std::optional<std::string> read_line(std::chrono::steady_clock::time_point deadline);

    SandboxOptions options_;
    std::mutex mutex_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string read_buffer_;
    std::uint64_t next_health_ = 1;
    int restarts_ = 0;
    bool started_once_ = false;
};

}  // namespace uta::env
