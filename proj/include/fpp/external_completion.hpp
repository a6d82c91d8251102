#pragma once

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <pthread.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "fpp/completion.hpp"

namespace fpp {

// Wire format (all integers little-endian):
//   u32 header_length | header JSON (UTF-8) | planes
// Request planes: sparse_depth f32[w*h] (NaN = missing), guidance f32[w*h],
// mask u8[w*h] (1 = unreliable). Response: a single dense_depth f32[w*h].

namespace protocol {

inline constexpr int kSchemaVersion = 1;

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline std::vector<std::uint8_t> frame(const nlohmann::json& header, const std::vector<std::uint8_t>& payload) {
  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(4 + text.size() + payload.size());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

/// Splits a message into its JSON header and the byte offset of the planes.
inline std::pair<nlohmann::json, std::size_t> unframe(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw ProtocolError("message shorter than its length prefix");
  const std::uint32_t len = get_u32(bytes.data());
  if (bytes.size() < 4ull + len) throw ProtocolError("header length exceeds message size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 4, bytes.begin() + 4 + len);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed header: ") + e.what());
  }
  if (!header.is_object()) throw ProtocolError("header must be a JSON object");
  return {header, 4 + std::size_t(len)};
}

inline std::vector<std::uint8_t> encode_request(const CompletionRequest& req) {
  req.validate();
  const std::size_t n = req.unreliable.size();
  std::vector<std::uint8_t> payload;
  payload.reserve(n * 9);
  for (std::size_t i = 0; i < n; ++i)
    put_f32(payload, req.sparse_depth.valid[i] ? static_cast<float>(req.sparse_depth.z[i]) : std::numeric_limits<float>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) put_f32(payload, static_cast<float>(req.guidance[i]));
  for (std::size_t i = 0; i < n; ++i) payload.push_back(req.unreliable[i] ? 1 : 0);
  const nlohmann::json header{{"schema_version", kSchemaVersion},
                              {"kind", "completion_request"},
                              {"width", req.width()},
                              {"height", req.height()},
                              {"dtype", "f32le"},
                              {"fields", {"sparse_depth", "guidance", "mask"}},
                              {"mask_dtype", "u8"}};
  return frame(header, payload);
}

struct DecodedRequest {
  int width = 0, height = 0;
  ImageF64 sparse_depth, guidance;
  Mask mask;
};

inline void check_dims(const nlohmann::json& header, int& w, int& h) {
  if (!header.contains("width") || !header.contains("height") || !header["width"].is_number_integer() ||
      !header["height"].is_number_integer())
    throw ProtocolError("header lacks integer width/height");
  w = header["width"].get<int>();
  h = header["height"].get<int>();
  if (w <= 0 || h <= 0) throw ProtocolError("non-positive dimensions in header");
  if (header.value("dtype", "") != "f32le") throw ProtocolError("unsupported dtype");
}

inline DecodedRequest decode_request(const std::vector<std::uint8_t>& bytes) {
  auto [header, offset] = unframe(bytes);
  DecodedRequest out;
  check_dims(header, out.width, out.height);
  const std::size_t n = std::size_t(out.width) * std::size_t(out.height);
  if (bytes.size() != offset + n * 9) throw ProtocolError("request payload size does not match dimensions");
  out.sparse_depth = ImageF64(out.width, out.height);
  out.guidance = ImageF64(out.width, out.height);
  out.mask = Mask(out.width, out.height);
  const std::uint8_t* p = bytes.data() + offset;
  for (std::size_t i = 0; i < n; ++i) out.sparse_depth[i] = get_f32(p + 4 * i);
  for (std::size_t i = 0; i < n; ++i) out.guidance[i] = get_f32(p + 4 * (n + i));
  for (std::size_t i = 0; i < n; ++i) out.mask[i] = p[8 * n + i] ? 1 : 0;
  return out;
}

inline std::vector<std::uint8_t> encode_response(const ImageF64& dense) {
  std::vector<std::uint8_t> payload;
  payload.reserve(dense.size() * 4);
  for (std::size_t i = 0; i < dense.size(); ++i) put_f32(payload, static_cast<float>(dense[i]));
  const nlohmann::json header{{"schema_version", kSchemaVersion},
                              {"kind", "completion_response"},
                              {"width", dense.width()},
                              {"height", dense.height()},
                              {"dtype", "f32le"},
                              {"fields", {"dense_depth"}}};
  return frame(header, payload);
}

inline ImageF64 decode_response(const std::vector<std::uint8_t>& bytes, int expected_width, int expected_height) {
  auto [header, offset] = unframe(bytes);
  int w = 0, h = 0;
  check_dims(header, w, h);
  if (w != expected_width || h != expected_height)
    throw ProtocolError("response is " + std::to_string(w) + "x" + std::to_string(h) + ", expected " +
                        std::to_string(expected_width) + "x" + std::to_string(expected_height));
  const std::size_t n = std::size_t(w) * std::size_t(h);
  if (bytes.size() != offset + n * 4) throw ProtocolError("response payload size does not match dimensions");
  ImageF64 dense(w, h);
  for (std::size_t i = 0; i < n; ++i) dense[i] = get_f32(bytes.data() + offset + 4 * i);
  return dense;
}

}  // namespace protocol

/// Out-of-process completion model. Implementations must be safe to call
/// from several threads; callers never exceed max_in_flight() requests.
class CompletionEndpoint {
 public:
  virtual ~CompletionEndpoint() = default;
  virtual std::vector<std::uint8_t> exchange(const std::vector<std::uint8_t>& request) = 0;
  virtual int max_in_flight() const { return 1; }
  virtual std::string name() const = 0;
};

/// Runs `argv` once per request: the request is written to its stdin and the
/// response read from its stdout. A non-zero exit, a failed exec or a
/// timeout raise CompletionBackendError.
class ProcessCompletionEndpoint : public CompletionEndpoint {
 public:
  explicit ProcessCompletionEndpoint(std::vector<std::string> argv, std::chrono::milliseconds timeout = std::chrono::seconds(30),
                                     int max_in_flight = 1)
      : argv_(std::move(argv)), timeout_(timeout), limit_(std::max(max_in_flight, 1)), slots_(limit_) {
    if (argv_.empty()) throw ParameterError("completion endpoint command is empty");
  }

  int max_in_flight() const override { return limit_; }
  std::string name() const override { return "process:" + argv_.front(); }

  std::vector<std::uint8_t> exchange(const std::vector<std::uint8_t>& request) override {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    return run(request);
  }

 private:
  struct SigpipeBlock {
    sigset_t set{}, old{};
    SigpipeBlock() {
      sigemptyset(&set);
      sigaddset(&set, SIGPIPE);
      pthread_sigmask(SIG_BLOCK, &set, &old);
    }
    ~SigpipeBlock() {
      // Discard a SIGPIPE raised by this thread before unblocking.
      timespec zero{};
      while (sigtimedwait(&set, nullptr, &zero) > 0) {
      }
      pthread_sigmask(SIG_SETMASK, &old, nullptr);
    }
  };

  std::vector<std::uint8_t> run(const std::vector<std::uint8_t>& request) {
    const std::string program = resolve(argv_.front());
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    SigpipeBlock block;
    int in_pipe[2], out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) throw CompletionBackendError(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
      close(in_pipe[0]), close(in_pipe[1]);
      throw CompletionBackendError(std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) {
      close(in_pipe[0]), close(in_pipe[1]), close(out_pipe[0]), close(out_pipe[1]);
      throw CompletionBackendError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
      pthread_sigmask(SIG_SETMASK, &block.old, nullptr);
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      execv(program.c_str(), args.data());
      _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    const int to_child = in_pipe[1], from_child = out_pipe[0];
    fcntl(to_child, F_SETFL, fcntl(to_child, F_GETFL) | O_NONBLOCK);

    std::vector<std::uint8_t> response;
    std::size_t written = 0;
    bool writing = true, timed_out = false;
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    std::uint8_t buf[65536];
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        timed_out = true;
        break;
      }
      pollfd fds[2] = {{from_child, POLLIN, 0}, {to_child, POLLOUT, 0}};
      const int nfds = writing ? 2 : 1;
      const int rc = poll(fds, static_cast<nfds_t>(nfds), static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc < 0) break;
      if (writing && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
        const ssize_t n = write(to_child, request.data() + written, request.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if ((n < 0 && errno != EAGAIN) || written == request.size()) {
          close(to_child);
          writing = false;
        }
      }
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
        const ssize_t n = read(from_child, buf, sizeof buf);
        if (n > 0) response.insert(response.end(), buf, buf + n);
        else if (n == 0 || errno != EAGAIN) break;
      }
    }
    if (writing) close(to_child);
    close(from_child);
    if (timed_out) kill(pid, SIGKILL);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) throw CompletionBackendError("endpoint timed out after " + std::to_string(timeout_.count()) + " ms");
    if (WIFEXITED(status) && WEXITSTATUS(status) == 127) throw CompletionBackendError("endpoint unreachable: cannot execute " + program);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw CompletionBackendError("endpoint exited abnormally (status " + std::to_string(status) + ")");
    return response;
  }

  static std::string resolve(const std::string& program) {
    if (program.find('/') != std::string::npos) return program;
    const char* path = std::getenv("PATH");
    std::string dirs = path ? path : "/usr/bin:/bin";
    std::size_t start = 0;
    while (start <= dirs.size()) {
      const std::size_t end = std::min(dirs.find(':', start), dirs.size());
      const std::filesystem::path candidate = std::filesystem::path(dirs.substr(start, end - start)) / program;
      if (access(candidate.c_str(), X_OK) == 0) return candidate.string();
      start = end + 1;
    }
    return program;
  }

  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  int limit_;
  std::counting_semaphore<> slots_;
};

/// Sends the request to `endpoint` and merges the answer: reliable pixels are
/// kept from the request, unreliable ones taken from the response.
inline CompletionResult complete_depth_external(const CompletionRequest& req, CompletionEndpoint& endpoint) {
  req.validate();
  const auto response = endpoint.exchange(protocol::encode_request(req));
  const ImageF64 dense = protocol::decode_response(response, req.width(), req.height());
  CompletionResult result{pass_through(req.sparse_depth), {}};
  result.report.backend = "external";
  for (int y = 0; y < req.height(); ++y)
    for (int x = 0; x < req.width(); ++x) {
      if (!req.unreliable(x, y)) continue;
      const double z = dense(x, y);
      if (!std::isfinite(z))
        throw ProtocolError("non-finite depth at unreliable pixel (" + std::to_string(x) + ", " + std::to_string(y) + ")");
    }
  for (int y = 0; y < req.height(); ++y)
    for (int x = 0; x < req.width(); ++x)
      if (req.unreliable(x, y)) {
        result.frame.set_depth(x, y, dense(x, y));
        ++result.report.completed_pixels;
      }
  return result;
}

}  // namespace fpp
