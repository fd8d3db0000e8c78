// Copyright 2026 The MeSHwA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "bench_env.hpp"
#include "meshwa/bench.hpp"
#include "meshwa/error.hpp"

namespace meshwa::bench {
namespace {

enum FrameKind : std::uint32_t { kRequest = 1, kResponse = 2, kShutdown = 3 };

struct FrameHeader {
  std::uint32_t len = 0;  // payload bytes following the header
  std::uint32_t kind = 0;
  std::uint64_t compute_ns = 0;
  std::uint64_t hops = 0;
};

// Child exit codes.
constexpr int kExitUpstreamLost = 4;
constexpr int kExitDownstreamLost = 5;
constexpr int kExitBadFrame = 6;

std::uint64_t clock_ns() {
  timespec ts{};
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<std::uint64_t>(ts.tv_sec) * 1000000000ull +
         static_cast<std::uint64_t>(ts.tv_nsec);
}

bool write_full(int fd, const void* data, std::size_t len) {
  const auto* p = static_cast<const char*>(data);
  while (len > 0) {
    const ssize_t n = send(fd, p, len, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    p += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool read_full(int fd, void* data, std::size_t len) {
  auto* p = static_cast<char*>(data);
  while (len > 0) {
    const ssize_t n = read(fd, p, len);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    p += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

bool send_frame(int fd, const FrameHeader& h, const void* payload) {
  return write_full(fd, &h, sizeof(h)) &&
         (h.len == 0 || write_full(fd, payload, h.len));
}

bool recv_frame(int fd, FrameHeader& h, std::byte* buf, std::size_t cap) {
  if (!read_full(fd, &h, sizeof(h))) return false;
  if (h.len > cap) return false;
  return h.len == 0 || read_full(fd, buf, h.len);
}

// Waits until fd is readable. False on timeout or error.
bool wait_readable(int fd, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  for (;;) {
    const int r = poll(&p, 1, timeout_ms);
    if (r < 0 && errno == EINTR) continue;
    return r > 0;
  }
}

volatile std::uint64_t payload_sink = 0;

[[noreturn]] void run_service(int up, const std::vector<int>& down,
                              std::uint64_t spin_ns, std::byte* buf,
                              std::size_t cap) {
  std::uint64_t requests = 0;
  for (;;) {
    FrameHeader h;
    if (!recv_frame(up, h, buf, cap)) _exit(kExitUpstreamLost);
    if (h.kind == kRequest) {
      ++requests;
      std::uint64_t sum = 0;
      for (std::uint32_t i = 0; i < h.len; ++i) {
        sum += std::to_integer<std::uint64_t>(buf[i]);
      }
      FrameHeader resp{0, kResponse, 0, 1};
      if (spin_ns != 0) {
        const std::uint64_t start = clock_ns();
        std::uint64_t elapsed = 0;
        do {
          elapsed = clock_ns() - start;
        } while (elapsed < spin_ns);
        resp.compute_ns = elapsed;
      }
      const std::uint32_t len = h.len;
      for (int fd : down) {
        FrameHeader req{len, kRequest, 0, 0};
        if (!send_frame(fd, req, buf)) _exit(kExitDownstreamLost);
        FrameHeader sub;
        if (!recv_frame(fd, sub, buf, cap) || sub.kind != kResponse) {
          _exit(kExitDownstreamLost);
        }
        resp.compute_ns += sub.compute_ns;
        resp.hops += sub.hops;
      }
      payload_sink = sum;
      if (!send_frame(up, resp, nullptr)) _exit(kExitUpstreamLost);
    } else if (h.kind == kShutdown) {
      // Reply with per-service request counts of this subtree, preorder.
      std::size_t used = sizeof(std::uint64_t);
      std::memcpy(buf, &requests, sizeof(requests));
      for (int fd : down) {
        FrameHeader sd{0, kShutdown, 0, 0};
        FrameHeader ack;
        if (!send_frame(fd, sd, nullptr) ||
            !recv_frame(fd, ack, buf + used, cap - used)) {
          _exit(kExitDownstreamLost);
        }
        used += ack.len;
      }
      FrameHeader ack{static_cast<std::uint32_t>(used), kResponse, 0, 0};
      send_frame(up, ack, buf);
      _exit(0);
    } else {
      _exit(kExitBadFrame);
    }
  }
}

[[noreturn]] void run_forwarder(int up, int down, std::byte* buf,
                                std::size_t cap) {
  for (;;) {
    FrameHeader h;
    if (!recv_frame(up, h, buf, cap)) _exit(kExitUpstreamLost);
    const bool shutdown = h.kind == kShutdown;
    if (!send_frame(down, h, buf)) _exit(kExitDownstreamLost);
    FrameHeader resp;
    if (!recv_frame(down, resp, buf, cap)) _exit(kExitDownstreamLost);
    if (!send_frame(up, resp, buf)) _exit(kExitUpstreamLost);
    if (shutdown) _exit(0);
  }
}

struct Process {
  std::string name;
  pid_t pid = -1;
  bool reaped = false;
  int status = 0;
};

// Owns the socket fds and child processes of one baseline run.
class ProcessGroup {
 public:
  ~ProcessGroup() {
    close_fds();
    kill_all();
  }

  std::vector<int> fds;
  std::vector<Process> procs;

  void close_fds() {
    for (int fd : fds) close(fd);
    fds.clear();
  }

  void kill_all() {
    for (auto& p : procs) {
      if (!p.reaped && p.pid > 0) kill(p.pid, SIGKILL);
    }
    for (auto& p : procs) {
      if (!p.reaped && p.pid > 0) {
        while (waitpid(p.pid, &p.status, 0) < 0 && errno == EINTR) {
        }
        p.reaped = true;
      }
    }
  }

  void poll_exits() {
    for (auto& p : procs) {
      if (!p.reaped && p.pid > 0 && waitpid(p.pid, &p.status, WNOHANG) == p.pid) {
        p.reaped = true;
      }
    }
  }

  // Names the child at fault after a broken exchange and throws.
  [[noreturn]] void fail(const std::string& what) {
    const Process* culprit = nullptr;
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(1000);
    while (culprit == nullptr) {
      poll_exits();
      for (const auto& p : procs) {
        if (p.reaped && WIFSIGNALED(p.status)) {
          culprit = &p;
          break;
        }
      }
      if (culprit != nullptr || std::chrono::steady_clock::now() > deadline) {
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    if (culprit == nullptr) {
      for (const auto& p : procs) {
        if (p.reaped && WIFEXITED(p.status) && WEXITSTATUS(p.status) != 0) {
          culprit = &p;
          break;
        }
      }
    }
    if (culprit != nullptr) {
      const std::string child = culprit->name;
      std::string how = WIFSIGNALED(culprit->status)
                            ? "killed by signal " +
                                  std::to_string(WTERMSIG(culprit->status))
                            : "exited with status " +
                                  std::to_string(WEXITSTATUS(culprit->status));
      kill_all();
      throw ChildCrashedError(child, "child " + child + " " + how + " (" +
                                         what + ")");
    }
    kill_all();
    throw Error(Errc::SocketError, what);
  }
};

std::pair<int, int> make_pair(ProcessGroup& group) {
  int sv[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw Error(Errc::SocketError,
                std::string("socketpair failed: ") + std::strerror(errno));
  }
  group.fds.push_back(sv[0]);
  group.fds.push_back(sv[1]);
  return {sv[0], sv[1]};
}

}  // namespace

BenchReport run_process_baseline(const Manifest& manifest,
                                 const WorkloadSpec& spec,
                                 const BaselineConfig& config) {
  validate_workload(spec);
  if (const auto v = validate_manifest(manifest); !v.empty()) {
    throw Error(Errc::Validation, "manifest has " + std::to_string(v.size()) +
                                      " violation(s)");
  }
  if (spec.payload_bytes > UINT32_MAX) {
    throw Error(Errc::InvalidWorkload, "payload exceeds the 4 GiB frame limit");
  }
  const std::uint64_t seed = bench_seed();
  const std::uint32_t services = service_count(spec.topology);
  const bool is_chain = std::holds_alternative<Chain>(spec.topology);

  std::vector<std::vector<std::uint32_t>> downstream(services);
  for (std::uint32_t i = 1; i < services; ++i) {
    downstream[is_chain ? i - 1 : 0].push_back(i);
  }

  ProcessGroup group;
  std::vector<int> entry_up(services), entry_dn(services);
  std::vector<int> inner_up(services, -1), inner_dn(services, -1);
  for (std::uint32_t i = 0; i < services; ++i) {
    std::tie(entry_up[i], entry_dn[i]) = make_pair(group);
    if (config.sidecar) std::tie(inner_up[i], inner_dn[i]) = make_pair(group);
  }

  // Buffers exist before fork so children never allocate.
  const std::size_t cap = std::max<std::size_t>(
      static_cast<std::size_t>(spec.payload_bytes),
      sizeof(std::uint64_t) * services);
  std::vector<std::byte> child_buf(cap);
  const std::vector<std::byte> payload = make_payload(spec.payload_bytes, seed);
  std::vector<std::byte> parent_buf(cap);

  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < services; ++i) {
    names.push_back("bench.hop" + std::to_string(i));
  }
  if (config.sidecar) {
    for (std::uint32_t i = 0; i < services; ++i) {
      names.push_back("bench.sidecar" + std::to_string(i));
    }
  }
  group.procs.reserve(names.size());

  auto keep_only = [&](std::initializer_list<int> keep,
                       const std::vector<int>& more) {
    for (int fd : group.fds) {
      bool kept = std::find(keep.begin(), keep.end(), fd) != keep.end() ||
                  std::find(more.begin(), more.end(), fd) != more.end();
      if (!kept) close(fd);
    }
  };

  for (std::size_t p = 0; p < names.size(); ++p) {
    const pid_t pid = fork();
    if (pid < 0) {
      const std::string err = std::strerror(errno);
      throw Error(Errc::SpawnFailure, "fork failed: " + err);
    }
    if (pid == 0) {
      signal(SIGPIPE, SIG_IGN);
      if (p < services) {
        const auto i = static_cast<std::uint32_t>(p);
        const int up = config.sidecar ? inner_dn[i] : entry_dn[i];
        std::vector<int> down;
        for (auto d : downstream[i]) down.push_back(entry_up[d]);
        keep_only({up}, down);
        run_service(up, down, spec.compute_spin_ns, child_buf.data(), cap);
      }
      const auto i = static_cast<std::uint32_t>(p - services);
      keep_only({entry_dn[i], inner_up[i]}, {});
      run_forwarder(entry_dn[i], inner_up[i], child_buf.data(), cap);
    }
    group.procs.push_back(Process{names[p], pid});
  }
  // The parent keeps only the client end of the entry socket.
  const int client = entry_up[0];
  for (int& fd : group.fds) {
    if (fd != client) close(fd);
  }
  group.fds = {client};

  auto exchange = [&](const FrameHeader& req, const void* data,
                      FrameHeader& resp) {
    if (!send_frame(client, req, data)) group.fail("request send failed");
    if (!wait_readable(client, config.timeout_ms)) {
      group.fail("timed out waiting for a response");
    }
    if (!recv_frame(client, resp, parent_buf.data(), cap)) {
      group.fail("connection to the service graph lost");
    }
  };

  const auto len = static_cast<std::uint32_t>(spec.payload_bytes);
  const FrameHeader request{len, kRequest, 0, 0};
  std::uint64_t completed = 0;
  auto maybe_inject = [&] {
    if (config.kill_process && completed == config.kill_after &&
        *config.kill_process < group.procs.size()) {
      kill(group.procs[*config.kill_process].pid, SIGKILL);
    }
  };

  for (std::uint64_t i = 0; i < spec.warmup_iterations; ++i) {
    FrameHeader resp;
    exchange(request, payload.data(), resp);
  }
  std::vector<std::uint64_t> latencies;
  latencies.reserve(static_cast<std::size_t>(spec.iterations));
  std::uint64_t compute_ns = 0;
  for (std::uint64_t i = 0; i < spec.iterations; ++i) {
    maybe_inject();
    FrameHeader resp;
    const std::uint64_t start = clock_ns();
    exchange(request, payload.data(), resp);
    latencies.push_back(clock_ns() - start);
    if (resp.kind != kResponse || resp.hops != services) {
      group.fail("malformed response");
    }
    compute_ns += resp.compute_ns;
    ++completed;
  }
  FrameHeader ack;
  exchange(FrameHeader{0, kShutdown, 0, 0}, nullptr, ack);
  if (ack.len != sizeof(std::uint64_t) * services) {
    group.fail("malformed shutdown acknowledgement");
  }
  std::vector<std::uint64_t> counts(services);
  std::memcpy(counts.data(), parent_buf.data(), ack.len);
  for (auto& c : counts) c -= std::min(c, spec.warmup_iterations);

  group.close_fds();
  for (auto& p : group.procs) {
    while (waitpid(p.pid, &p.status, 0) < 0 && errno == EINTR) {
    }
    p.reaped = true;
    if (!WIFEXITED(p.status) || WEXITSTATUS(p.status) != 0) {
      throw ChildCrashedError(p.name, "child " + p.name + " failed at shutdown");
    }
  }

  BenchReport report;
  report.config = config.sidecar ? "process+sidecar" : "process";
  report.topology = topology_name(spec.topology);
  report.payload_bytes = spec.payload_bytes;
  report.iterations = spec.iterations;
  report.warmup_iterations = spec.warmup_iterations;
  report.compute_spin_ns = spec.compute_spin_ns;
  report.hop_requests = std::move(counts);
  report.processes = std::move(names);
  report.seed = seed;
  report.host = host_name();
  report.timestamp = utc_timestamp();
  summarize(report, std::move(latencies), compute_ns);
  return report;
}

}  // namespace meshwa::bench
