// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/file.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <future>

#include "qsync/errors.hpp"
#include "qsync/frame.hpp"

namespace qsync {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool read_exact(int fd, void* buf, size_t n) {
  char* p = static_cast<char*>(buf);
  size_t got = 0;
  while (got < n) {
    ssize_t r = ::read(fd, p + got, n - got);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<size_t>(r);
  }
  return true;
}

bool write_exact(int fd, const void* buf, size_t n) {
  const char* p = static_cast<const char*>(buf);
  size_t sent = 0;
  while (sent < n) {
    ssize_t r = ::write(fd, p + sent, n - sent);
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<size_t>(r);
  }
  return true;
}

int connect_to(const std::string& host, uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return -1;
  struct timeval tv{1, 0};  // short timeouts: peers are expected local
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    return -1;
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    return -1;
  }
  return fd;
}

uint8_t frame_kind(const std::string& frame) {
  // magic(4) + version(1), then the kind byte.
  return frame.size() > 5 ? static_cast<uint8_t>(frame[5]) : 0;
}

Message make_control(uint8_t kind, const NodeId& to, const std::string& body) {
  Message m;
  m.id = MessageId{"cli", 0};
  m.kind = static_cast<MsgKind>(kind);
  m.body = body;
  m.dest_queue = QueueRef{to, "_ctl", false};
  return m;
}

}  // namespace

bool read_stream_frame(int fd, std::string& out) {
  unsigned char len_buf[4];
  if (!read_exact(fd, len_buf, 4)) return false;
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = len << 8 | len_buf[i];
  if (len == 0 || len > kMaxBodyBytes + 1024) return false;
  out.resize(len);
  return read_exact(fd, out.data(), len);
}

bool write_stream_frame(int fd, const std::string& frame) {
  unsigned char len_buf[4] = {static_cast<unsigned char>(frame.size() >> 24),
                              static_cast<unsigned char>(frame.size() >> 16),
                              static_cast<unsigned char>(frame.size() >> 8),
                              static_cast<unsigned char>(frame.size())};
  return write_exact(fd, len_buf, 4) && write_exact(fd, frame.data(), frame.size());
}

uint64_t LocalEnv::now_ms() const {
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::system_clock::now().time_since_epoch())
                                   .count());
}

void LocalEnv::drain() {
  while (!pending_.empty()) {
    auto fn = std::move(pending_.front());
    pending_.pop_front();
    fn();
  }
}

// --- control command handler (shared by daemon and offline CLI) ---

ordered_json control_command(Node& node, const std::string& cmd, const json& args) {
  ordered_json out;
  if (cmd == "ping") {
    out["node"] = node.id();
    return out;
  }
  if (cmd == "status") {
    out["node"] = node.id();
    out["role"] = node.role() == NodeRole::Central ? "CENTRAL" : "BRANCH";
    ordered_json queues = ordered_json::array();
    for (const auto& q : node.queues().queue_stats()) {
      ordered_json jq;
      jq["name"] = q.name;
      jq["transactional"] = q.transactional;
      jq["depth"] = q.depth;
      jq["locked"] = q.locked;
      queues.push_back(std::move(jq));
    }
    out["queues"] = std::move(queues);
    ordered_json outgoing = ordered_json::array();
    for (const auto& o : node.queues().outgoing_stats()) {
      ordered_json jo;
      jo["target"] = o.target.str();
      jo["pending"] = o.pending;
      jo["link"] = o.online ? "ONLINE" : "OFFLINE";
      jo["backoff_ms"] = o.backoff_ms;
      outgoing.push_back(std::move(jo));
    }
    out["outgoing"] = std::move(outgoing);
    out["outbox_pending"] = node.store().pending_count();
    ordered_json dead = ordered_json::array();
    for (const auto& d : node.store().dead_letters()) {
      ordered_json jd;
      jd["message"] = d.id.str();
      jd["reason"] = d.reason == DeadLetterReason::ParseFail    ? "PARSE_FAIL"
                     : d.reason == DeadLetterReason::ExecFail   ? "EXEC_FAIL"
                                                                : "PERMISSION_DENIED";
      jd["bytes"] = d.body.size();
      dead.push_back(std::move(jd));
    }
    out["dead_letters"] = std::move(dead);
    out["held_frames"] = node.queues().held_count();
    out["duplicates_detected"] = node.queues().duplicates_detected();
    return out;
  }
  if (cmd == "exec") {
    auto result = node.client_exec(args.at("sql").get<std::string>());
    out["rows_affected"] = result.rows_affected;
    out["record_id"] = result.record_id;
    return out;
  }
  if (cmd == "force_dispatch") {
    DispatchReport r = node.sync().dispatch();
    out["messages_sent"] = r.messages_sent;
    out["records_dispatched"] = r.records_dispatched;
    return out;
  }
  if (cmd == "journal") {
    ordered_json entries = ordered_json::array();
    for (const auto& e : node.queues().journal()) {
      ordered_json je;
      je["direction"] = e.direction == Direction::Sent ? "SENT" : "RECEIVED";
      je["origin"] = e.id.origin;
      je["seq"] = e.id.seq;
      je["queue"] = e.queue;
      je["timestamp"] = e.timestamp;
      je["outcome"] = e.outcome == JournalOutcome::Committed ? "COMMITTED" : "ABORTED";
      entries.push_back(std::move(je));
    }
    out["journal"] = std::move(entries);
    return out;
  }
  if (cmd == "outbox") {
    ordered_json records = ordered_json::array();
    for (const auto& r : node.store().pending_records()) {
      ordered_json jr;
      jr["record_id"] = r.record_id;
      jr["sql"] = r.sql;
      jr["origin"] = r.origin;
      jr["origin_record_id"] = r.origin_record_id;
      jr["created_at"] = r.created_at;
      records.push_back(std::move(jr));
    }
    out["pending"] = std::move(records);
    return out;
  }
  if (cmd == "dump") {
    std::string filter = args.contains("filter") ? args.at("filter").get<std::string>() : "*";
    out["text"] = node.store().dump_tsv(filter);
    out["digest"] = node.store().state_digest(filter);
    return out;
  }
  if (cmd == "mail_send") {
    MailEnvelope env;
    env.to = args.at("to").get<std::string>();
    env.subject = args.value("subject", std::string());
    env.body = args.value("body", std::string());
    env.encrypted = args.value("encrypt", false);
    if (args.contains("attachments")) {
      for (const auto& a : args.at("attachments")) {
        env.attachments.push_back(Attachment{a.at("name").get<std::string>(),
                                             b64_decode(a.at("b64").get<std::string>())});
      }
    }
    MessageId id = node.mail().send_mail(std::move(env));
    out["mail_origin"] = id.origin;
    out["mail_seq"] = id.seq;
    return out;
  }
  if (cmd == "mail_inbox") {
    ordered_json entries = ordered_json::array();
    for (const auto& m : node.mail().fetch_inbox()) {
      ordered_json jm;
      jm["from"] = m.envelope.from;
      jm["to"] = m.envelope.to;
      jm["subject"] = m.envelope.subject;
      jm["body"] = m.envelope.body;
      ordered_json atts = ordered_json::array();
      for (const auto& a : m.envelope.attachments) {
        ordered_json ja;
        ja["name"] = a.name;
        ja["b64"] = b64_encode(a.bytes);
        atts.push_back(std::move(ja));
      }
      jm["attachments"] = std::move(atts);
      jm["encrypted"] = m.envelope.encrypted;
      jm["hops"] = m.hops;
      jm["received_at"] = m.received_at;
      entries.push_back(std::move(jm));
    }
    out["inbox"] = std::move(entries);
    return out;
  }
  throw Error(Err::Refused, "unknown control command '" + cmd + "'");
}

// --- Daemon ---

Daemon::Daemon(TopologyConfig topo, NodeId id, std::filesystem::path state_dir)
    : topo_(std::move(topo)), id_(std::move(id)), state_dir_(std::move(state_dir)) {
  epoch_ = std::chrono::steady_clock::now();
}

Daemon::~Daemon() { stop(); }

size_t Daemon::recovered_txns() const { return node_ ? node_->recovered_txns() : 0; }

void Daemon::start() {
  std::filesystem::create_directories(state_dir_);
  std::string lock_path = (state_dir_ / "daemon.lock").string();
  lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
  if (lock_fd_ < 0 || ::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    if (lock_fd_ >= 0) ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error(Err::Refused, "a daemon already runs for node " + id_);
  }

  node_ = std::make_unique<Node>(topo_, id_, state_dir_, this);

  const NodeEntry& me = topo_.node(id_);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Err::Io, "socket: " + std::string(std::strerror(errno)));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(me.port);
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    throw Error(Err::Io, "bind port " + std::to_string(me.port) + ": " + std::strerror(errno));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  if (::listen(listen_fd_, 64) != 0) {
    throw Error(Err::Io, "listen: " + std::string(std::strerror(errno)));
  }

  running_ = true;
  engine_thread_ = std::thread([this] { engine_loop(); });
  accept_thread_ = std::thread([this] { accept_loop(); });
  run_on_engine([this] { node_->start(); });
}

void Daemon::stop() {
  bool was_running = running_.exchange(false);
  if (!was_running) {
    if (lock_fd_ >= 0) {
      ::close(lock_fd_);
      lock_fd_ = -1;
    }
    return;
  }
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  cv_.notify_all();
  if (engine_thread_.joinable()) engine_thread_.join();
  if (accept_thread_.joinable()) accept_thread_.join();
  for (auto& t : conn_threads_) {
    if (t.joinable()) t.join();
  }
  conn_threads_.clear();
  ::close(lock_fd_);
  lock_fd_ = -1;
}

void Daemon::wait() {
  std::unique_lock<std::mutex> lk(mu_);
  cv_.wait(lk, [this] { return !running_.load(); });
}

uint64_t Daemon::now_ms() const {
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - epoch_)
                                   .count());
}

void Daemon::send_frame(const NodeId&, const NodeId& to, std::string frame) {
  // Connect-per-frame keeps the transport stateless; the retransmission layer
  // already tolerates drops, so a failed connect is just a lost frame.
  const NodeEntry* peer = nullptr;
  try {
    peer = &topo_.node(to);
  } catch (const Error&) {
    return;
  }
  if (peer->port == 0) return;
  int fd = connect_to(peer->host, peer->port);
  if (fd < 0) return;
  write_stream_frame(fd, frame);
  ::close(fd);
}

uint64_t Daemon::set_timer(const NodeId&, uint64_t delay_ms, std::function<void()> fn) {
  std::lock_guard<std::mutex> lk(mu_);
  uint64_t id = ++next_timer_;
  timers_[id] = Timer{now_ms() + delay_ms, std::move(fn)};
  cv_.notify_all();
  return id;
}

void Daemon::cancel_timer(uint64_t timer_id) {
  std::lock_guard<std::mutex> lk(mu_);
  timers_.erase(timer_id);
}

void Daemon::post(const NodeId&, std::function<void()> fn) {
  std::lock_guard<std::mutex> lk(mu_);
  jobs_.push_back(std::move(fn));
  cv_.notify_all();
}

bool Daemon::link_online(const NodeId&, const NodeId&) const {
  return true;  // availability shows up as TCP failures, i.e. lost frames
}

void Daemon::engine_loop() {
  std::unique_lock<std::mutex> lk(mu_);
  while (running_) {
    // Run due timers.
    uint64_t now = now_ms();
    std::vector<std::function<void()>> due;
    for (auto it = timers_.begin(); it != timers_.end();) {
      if (it->second.deadline <= now) {
        due.push_back(std::move(it->second.fn));
        it = timers_.erase(it);
      } else {
        ++it;
      }
    }
    while (!jobs_.empty()) {
      due.push_back(std::move(jobs_.front()));
      jobs_.pop_front();
    }
    if (!due.empty()) {
      lk.unlock();
      for (auto& fn : due) {
        try {
          fn();
        } catch (const Error& e) {
          fprintf(stderr, "[%s] engine error: %s\n", id_.c_str(), e.what());
        }
      }
      lk.lock();
      continue;
    }
    uint64_t next_deadline = UINT64_MAX;
    for (const auto& [id, t] : timers_) next_deadline = std::min(next_deadline, t.deadline);
    if (next_deadline == UINT64_MAX) {
      cv_.wait_for(lk, std::chrono::milliseconds(200));
    } else {
      uint64_t wait = next_deadline > now ? next_deadline - now : 0;
      cv_.wait_for(lk, std::chrono::milliseconds(std::min<uint64_t>(wait, 200)));
    }
  }
}

void Daemon::accept_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (running_ && (errno == EINTR || errno == ECONNABORTED)) continue;
      break;
    }
    std::lock_guard<std::mutex> lk(mu_);
    conn_threads_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void Daemon::serve_connection(int fd) {
  std::string frame;
  while (running_ && read_stream_frame(fd, frame)) {
    uint8_t kind = frame_kind(frame);
    if (kind < 0x80) {
      std::string bytes = frame;
      post(id_, [this, bytes] { node_->on_frame(bytes); });
      continue;
    }
    Message req;
    try {
      req = decode_frame(frame);
    } catch (const Error&) {
      break;
    }
    ordered_json resp;
    try {
      json body = json::parse(req.body);
      ordered_json data = control(body.at("cmd").get<std::string>(), body.value("args", json::object()));
      resp["ok"] = true;
      resp["data"] = std::move(data);
    } catch (const Error& e) {
      resp["ok"] = false;
      resp["error"] = e.what();
    } catch (const json::exception& e) {
      resp["ok"] = false;
      resp["error"] = std::string("bad request: ") + e.what();
    }
    Message reply = make_control(kCtlResponse, req.id.origin, resp.dump());
    if (!write_stream_frame(fd, encode_frame(reply))) break;
  }
  ::close(fd);
}

void Daemon::run_on_engine(std::function<void()> fn) {
  std::promise<void> done;
  post(id_, [&] {
    fn();
    done.set_value();
  });
  done.get_future().wait();
}

nlohmann::ordered_json Daemon::control(const std::string& cmd, const json& args) {
  ordered_json result;
  std::exception_ptr err;
  std::promise<void> done;
  post(id_, [&] {
    try {
      result = control_command(*node_, cmd, args);
    } catch (...) {
      err = std::current_exception();
    }
    done.set_value();
  });
  done.get_future().wait();
  if (err) std::rethrow_exception(err);
  return result;
}

// --- ControlClient ---

ControlClient::ControlClient(const std::string& host, uint16_t port) {
  fd_ = connect_to(host, port);
  if (fd_ < 0) {
    throw Error(Err::Io, "cannot reach daemon at " + host + ":" + std::to_string(port));
  }
}

ControlClient::~ControlClient() {
  if (fd_ >= 0) ::close(fd_);
}

bool ControlClient::reachable(const std::string& host, uint16_t port) {
  int fd = connect_to(host, port);
  if (fd < 0) return false;
  ::close(fd);
  return true;
}

ordered_json ControlClient::call(const std::string& cmd, const json& args) {
  json body;
  body["cmd"] = cmd;
  body["args"] = args;
  Message req = make_control(kCtlRequest, "daemon", body.dump());
  if (!write_stream_frame(fd_, encode_frame(req))) {
    throw Error(Err::Io, "control write failed");
  }
  std::string frame;
  if (!read_stream_frame(fd_, frame)) throw Error(Err::Io, "control read failed");
  Message resp = decode_frame(frame);
  ordered_json j = ordered_json::parse(resp.body, nullptr, false);
  if (j.is_discarded() || !j.contains("ok")) throw Error(Err::Io, "bad control response");
  if (!j["ok"].get<bool>()) {
    throw Error(Err::Refused, j.value("error", std::string("command failed")));
  }
  return j["data"];
}

}  // namespace qsync
