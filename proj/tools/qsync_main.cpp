// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsync/errors.hpp"
#include "qsync/net.hpp"
#include "qsync/sim.hpp"

using namespace qsync;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::atomic<Daemon*> g_daemon{nullptr};

void handle_signal(int) {
  Daemon* d = g_daemon.load();
  if (d) d->stop();
}

std::filesystem::path state_dir_for(const std::string& node) {
  const char* home = std::getenv("QSYNC_HOME");
  std::filesystem::path base = home && *home ? home : "./qsync-state";
  return base / node;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Err::Io, "cannot read '" + path + "'");
  return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs a control command against the node's daemon when one is listening,
// otherwise directly against the state directory (offline mode).
ordered_json run_command(const TopologyConfig& topo, const std::string& node_id,
                         const std::string& cmd, const json& args) {
  const NodeEntry& entry = topo.node(node_id);
  if (entry.port != 0 && ControlClient::reachable(entry.host, entry.port)) {
    ControlClient client(entry.host, entry.port);
    return client.call(cmd, args);
  }
  LocalEnv env;
  Node node(topo, node_id, state_dir_for(node_id), &env);
  node.start();
  env.drain();
  ordered_json out = control_command(node, cmd, args);
  env.drain();  // run any dispatch the command scheduled
  return out;
}

void print_status_text(const ordered_json& s) {
  std::printf("node %s (%s)\n", s["node"].get<std::string>().c_str(),
              s["role"].get<std::string>().c_str());
  std::printf("queues:\n");
  for (const auto& q : s["queues"]) {
    std::printf("  %-12s %s depth=%zu locked=%zu\n", q["name"].get<std::string>().c_str(),
                q["transactional"].get<bool>() ? "txn " : "plain", q["depth"].get<size_t>(),
                q["locked"].get<size_t>());
  }
  std::printf("outgoing:\n");
  for (const auto& o : s["outgoing"]) {
    std::printf("  %-16s pending=%zu link=%s backoff=%sms\n",
                o["target"].get<std::string>().c_str(), o["pending"].get<size_t>(),
                o["link"].get<std::string>().c_str(),
                std::to_string(o["backoff_ms"].get<uint64_t>()).c_str());
  }
  std::printf("outbox pending: %zu\n", s["outbox_pending"].get<size_t>());
  std::printf("dead letters: %zu\n", s["dead_letters"].size());
  for (const auto& d : s["dead_letters"]) {
    std::printf("  %s %s (%zu bytes)\n", d["message"].get<std::string>().c_str(),
                d["reason"].get<std::string>().c_str(), d["bytes"].get<size_t>());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsync - multi-branch statement replication over transactional queues"};
  app.require_subcommand(1);

  std::string config_path;
  std::string node_id;
  bool json_out = false;
  uint64_t seed = 1;
  app.add_option("--config", config_path, "topology config file")->required();
  app.add_option("--node", node_id, "node id this command targets");
  app.add_flag("--json", json_out, "machine-readable output");
  app.add_option("--seed", seed, "PRNG seed (sim)");

  auto* cmd_run = app.add_subcommand("run", "run the node daemon in the foreground");
  auto* cmd_status = app.add_subcommand("status", "queues, outgoing links, outbox, dead letters");
  auto* cmd_force = app.add_subcommand("force-dispatch", "trigger a dispatch pass");
  auto* cmd_journal = app.add_subcommand("journal", "committed send/receive journal");
  auto* cmd_dump = app.add_subcommand("dump", "dump tables as tab-separated text");
  std::string dump_filter = "*";
  cmd_dump->add_option("--table", dump_filter, "table name glob");

  auto* cmd_exec = app.add_subcommand("exec", "execute a statement through the client path");
  std::string exec_sql;
  cmd_exec->add_option("sql", exec_sql, "SQL statement")->required();

  auto* cmd_mail = app.add_subcommand("mail", "store-and-forward mail");
  auto* mail_send = cmd_mail->add_subcommand("send", "send mail");
  std::string mail_to, mail_subject, mail_body;
  std::vector<std::string> mail_attach;
  bool mail_encrypt = false;
  mail_send->add_option("--to", mail_to, "recipient node")->required();
  mail_send->add_option("--subject", mail_subject, "subject (<= 256 bytes)");
  mail_send->add_option("--body", mail_body, "message text");
  mail_send->add_option("--attach", mail_attach, "attachment file (repeatable)");
  mail_send->add_flag("--encrypt", mail_encrypt, "encrypt the envelope");
  auto* mail_inbox = cmd_mail->add_subcommand("inbox", "list received mail");
  cmd_mail->require_subcommand(1);

  auto* cmd_sim = app.add_subcommand("sim", "run a simulated enterprise from a scenario file");
  std::string scenario_path;
  uint64_t max_time = 600000;
  cmd_sim->add_option("scenario", scenario_path, "scenario file")->required();
  cmd_sim->add_option("--max-time", max_time, "simulated ms budget (default 600000)");

  CLI11_PARSE(app, argc, argv);

  try {
    TopologyConfig topo = TopologyConfig::load_file(config_path);

    if (cmd_sim->parsed()) {
      std::filesystem::path state =
          std::filesystem::temp_directory_path() /
          ("qsync-sim-" + std::to_string(::getpid()) + "-" + std::to_string(seed));
      std::filesystem::remove_all(state);
      Simulator sim(topo, seed, state);
      sim.load_scenario(read_text_file(scenario_path));
      ordered_json out;
      std::string verdict = "CONVERGED";
      try {
        uint64_t end = sim.run_until_quiet(max_time);
        out["quiet_at_ms"] = end;
        if (!converged(sim.nodes(), "*")) verdict = "DIVERGED";
      } catch (const Error& e) {
        if (e.code() != Err::MaxTimeExceeded) throw;
        verdict = "MAX_TIME_EXCEEDED";
      }
      out["verdict"] = verdict;
      ordered_json digests;
      for (Node* n : sim.nodes()) {
        digests[n->id()] = n->store().state_digest("*");
      }
      out["digests"] = std::move(digests);
      if (json_out) {
        std::printf("%s\n", out.dump(2).c_str());
      } else {
        std::printf("%s\n", verdict.c_str());
        for (const auto& [id, digest] : out["digests"].items()) {
          std::printf("%s %s\n", id.c_str(), digest.get<std::string>().c_str());
        }
      }
      std::filesystem::remove_all(state);
      return verdict == "CONVERGED" ? 0 : 1;
    }

    if (node_id.empty()) {
      std::fprintf(stderr, "error: --node is required for this command\n");
      return 2;
    }

    if (cmd_run->parsed()) {
      Daemon daemon(topo, node_id, state_dir_for(node_id));
      daemon.start();
      g_daemon = &daemon;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::printf("qsync %s listening on port %u, recovered %zu in-doubt txn(s)\n",
                  node_id.c_str(), daemon.port(), daemon.recovered_txns());
      std::fflush(stdout);
      daemon.wait();
      g_daemon = nullptr;
      return 0;
    }

    std::string cmd;
    json args = json::object();
    if (cmd_status->parsed()) {
      cmd = "status";
    } else if (cmd_force->parsed()) {
      cmd = "force_dispatch";
    } else if (cmd_journal->parsed()) {
      cmd = "journal";
    } else if (cmd_dump->parsed()) {
      cmd = "dump";
      args["filter"] = dump_filter;
    } else if (cmd_exec->parsed()) {
      cmd = "exec";
      args["sql"] = exec_sql;
    } else if (mail_send->parsed()) {
      cmd = "mail_send";
      args["to"] = mail_to;
      args["subject"] = mail_subject;
      args["body"] = mail_body;
      args["encrypt"] = mail_encrypt;
      json atts = json::array();
      for (const auto& path : mail_attach) {
        json a;
        a["name"] = std::filesystem::path(path).filename().string();
        a["b64"] = b64_encode(read_text_file(path));
        atts.push_back(std::move(a));
      }
      args["attachments"] = std::move(atts);
    } else if (mail_inbox->parsed()) {
      cmd = "mail_inbox";
    } else {
      std::fprintf(stderr, "error: no command\n");
      return 2;
    }

    ordered_json out = run_command(topo, node_id, cmd, args);
    if (json_out) {
      std::printf("%s\n", out.dump(2).c_str());
    } else if (cmd == "status") {
      print_status_text(out);
    } else if (cmd == "dump") {
      std::fputs(out["text"].get<std::string>().c_str(), stdout);
      std::printf("digest %s\n", out["digest"].get<std::string>().c_str());
    } else if (cmd == "journal") {
      for (const auto& e : out["journal"]) {
        std::printf("%-8s %s/%llu %s t=%llu %s\n", e["direction"].get<std::string>().c_str(),
                    e["origin"].get<std::string>().c_str(),
                    static_cast<unsigned long long>(e["seq"].get<uint64_t>()),
                    e["queue"].get<std::string>().c_str(),
                    static_cast<unsigned long long>(e["timestamp"].get<uint64_t>()),
                    e["outcome"].get<std::string>().c_str());
      }
    } else if (cmd == "mail_inbox") {
      for (const auto& m : out["inbox"]) {
        std::string hops;
        for (const auto& h : m["hops"]) hops += (hops.empty() ? "" : ",") + h.get<std::string>();
        std::printf("from=%s subject=%s attachments=%zu hops=[%s]\n",
                    m["from"].get<std::string>().c_str(),
                    m["subject"].get<std::string>().c_str(), m["attachments"].size(),
                    hops.c_str());
      }
    } else {
      std::printf("%s\n", out.dump(2).c_str());
    }
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
