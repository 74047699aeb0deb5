#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "causaldebias/pipeline.hpp"
#include "causaldebias/serialize.hpp"

namespace cdb {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string content_type;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;

  Json json() const { return Json::parse(body); }
};

struct ServiceOptions {
  std::string snapshot_dir;  // empty: in-memory only
  std::string cors_origin = "*";
  double request_budget_ms = 30000.0;  // soft; overruns are flagged in a header
};

/// Session store behind the HTTP API. Thread-safe: sessions run in parallel,
/// and each session serializes its own requests.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpResponse handle(const HttpRequest& request);

  /// Restores every `*.json` session snapshot in the snapshot directory.
  std::size_t load_snapshots();

  const ServiceOptions& options() const { return options_; }

 private:
  struct Session;
  struct DebiasRun;

  HttpResponse route(const HttpRequest& request);
  HttpResponse post_dataset(const HttpRequest& request);
  HttpResponse get_dataset(const std::string& id);
  HttpResponse post_session(const HttpRequest& request);
  HttpResponse session_request(Session& s, const std::string& action, const HttpRequest& request);

  std::shared_ptr<const Table> find_dataset(const std::string& id);
  std::shared_ptr<Session> find_session(const std::string& id);
  std::shared_ptr<Session> restore(const Json& snapshot, std::optional<std::string> id);
  Json snapshot(const Session& s) const;
  void persist(const Session& s) const;

  ServiceOptions options_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Table>> datasets_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t next_dataset_ = 1;
  std::size_t next_session_ = 1;
};

/// cpp-httplib front for a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cdb
