#include <stdexcept>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "handoff/service.hpp"

namespace handoff::svc {

struct HttpServer::Impl {
  explicit Impl(TrackingService& s) : service(s) {}
  TrackingService& service;
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(TrackingService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;

  srv.Post("/api/v1/tracks", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.create_track(req.body));
  });
  srv.Get(R"(/api/v1/tracks/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.get_track(req.matches[1]));
  });
  srv.Get(R"(/api/v1/tracks/([^/]+)/trajectory)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.get_trajectory(req.matches[1]));
  });
  srv.Get(R"(/api/v1/tracks/([^/]+)/map)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.get_map(req.matches[1]));
  });
  srv.Post(R"(/api/v1/tracks/([^/]+)/finish)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.finish_track(req.matches[1], req.body));
  });
  srv.Post(R"(/api/v1/cameras/([^/]+)/frames)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.ingest_frame(req.matches[1], req.body));
  });
  srv.Get(R"(/api/v1/cameras/([^/]+)/preview)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.get_preview(req.matches[1]));
  });
  srv.Get("/api/v1/cameras", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.list_cameras()); });
  srv.Get("/api/v1/stats", [&svc](const httplib::Request&, httplib::Response& res) { reply(res, svc.stats()); });

  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) reply(res, error_response(404, "not_found", "no route for " + req.method + " " + req.path));
    else reply(res, error_response(res.status, "http_error", httplib::status_message(res.status)));
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    spdlog::error("request failed: {}", what);
    reply(res, error_response(500, "internal", what));
  });
  srv.set_payload_max_length(64 * 1024 * 1024);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int p = srv.bind_to_any_port(host);
    if (p < 0) throw std::runtime_error("cannot bind " + host);
    return p;
  }
  if (!srv.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen_after_bind() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace handoff::svc
