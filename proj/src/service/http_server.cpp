#include <httplib.h>

#include "vdgpt/service.hpp"

namespace vdgpt::service {

struct HttpServer::Impl {
  PlanService& service;
  std::string host;
  int port;
  httplib::Server server;
  std::thread thread;

  Impl(PlanService& s, std::string h, int p) : service(s), host(std::move(h)), port(p) { routes(); }

  static void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    res.set_content(r.body, r.content_type);
  }

  static std::optional<int> parse_version(const std::string& raw) {
    std::string v = raw;
    if (v.starts_with("W/")) v = v.substr(2);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    try {
      std::size_t used = 0;
      const int n = std::stoi(v, &used);
      if (used != v.size() || n < 0) return std::nullopt;
      return n;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Expose-Headers", "ETag, X-Plan-Version, Location"}});
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, If-Match");
      res.status = 204;
    });
    server.Get("/plans", [this](const httplib::Request&, httplib::Response& res) { send(res, service.list_plans()); });
    server.Get(R"(/plans/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.get_plan(req.matches[1]));
    });
    server.Put(R"(/plans/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<int> version;
      std::string raw = req.get_header_value("If-Match");
      if (raw.empty() && req.has_param("version")) raw = req.get_param_value("version");
      if (!raw.empty()) {
        version = parse_version(raw);
        if (!version) {
          send(res, {400, R"({"error": "BAD_VERSION", "message": "If-Match must be a version number"})" "\n"});
          return;
        }
      }
      send(res, service.put_plan(req.matches[1], req.body, version));
    });
    server.Post(R"(/plans/([^/]+)/validate)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.validate(req.matches[1]));
    });
    server.Post(R"(/plans/([^/]+)/interpolate)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.interpolate(req.matches[1], req.body));
    });
    server.Post(R"(/plans/([^/]+)/metrics/preview)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.metrics_preview(req.matches[1]));
    });
    server.Post("/compile", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.start_compile(req.body));
    });
    server.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.job(req.matches[1]));
    });
    server.Post(R"(/jobs/([^/]+)/cancel)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.cancel_job(req.matches[1]));
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string message = "internal error";
      try {
        if (ep) std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        message = e.what();
      }
      nlohmann::json doc{{"error", "INTERNAL"}, {"message", message}};
      res.status = 500;
      res.set_content(doc.dump(2) + "\n", "application/json");
    });
  }

  int bind() {
    if (port == 0) {
      port = server.bind_to_any_port(host);
    } else if (!server.bind_to_port(host, port)) {
      port = -1;
    }
    if (port < 0) throw Error(ErrorCode::kIoError, "cannot bind " + host);
    return port;
  }
};

HttpServer::HttpServer(PlanService& service, std::string host, int port)
    : impl_(std::make_unique<Impl>(service, std::move(host), port)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start() {
  const int port = impl_->bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::run() {
  impl_->bind();
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace vdgpt::service
