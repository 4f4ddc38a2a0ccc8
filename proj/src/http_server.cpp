#include <thread>

#include "httplib.h"
#include "plasmaviz/error.hpp"
#include "plasmaviz/service.hpp"

namespace plasmaviz {

struct HttpServer::Impl {
  ExplorerService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(ExplorerService& s) : service(s) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      Request r;
      r.method = req.method;
      r.path = req.path;
      for (const auto& [k, v] : req.params) r.query[k] = v;
      r.body = req.body;
      const Response out = service.handle(r);
      res.status = out.status;
      for (const auto& [k, v] : out.headers) res.set_header(k, v);
      if (out.content_type != "application/json")
        res.set_header("X-Cache", out.cached ? "hit" : "miss");
      res.set_content(out.body, out.content_type);
    };

    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, PATCH, DELETE, OPTIONS"}});

    server.Get("/playback/events", [this](const httplib::Request& req, httplib::Response& res) {
      PlaybackState first;
      try {
        first = service.playback_state();
      } catch (const Error& e) {
        res.status = http_status_for(e.code());
        res.set_content(error_body(e.code(), e.what()), "application/json");
        return;
      }
      const bool once = req.has_param("once") && req.get_param_value("once") == "1";
      auto last = std::make_shared<std::optional<PlaybackState>>();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, once, last](std::size_t, httplib::DataSink& sink) {
        PlaybackState s;
        try {
          s = service.playback_state();
        } catch (const Error&) {
          sink.done();
          return true;
        }
        if (!*last || !(**last == s)) {
          *last = s;
          const std::string ev = "event: playback\ndata: " +
                                 nlohmann::json{{"frame", s.frame}, {"playing", s.playing}, {"fps", s.fps}}.dump() +
                                 "\n\n";
          if (!sink.write(ev.data(), ev.size())) return false;
        }
        if (once) {
          sink.done();
          return true;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return true;
      });
    });
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get(R"(.*)", forward);
    server.Post(R"(.*)", forward);
    server.Patch(R"(.*)", forward);
    server.Delete(R"(.*)", forward);
  }
};

HttpServer::HttpServer(ExplorerService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace plasmaviz
