#pragma once

#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "rlda/service/service.hpp"

// After the numeric headers: <resolv.h> defines a macro that collides with them.
#include <httplib.h>

namespace rlda::service {

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

inline int status_of(env::FeedbackError::Kind k) {
  switch (k) {
    case env::FeedbackError::Kind::UnknownId: return 404;
    case env::FeedbackError::Kind::AlreadyJudged: return 409;
    case env::FeedbackError::Kind::Expired: return 410;
    case env::FeedbackError::Kind::QueueFull: return 503;
  }
  return 500;
}

}  // namespace detail

// HTTP/1.1 front end: POST /infer, POST /feedback, GET /metrics, GET /healthz.
class HttpServer {
 public:
  explicit HttpServer(EmotionService& svc) : svc_(svc) {
    server_.set_payload_max_length(svc_.config().max_upload_bytes);
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server_.Post("/infer", [this](const httplib::Request& req, httplib::Response& res) {
      if (req.body.empty()) return detail::send_error(res, 400, "empty body; send a WAV file");
      try {
        const auto* p = reinterpret_cast<const std::uint8_t*>(req.body.data());
        detail::send_json(res, 200, to_json(svc_.infer(std::span<const std::uint8_t>(p, req.body.size()))));
      } catch (const NoModelError& e) {
        detail::send_error(res, 503, e.what());
      } catch (const FormatError& e) {
        detail::send_error(res, 400, std::string("undecodable audio: ") + e.what());
      } catch (const ValueError& e) {
        detail::send_error(res, 400, std::string("unusable audio: ") + e.what());
      }
    });

    server_.Post("/feedback", [this](const httplib::Request& req, httplib::Response& res) {
      std::string id;
      env::Judgment judgment{};
      try {
        const auto j = nlohmann::json::parse(req.body);
        id = j.at("inference_id").get<std::string>();
        judgment = env::parse_judgment(j.at("judgment").get<std::string>());
      } catch (const std::exception& e) {
        return detail::send_error(res, 400, std::string("expected {\"inference_id\": ..., \"judgment\": \"up\"|\"down\"}: ") + e.what());
      }
      try {
        const double reward = svc_.feedback(id, judgment);
        detail::send_json(res, 200, {{"accepted", true}, {"reward", reward}});
      } catch (const env::FeedbackError& e) {
        detail::send_error(res, detail::status_of(e.kind()), e.what());
      }
    });

    server_.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
      detail::send_json(res, 200, to_json(svc_.metrics()));
    });

    server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      const bool loaded = svc_.model_loaded();
      detail::send_json(res, 200, {{"status", "ok"}, {"model_loaded", loaded}});
    });

    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        detail::send_error(res, 500, e.what());
      } catch (...) {
        detail::send_error(res, 500, "internal error");
      }
    });
  }

  ~HttpServer() { stop(); }
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host, int port) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Serves on the calling thread until stop().
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  EmotionService& svc_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace rlda::service
