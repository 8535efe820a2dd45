// rlda-serve [--config FILE] [--base CKPT] [--checkpoint CKPT] [--host H] [--port P]
// Fields of the config file can be overridden by RLDA_* environment
// variables; command line flags win over both.
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "rlda/service/config.hpp"
#include "rlda/service/http.hpp"
#include "rlda/service/service.hpp"

using namespace rlda;

namespace {
service::HttpServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion inference service with online feedback training"};
  std::filesystem::path config, base, checkpoint;
  std::string host;
  int port = -1;
  app.add_option("--config", config, "Service config (JSON, comments allowed)")->check(CLI::ExistingFile);
  app.add_option("--base", base, "Base model checkpoint used when no service checkpoint exists");
  app.add_option("--checkpoint", checkpoint, "Service checkpoint (written on publish, read on restart)");
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Bind port");
  CLI11_PARSE(app, argc, argv);

  try {
    service::ServiceConfig cfg = config.empty() ? service::ServiceConfig{} : service::load_service_config(config);
    service::apply_env(cfg);
    if (!base.empty()) cfg.base_checkpoint = base;
    if (!checkpoint.empty()) cfg.checkpoint_path = checkpoint;
    if (!host.empty()) cfg.host = host;
    if (port >= 0) cfg.port = port;

    service::EmotionService svc(cfg);
    svc.start();
    if (!svc.model_loaded()) std::cerr << "warning: no model loaded; /infer answers 503\n";
    service::HttpServer http(svc);
    g_server = &http;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << cfg.host << ":" << cfg.port << " (model version "
              << (svc.model_loaded() ? svc.snapshot()->version : 0) << ")\n";
    http.run(cfg.host, cfg.port);
    g_server = nullptr;
    svc.stop();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
