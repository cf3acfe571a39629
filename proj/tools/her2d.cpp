// Session service: HTTP/JSON API over a directory-backed session store.

#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "her2/http.hpp"

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run(int argc, char** argv) {
  using namespace her2;
  CLI::App app{"HER2 scoring session service"};
  std::string config, listen, storage;
  int workers = 0;
  app.add_option("--config", config, "key = value config file");
  app.add_option("--listen", listen, "host:port (overrides config and HER2_LISTEN)");
  app.add_option("--storage", storage, "Session storage root (overrides config and HER2_STORAGE_ROOT)");
  app.add_option("--workers", workers, "Worker threads");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  AppConfig cfg = config.empty() ? AppConfig{} : load_config(config);
  apply_environment(cfg);
  if (!listen.empty()) cfg.listen = listen;
  if (!storage.empty()) cfg.storage_root = storage;
  if (workers > 0) cfg.workers = workers;
  const auto [host, port] = http::parse_listen(cfg.listen);

  ThreadPool pool(static_cast<std::size_t>(cfg.workers));
  SessionStore store(cfg, &pool);
  http::Api api(store);
  httplib::Server srv;
  srv.new_task_queue = [n = cfg.workers] { return new httplib::ThreadPool(static_cast<std::size_t>(std::max(n, 2))); };
  srv.set_payload_max_length(256u << 20);
  api.mount(srv);
  g_server = &srv;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << host << ":" << port << ", storage " << cfg.storage_root << "\n";
  if (!srv.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
