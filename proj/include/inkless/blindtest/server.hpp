#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "inkless/blindtest/session.hpp"

namespace inkless::blindtest {

inline constexpr const char* kTokenEnvVar = "INKLESS_BLINDTEST_TOKEN";

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;          // 0 picks a free port
  std::string token;        // empty disables authentication
  std::filesystem::path static_dir;  // optional UI assets served at /
};

// HTTP+JSON front end over a SessionStore:
//   POST /sessions {n, patch_size, seed?}     -> {session_id, n, patch_size}
//   GET  /sessions/{id}/items                 -> public session view
//   GET  /items/{id}/image                    -> image/png
//   POST /items/{id}/answer {answer}          -> public session view
//   GET  /sessions/{id}/report[?partial=1]    -> confusion and rates
class Server {
 public:
  Server(SessionStore& store, ServerOptions options);
  ~Server();

  // Binds and returns the bound port.
  int bind();
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace inkless::blindtest
