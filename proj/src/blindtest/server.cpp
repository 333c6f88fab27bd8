#include "inkless/blindtest/server.hpp"

#include <httplib.h>

#include <spdlog/spdlog.h>

#include "inkless/core/error.hpp"

namespace inkless::blindtest {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

// Maps domain errors to HTTP statuses around a handler body.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFound& e) {
    send_error(res, 404, e.what());
  } catch (const Conflict& e) {
    send_error(res, 409, e.what());
  } catch (const IncompleteSession& e) {
    send_error(res, 409, e.what());
  } catch (const ConfigError& e) {
    send_error(res, 400, e.what());
  } catch (const InputError& e) {
    send_error(res, 400, e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("bad request body: ") + e.what());
  } catch (const Error& e) {
    spdlog::error("blind-test request failed: {}", e.what());
    send_error(res, 500, e.what());
  }
}

bool authorized(const httplib::Request& req, const std::string& token) {
  if (token.empty()) return true;
  if (req.get_header_value("Authorization") == "Bearer " + token) return true;
  return req.get_header_value("X-Blindtest-Token") == token;
}

}  // namespace

struct Server::Impl {
  SessionStore& store;
  ServerOptions options;
  httplib::Server http;
  int port = 0;

  Impl(SessionStore& s, ServerOptions o) : store(s), options(std::move(o)) {}

  void routes() {
    http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      const bool api = req.path.rfind("/sessions", 0) == 0 || req.path.rfind("/items", 0) == 0;
      if (api && !authorized(req, options.token)) {
        send_error(res, 401, "missing or wrong token");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });

    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = req.body.empty() ? json::object() : json::parse(req.body);
        const int n = body.value("n", 100);
        const int patch = body.value("patch_size", 500);
        std::optional<std::uint64_t> seed;
        if (body.contains("seed") && !body["seed"].is_null()) seed = body["seed"].get<std::uint64_t>();
        const auto session = store.create(n, patch, seed);
        spdlog::info("blind-test session {} created (n={}, patch={}, seed={})", session.session_id, n, patch,
                     session.seed);
        send_json(res, 201, {{"session_id", session.session_id}, {"n", n}, {"patch_size", patch}});
      });
    });

    http.Get(R"(/sessions/([^/]+)/items)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, store.items(req.matches[1])); });
    });

    http.Get(R"(/sessions/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto flag = req.get_param_value("partial");
        const bool partial = flag == "1" || flag == "true";
        send_json(res, 200, store.report(req.matches[1], partial));
      });
    });

    http.Get(R"(/items/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto png = store.image(req.matches[1]);
        res.status = 200;
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      });
    });

    http.Post(R"(/items/([^/]+)/answer)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = json::parse(req.body);
        const auto session = store.answer(req.matches[1], parse_answer(body.at("answer").get<std::string>()));
        send_json(res, 200, session.public_view());
      });
    });

    if (!options.static_dir.empty() && !http.set_mount_point("/", options.static_dir.string())) {
      throw IoError("cannot serve UI assets from " + options.static_dir.string());
    }
  }
};

Server::Server(SessionStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->routes();
}

Server::~Server() { stop(); }

int Server::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(o.host);
    if (impl_->port < 0) throw IoError("cannot bind " + o.host);
  } else {
    if (!impl_->http.bind_to_port(o.host, o.port)) {
      throw IoError("cannot bind " + o.host + ":" + std::to_string(o.port));
    }
    impl_->port = o.port;
  }
  return impl_->port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace inkless::blindtest
