#pragma once

// HTTP + WebSocket front end over a LiveEngine.
//
//   GET    /healthz                       200 "ok"
//   POST   /sessions                      201 {"session_id"}
//   GET    /sessions/{id}                 200 {"session_id","state","history"}
//   DELETE /sessions/{id}                 200 {"session_id","transcript","chat_turns"}
//   POST   /sessions/{id}/utterances      202 {"accepted":true}    body {"text"}
//   POST   /sessions/{id}/speech          202 {"text"}            body audio/wav
//   GET    /sessions/{id}/audio/{turn}    200 audio/wav
//   GET    /sessions/{id}/stream          WebSocket: commands in, events out
//
// Errors are {"error":{"kind","message"}} with 400/404/409/422/502/504.
// The server runs every handler on one io_context thread.

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <deque>
#include <iostream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "e3va/gateway/config.hpp"
#include "e3va/gateway/wire.hpp"
#include "e3va/live_engine.hpp"
#include "e3va/wav.hpp"

namespace e3va {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

inline http::status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownSession: return http::status::not_found;
    case ErrorKind::SessionBusy: return http::status::conflict;
    case ErrorKind::NoSpeechDetected: return http::status::unprocessable_entity;
    case ErrorKind::ProviderTimeout: return http::status::gateway_timeout;
    case ErrorKind::ProviderError:
    case ErrorKind::EmptyReply: return http::status::bad_gateway;
    case ErrorKind::InvalidConfig: return http::status::not_implemented;
    default: return http::status::bad_request;
  }
}

namespace detail {

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

inline std::vector<std::string> split_path(std::string_view target) {
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < target.size()) {
    while (i < target.size() && target[i] == '/') ++i;
    const auto j = target.find('/', i);
    const auto end = j == std::string_view::npos ? target.size() : j;
    if (end > i) parts.emplace_back(target.substr(i, end - i));
    i = end;
  }
  return parts;
}

inline Response make_response(const Request& req, http::status status, std::string body,
                              std::string_view type = "application/json") {
  Response res{status, req.version()};
  res.set(http::field::server, "e3va");
  res.set(http::field::content_type, std::string(type));
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

inline Response json_response(const Request& req, http::status status, const nlohmann::json& j) {
  return make_response(req, status, wire::dump(j));
}

inline Response error_response(const Request& req, ErrorKind kind, const std::string& message) {
  return json_response(req, status_for(kind),
                       {{"error", {{"kind", std::string(to_string(kind))}, {"message", message}}}});
}

}  // namespace detail

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  static constexpr std::size_t kMaxQueued = 4096;

  WsSession(tcp::socket&& socket, LiveEngine& engine, std::string session_id)
      : ws_(std::move(socket)), engine_(engine), id_(std::move(session_id)) {}

  void run(detail::Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(64 * 1024);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->on_accept();
    });
  }

 private:
  void on_accept() {
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto exec = ws_.get_executor();
    try {
      sub_ = engine_.subscribe(id_, [weak, exec](const TurnEvent& ev) {
        auto text = std::make_shared<std::string>(wire::dump(wire::event_to_json(ev)));
        net::post(exec, [weak, text] {
          if (auto self = weak.lock()) self->send(text);
        });
      });
    } catch (const Error& e) {
      // Session vanished between the upgrade check and the accept.
      send(std::make_shared<std::string>(wire::dump(wire::command_error_json(e.kind(), e.what()))));
      closing_ = true;
      return;
    }
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->finish();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->dispatch(text);
      self->read();
    });
  }

  void dispatch(const std::string& text) {
    nlohmann::json reply;
    try {
      const auto cmd = wire::parse_command(text);
      if (auto* u = std::get_if<wire::UtteranceCommand>(&cmd)) {
        engine_.submit(id_, u->text);
        return;  // the outcome arrives as events
      }
      if (auto* c = std::get_if<wire::SetConfigCommand>(&cmd)) {
        const auto decay = engine_.set_config(id_, c->decay_hold_ms, c->decay_decay_ms);
        reply = {{"type", "config_updated"}, {"decay", wire::decay_to_json(decay)}};
      } else {
        reply = {{"type", "pong"}};
      }
    } catch (const Error& e) {
      reply = wire::command_error_json(e.kind(), e.what());
    }
    send(std::make_shared<std::string>(wire::dump(reply)));
  }

  void send(std::shared_ptr<std::string> text) {
    if (queue_.size() >= kMaxQueued) {
      // A client this far behind is not keeping up; drop it rather than buffer.
      beast::get_lowest_layer(ws_).close();
      return;
    }
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->queue_.pop_front();
                      if (ec) {
                        self->queue_.clear();
                        return;
                      }
                      if (!self->queue_.empty()) {
                        self->write_next();
                      } else if (self->closing_) {
                        self->ws_.async_close(websocket::close_code::policy_error,
                                              [self](beast::error_code) {});
                      }
                    });
  }

  void finish() {
    if (sub_) engine_.unsubscribe(id_, *sub_);
    sub_.reset();
  }

  websocket::stream<beast::tcp_stream> ws_;
  LiveEngine& engine_;
  std::string id_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<std::string>> queue_;
  std::optional<LiveEngine::SubscriptionId> sub_;
  bool closing_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  static constexpr std::size_t kBodyLimit = 16 * 1024 * 1024;

  HttpSession(tcp::socket&& socket, LiveEngine& engine)
      : stream_(std::move(socket)), engine_(engine) {}

  void run() { read(); }

 private:
  void read() {
    parser_.emplace();
    parser_->body_limit(kBodyLimit);
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, *parser_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) {
                         self->close();
                         return;
                       }
                       self->on_request(self->parser_->release());
                     });
  }

  void on_request(detail::Request req) {
    const auto parts = detail::split_path(std::string_view(req.target().data(), req.target().size()));
    if (websocket::is_upgrade(req)) {
      if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "stream" &&
          engine_.has_session(parts[1])) {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), engine_, parts[1])
            ->run(std::move(req));
        return;
      }
      write(detail::error_response(req, ErrorKind::UnknownSession, "no such stream"));
      return;
    }
    if (auto res = route(req, parts)) write(std::move(*res));
  }

  std::optional<detail::Response> route(const detail::Request& req,
                                        const std::vector<std::string>& p) {
    using detail::json_response;
    const auto method = req.method();
    try {
      if (method == http::verb::options) {
        auto res = detail::make_response(req, http::status::no_content, "", "text/plain");
        res.set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type");
        return res;
      }
      if (p.size() == 1 && p[0] == "healthz" && method == http::verb::get) {
        return detail::make_response(req, http::status::ok, "ok", "text/plain");
      }
      if (p.size() == 1 && p[0] == "sessions" && method == http::verb::post) {
        return json_response(req, http::status::created, {{"session_id", engine_.create_session()}});
      }
      if (p.size() == 2 && p[0] == "sessions") {
        if (method == http::verb::get) {
          nlohmann::json history = nlohmann::json::array();
          for (const auto& t : engine_.history(p[1])) {
            history.push_back({{"role", std::string(to_string(t.role))},
                               {"text", t.text},
                               {"at_ms", t.at}});
          }
          return json_response(req, http::status::ok,
                               {{"session_id", p[1]},
                                {"state", std::string(to_string(engine_.state(p[1])))},
                                {"history", history}});
        }
        if (method == http::verb::delete_) {
          const auto ended = engine_.end_session(p[1]);
          return json_response(req, http::status::ok,
                               {{"session_id", p[1]},
                                {"transcript", ended.transcript.string()},
                                {"chat_turns", ended.chat_turns}});
        }
      }
      if (p.size() == 3 && p[0] == "sessions" && p[2] == "utterances" &&
          method == http::verb::post) {
        const auto j = nlohmann::json::parse(req.body(), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
          throw wire::parse_error("body must be a JSON object");
        }
        for (const auto& [key, _] : j.items()) {
          if (key != "text") throw wire::parse_error("unknown field \"" + key + "\"");
        }
        engine_.submit(p[1], wire::require_as<std::string>(j, "text"));
        return json_response(req, http::status::accepted, {{"accepted", true}});
      }
      if (p.size() == 3 && p[0] == "sessions" && p[2] == "speech" &&
          method == http::verb::post) {
        return start_speech(req, p[1]);
      }
      if (p.size() == 4 && p[0] == "sessions" && p[2] == "audio" && method == http::verb::get) {
        std::uint64_t turn = 0;
        try {
          std::size_t used = 0;
          turn = std::stoull(p[3], &used);
          if (used != p[3].size()) throw std::invalid_argument("turn");
        } catch (const std::exception&) {
          throw Error(ErrorKind::InvalidArgument, "turn must be a number");
        }
        if (auto wav = engine_.audio(p[1], turn)) {
          return detail::make_response(req, http::status::ok, std::move(*wav), "audio/wav");
        }
        return detail::error_response(req, ErrorKind::UnknownSession,
                                      "no audio for turn " + p[3]);
      }
      const bool known = !p.empty() && (p[0] == "healthz" || p[0] == "sessions");
      return json_response(req, known ? http::status::method_not_allowed : http::status::not_found,
                           {{"error", {{"kind", "NotFound"}, {"message", "no route"}}}});
    } catch (const Error& e) {
      return detail::error_response(req, e.kind(), e.what());
    }
  }

  // Transcription runs on the engine's workers; the response is written
  // back on this connection's executor when it finishes.
  std::optional<detail::Response> start_speech(const detail::Request& req,
                                               const std::string& id) {
    AudioClip clip;
    try {
      clip = decode_wav(req.body());
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidArgument, e.what());  // the client's upload, not a provider
    }
    auto self = shared_from_this();
    auto exec = stream_.get_executor();
    auto shell = std::make_shared<detail::Request>();
    shell->version(req.version());
    shell->keep_alive(req.keep_alive());
    engine_.submit_audio(id, std::move(clip),
                         [self, exec, shell](std::optional<Error> err, std::string text) {
                           auto res = err ? detail::error_response(*shell, err->kind(), err->what())
                                          : detail::json_response(*shell, http::status::accepted,
                                                                  {{"text", text}});
                           net::post(exec, [self, res = std::move(res)]() mutable {
                             self->write(std::move(res));
                           });
                         });
    return std::nullopt;
  }

  void write(detail::Response res) {
    auto sp = std::make_shared<detail::Response>(std::move(res));
    const bool keep = sp->keep_alive();
    http::async_write(stream_, *sp,
                      [self = shared_from_this(), sp, keep](beast::error_code ec, std::size_t) {
                        if (ec || !keep) {
                          self->close();
                          return;
                        }
                        self->read();
                      });
  }

  void close() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  LiveEngine& engine_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

class Server {
 public:
  /// Binds immediately; a busy port raises std::runtime_error. Port 0 picks a free one.
  Server(net::io_context& io, LiveEngine& engine, const std::string& host, unsigned short port)
      : io_(io), acceptor_(net::make_strand(io)), engine_(engine) {
    beast::error_code ec;
    const auto address = net::ip::make_address(host, ec);
    if (ec) throw Error(ErrorKind::InvalidConfig, "bad bind host \"" + host + "\"");
    const tcp::endpoint ep{address, port};
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
      throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " +
                               ec.message());
    }
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() { accept(); }

  void stop() {
    beast::error_code ec;
    acceptor_.close(ec);
  }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(io_), [this](beast::error_code ec, tcp::socket s) {
      if (ec == net::error::operation_aborted) return;
      if (!ec) std::make_shared<HttpSession>(std::move(s), engine_)->run();
      accept();
    });
  }

  net::io_context& io_;
  tcp::acceptor acceptor_;
  LiveEngine& engine_;
};

/// Runs the service until SIGINT/SIGTERM. `ready` is called with the bound
/// port once the listener is up.
inline void run_service(const ServiceConfig& cfg,
                        const std::function<void(unsigned short)>& ready = {}) {
  validate_config(cfg);
  net::io_context io{1};
  LiveEngine engine(io, make_providers(cfg), make_engine_options(cfg));
  Server server(io, engine, cfg.bind_host, cfg.bind_port);
  server.start();
  net::signal_set signals(io, SIGINT, SIGTERM);
  signals.async_wait([&](const beast::error_code&, int) {
    server.stop();
    io.stop();
  });
  if (ready) ready(server.port());
  io.run();
}

}  // namespace e3va
