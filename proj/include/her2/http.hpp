#pragma once

#include <string>

#include "httplib.h"
#include "her2/session.hpp"

namespace her2::http {

namespace detail {

inline void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  send_json(res, {{"error", kind}, {"message", message}}, status);
}

inline Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) throw ValidationError("request body must be JSON");
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

inline std::size_t parse_index(const std::string& s) {
  if (s.empty() || s.size() > 12) throw ValidationError("bad cell index '" + s + "'");
  return std::stoul(s);
}

}  // namespace detail

/// Routes of the session service, mounted on a cpp-httplib server.
///
///   POST   /sessions                                   {"rule_table"?}
///   GET    /sessions
///   POST   /sessions/{id}/fovs                         multipart: image, objective, heatmap?
///   PATCH  /sessions/{id}/params                       flat parameter patch
///   PUT    /sessions/{id}/fovs/{fid}/exclusions        {"polygons": [[[x,y],...],...]}
///   PUT    /sessions/{id}/fovs/{fid}/included          {"included": bool}
///   PUT    /sessions/{id}/fovs/{fid}/cells/{n}/class   {"class": name | null}
///   GET    /sessions/{id}/report
///   GET    /sessions/{id}/fovs/{fid}/overlay           ?format=png|json
///   GET    /health
class Api {
 public:
  explicit Api(SessionStore& store) : store_(store) {}

  void mount(httplib::Server& srv) {
    const std::string& token = store_.config().token;
    srv.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
      if (token.empty() || req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("Authorization") == "Bearer " + token) {
        return httplib::Server::HandlerResponse::Unhandled;
      }
      detail::send_error(res, 401, "unauthorized", "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    });

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const NotFound& e) {
        detail::send_error(res, 404, "not_found", e.what());
      } catch (const DecodeError& e) {
        detail::send_error(res, 400, "decode_error", e.what());
      } catch (const ConfigError& e) {
        detail::send_error(res, 400, "invalid_parameters", e.what());
      } catch (const ValidationError& e) {
        detail::send_error(res, 400, "validation_error", e.what());
      } catch (const CoordinateError& e) {
        detail::send_error(res, 400, "validation_error", e.what());
      } catch (const Json::exception& e) {
        detail::send_error(res, 400, "validation_error", e.what());
      } catch (const std::invalid_argument& e) {
        detail::send_error(res, 400, "validation_error", e.what());
      } catch (const std::exception& e) {
        detail::send_error(res, 500, "internal", e.what());
      }
    });

    srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      detail::send_json(res, {{"status", "ok"}});
    });

    srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      std::string table;
      if (!req.body.empty()) {
        const Json body = detail::parse_body(req);
        if (body.contains("rule_table")) table = body.at("rule_table").get<std::string>();
      }
      const auto s = store_.create(table);
      detail::send_json(res, {{"id", s->id()}, {"rule_table", s->params().rule_table}}, 201);
    });

    srv.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      detail::send_json(res, {{"sessions", store_.ids()}});
    });

    srv.Post(R"(/sessions/([0-9a-f]+)/fovs)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto s = store_.get(req.matches[1]);
      if (!req.has_file("image")) throw ValidationError("multipart field 'image' is required");
      if (!req.has_file("objective")) throw ValidationError("multipart field 'objective' is required");
      const Objective obj = objective_from_string(her2::detail::trim(req.get_file_value("objective").content));
      const std::string& image = req.get_file_value("image").content;
      std::string heatmap;
      if (req.has_file("heatmap")) heatmap = req.get_file_value("heatmap").content;
      const Json fov = s->add_fov(bytes(image), obj, bytes(heatmap));
      detail::send_json(res, {{"fov", fov}, {"report", s->report().at("report")}}, 201);
    });

    srv.Patch(R"(/sessions/([0-9a-f]+)/params)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto s = store_.get(req.matches[1]);
      detail::send_json(res, s->update_params(detail::parse_body(req)));
    });

    srv.Put(R"(/sessions/([0-9a-f]+)/fovs/([\w-]+)/exclusions)",
            [this](const httplib::Request& req, httplib::Response& res) {
              const auto s = store_.get(req.matches[1]);
              const Json body = detail::parse_body(req);
              const Json fov = s->set_exclusions(req.matches[2], json::polygons_from(body.at("polygons")));
              detail::send_json(res, {{"fov", fov}, {"report", s->report().at("report")}});
            });

    srv.Put(R"(/sessions/([0-9a-f]+)/fovs/([\w-]+)/included)",
            [this](const httplib::Request& req, httplib::Response& res) {
              const auto s = store_.get(req.matches[1]);
              const Json body = detail::parse_body(req);
              if (!body.contains("included") || !body.at("included").is_boolean()) {
                throw ValidationError("body must be {\"included\": true|false}");
              }
              detail::send_json(res, s->set_included(req.matches[2], body.at("included").get<bool>()));
            });

    srv.Put(R"(/sessions/([0-9a-f]+)/fovs/([\w-]+)/cells/(\d+)/class)",
            [this](const httplib::Request& req, httplib::Response& res) {
              const auto s = store_.get(req.matches[1]);
              const Json body = detail::parse_body(req);
              if (!body.contains("class")) throw ValidationError("body must be {\"class\": name or null}");
              std::optional<CellClass> cls;
              if (!body.at("class").is_null()) cls = cell_class_from_string(body.at("class").get<std::string>());
              const Json fov = s->set_cell_class(req.matches[2], detail::parse_index(req.matches[3]), cls);
              detail::send_json(res, {{"fov", fov}, {"report", s->report().at("report")}});
            });

    srv.Get(R"(/sessions/([0-9a-f]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
      detail::send_json(res, store_.get(req.matches[1])->report());
    });

    srv.Get(R"(/sessions/([0-9a-f]+)/fovs/([\w-]+)/overlay)",
            [this](const httplib::Request& req, httplib::Response& res) {
              const auto s = store_.get(req.matches[1]);
              const std::string format = req.has_param("format") ? req.get_param_value("format") : "png";
              if (format == "json") {
                detail::send_json(res, s->overlay_json(req.matches[2]));
              } else if (format == "png") {
                const auto png = s->overlay_png(req.matches[2]);
                res.set_content(std::string(png.begin(), png.end()), "image/png");
              } else {
                throw ValidationError("format must be png or json");
              }
            });
  }

 private:
  static std::span<const std::uint8_t> bytes(const std::string& s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
  }

  SessionStore& store_;
};

/// Splits "host:port"; a bare port listens on 127.0.0.1.
inline std::pair<std::string, int> parse_listen(const std::string& listen) {
  const auto colon = listen.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : listen.substr(0, colon);
  const std::string port = colon == std::string::npos ? listen : listen.substr(colon + 1);
  const int p = her2::detail::parse_int("service.listen", port);
  if (p < 0 || p > 65535) throw ConfigError("service.listen: port out of range");
  return {host.empty() ? "0.0.0.0" : host, p};
}

}  // namespace her2::http
