#include "sptree/service/http.hpp"

namespace sptree::service {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

/// Runs a handler, mapping exceptions onto status codes.
template <typename F>
void guarded(httplib::Response& res, F&& handler) {
    try {
        handler();
    } catch (const ServiceError& e) {
        reply(res, e.status(), json{{"error", e.what()}});
    } catch (const json::exception& e) {
        reply(res, 400, json{{"error", std::string("malformed JSON: ") + e.what()}});
    } catch (const ContractViolation& e) {
        reply(res, 400, json{{"error", e.what()}});
    } catch (const std::exception& e) {
        reply(res, 500, json{{"error", e.what()}});
    }
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) {
        return json::object();
    }
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ServiceError(400, std::string("body is not valid JSON: ") + e.what());
    }
}

}  // namespace

ApiServer::ApiServer(SessionManager& sessions) : sessions_(sessions) { routes(); }

void ApiServer::routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, json{{"status", "ok"}, {"environments", environment_kinds()}});
    });

    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            json body = parse_body(req);
            bool async = false;
            if (body.is_object() && body.contains("async")) {
                async = body.at("async").get<bool>();
                body.erase("async");
            }
            if (async) {
                reply(res, 202, sessions_.create_async(body));
            } else {
                reply(res, 201, sessions_.create(body));
            }
        });
    });

    auto lookup = [this](const httplib::Request& req) {
        const std::string id = req.matches[1];
        auto session = sessions_.find(id);
        if (!session) {
            throw ServiceError(404, "no session " + id);
        }
        return session;
    };

    server_.Get(R"(/sessions/([0-9a-f]+))", [lookup](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, 200, lookup(req)->view()); });
    });
    server_.Get(R"(/sessions/([0-9a-f]+)/tree)", [lookup](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, 200, lookup(req)->tree()); });
    });
    server_.Get(R"(/sessions/([0-9a-f]+)/status)", [lookup](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto s = lookup(req);
            reply(res, 200, json{{"id", s->id()}, {"status", s->status()}});
        });
    });
    server_.Get(R"(/sessions/([0-9a-f]+)/history)", [lookup](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { reply(res, 200, lookup(req)->history()); });
    });
    server_.Post(R"(/sessions/([0-9a-f]+)/act)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json body = parse_body(req);
            if (!body.is_object()) {
                throw ServiceError(400, "act body must be a JSON object");
            }
            ActMode mode = ActMode::Approve;
            std::optional<std::size_t> action;
            for (const auto& [key, value] : body.items()) {
                if (key == "mode") {
                    mode = act_mode_from_string(value.get<std::string>());
                } else if (key == "action") {
                    if (!value.is_number_unsigned()) {
                        throw ServiceError(400, "action must be a non-negative integer");
                    }
                    action = value.get<std::size_t>();
                } else {
                    throw ServiceError(400, "unknown act field '" + key + "'");
                }
            }
            reply(res, 200, sessions_.act(req.matches[1], action, mode));
        });
    });
}

bool ApiServer::listen(const std::string& host, int port) { return server_.listen(host, port); }

int ApiServer::bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }

bool ApiServer::listen_after_bind() { return server_.listen_after_bind(); }

void ApiServer::stop() { server_.stop(); }

}  // namespace sptree::service
