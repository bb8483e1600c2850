#pragma once

// HTTP front end for SessionManager.
//
//   GET  /health                    {"status": "ok", "environments": [...]}
//   POST /sessions                  body: {"env", "params", "options", "build", "seed", "max_steps", "async"}
//   GET  /sessions/{id}             session view (tree, recommended action, return, ...)
//   GET  /sessions/{id}/tree        TreeDocument
//   GET  /sessions/{id}/status      {"id", "status"}
//   POST /sessions/{id}/act         body: {"mode": "approve"|"override", "action": index}
//   GET  /sessions/{id}/history     [{"step", "action", "label", "mode", "recommended", "reward", ...}]
//
// Errors are {"error": message} with status 400 (bad request), 404 (unknown
// session) or 409 (approve mismatch, finished or still-building session).

#include <memory>
#include <string>

#include <httplib.h>

#include "sptree/service/sessions.hpp"

namespace sptree::service {

class ApiServer {
public:
    explicit ApiServer(SessionManager& sessions);

    /// Blocks until stop() is called. Returns false if the socket could not be bound.
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it; serve with listen_after_bind().
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    bool is_running() const { return server_.is_running(); }
    void wait_until_ready() const { server_.wait_until_ready(); }

private:
    void routes();

    SessionManager& sessions_;
    httplib::Server server_;
};

}  // namespace sptree::service
