#include "sptree/service/sessions.hpp"

#include <iomanip>
#include <random>
#include <sstream>

#include <sqlite3.h>

#include "sptree/env/config.hpp"

namespace sptree::service {

using nlohmann::json;

std::string to_string(ActMode mode) { return mode == ActMode::Approve ? "approve" : "override"; }

ActMode act_mode_from_string(const std::string& text) {
    if (text == "approve") {
        return ActMode::Approve;
    }
    if (text == "override") {
        return ActMode::Override;
    }
    throw ServiceError(400, "mode must be 'approve' or 'override', got '" + text + "'");
}

// ---- stores ---------------------------------------------------------------

void MemoryStore::put(const std::string& id, const json& record) {
    std::lock_guard lock(mutex_);
    records_[id] = record;
}

std::optional<json> MemoryStore::get(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = records_.find(id);
    if (it == records_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<std::string> MemoryStore::ids() {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, r] : records_) {
        out.push_back(id);
    }
    return out;
}

namespace {

void check_sqlite(int rc, sqlite3* db, const char* what) {
    if (rc != SQLITE_OK && rc != SQLITE_DONE && rc != SQLITE_ROW) {
        throw std::runtime_error(std::string(what) + ": " + (db ? sqlite3_errmsg(db) : sqlite3_errstr(rc)));
    }
}

/// Finalizes a prepared statement on scope exit.
struct Statement {
    sqlite3_stmt* stmt = nullptr;
    ~Statement() { sqlite3_finalize(stmt); }
};

}  // namespace

SqliteStore::SqliteStore(const std::filesystem::path& path) {
    const int rc = sqlite3_open(path.string().c_str(), &db_);
    if (rc != SQLITE_OK) {
        const std::string msg = db_ ? sqlite3_errmsg(db_) : sqlite3_errstr(rc);
        sqlite3_close(db_);
        db_ = nullptr;
        throw std::runtime_error("cannot open session store " + path.string() + ": " + msg);
    }
    check_sqlite(sqlite3_exec(db_, "CREATE TABLE IF NOT EXISTS sessions (id TEXT PRIMARY KEY, record TEXT NOT NULL)",
                              nullptr, nullptr, nullptr),
                 db_, "create session table");
}

SqliteStore::~SqliteStore() { sqlite3_close(db_); }

void SqliteStore::put(const std::string& id, const json& record) {
    std::lock_guard lock(mutex_);
    Statement st;
    check_sqlite(sqlite3_prepare_v2(db_, "INSERT OR REPLACE INTO sessions (id, record) VALUES (?1, ?2)", -1, &st.stmt,
                                    nullptr),
                 db_, "prepare insert");
    const std::string text = record.dump();
    sqlite3_bind_text(st.stmt, 1, id.c_str(), -1, SQLITE_TRANSIENT);
    sqlite3_bind_text(st.stmt, 2, text.c_str(), -1, SQLITE_TRANSIENT);
    check_sqlite(sqlite3_step(st.stmt), db_, "write session");
}

std::optional<json> SqliteStore::get(const std::string& id) {
    std::lock_guard lock(mutex_);
    Statement st;
    check_sqlite(sqlite3_prepare_v2(db_, "SELECT record FROM sessions WHERE id = ?1", -1, &st.stmt, nullptr), db_,
                 "prepare select");
    sqlite3_bind_text(st.stmt, 1, id.c_str(), -1, SQLITE_TRANSIENT);
    const int rc = sqlite3_step(st.stmt);
    check_sqlite(rc, db_, "read session");
    if (rc != SQLITE_ROW) {
        return std::nullopt;
    }
    return json::parse(reinterpret_cast<const char*>(sqlite3_column_text(st.stmt, 0)));
}

std::vector<std::string> SqliteStore::ids() {
    std::lock_guard lock(mutex_);
    Statement st;
    check_sqlite(sqlite3_prepare_v2(db_, "SELECT id FROM sessions ORDER BY id", -1, &st.stmt, nullptr), db_,
                 "prepare list");
    std::vector<std::string> out;
    int rc = 0;
    while ((rc = sqlite3_step(st.stmt)) == SQLITE_ROW) {
        out.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(st.stmt, 0)));
    }
    check_sqlite(rc, db_, "list sessions");
    return out;
}

// ---- requests ---------------------------------------------------------------

CreateRequest CreateRequest::from_json(const json& j) {
    if (!j.is_object()) {
        throw ServiceError(400, "request body must be a JSON object");
    }
    CreateRequest r;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "env") {
                r.env = value.get<std::string>();
            } else if (key == "params") {
                r.params = value;
            } else if (key == "options") {
                r.options = value;
            } else if (key == "build") {
                r.build = io::build_config_from_json(value);
            } else if (key == "seed") {
                r.seed = value.get<std::uint64_t>();
            } else if (key == "max_steps") {
                r.max_steps = value.get<std::size_t>();
            } else {
                throw ServiceError(400, "unknown request field '" + key + "'");
            }
        }
        if (r.env.empty()) {
            throw ServiceError(400, "request needs an 'env' field");
        }
        // Parameter validation is cheap; do it before any policy is trained.
        if (r.env == "grid") {
            env::grid_params_from_json(r.params);
        } else if (r.env == "vaccine") {
            env::sird_params_from_json(r.params);
        } else if (r.env == "cyber") {
            env::cyber_params_from_json(r.params);
        } else {
            throw ServiceError(400, "unknown environment '" + r.env + "'");
        }
        r.build.validate();
        if (r.max_steps == 0) {
            throw ServiceError(400, "max_steps must be at least 1");
        }
    } catch (const ServiceError&) {
        throw;
    } catch (const json::exception& e) {
        throw ServiceError(400, std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
        throw ServiceError(400, e.what());
    }
    return r;
}

json CreateRequest::to_json() const {
    return json{{"env", env},         {"params", params}, {"options", options},
                {"build", io::to_json(build)}, {"seed", seed},     {"max_steps", max_steps}};
}

// ---- sessions ---------------------------------------------------------------

Session::Session(std::string id, CreateRequest request) : id_(std::move(id)), request_(std::move(request)) {}

void Session::initialize() {
    Environment env;
    try {
        env = make_environment(request_.env, request_.params, request_.options);
    } catch (const std::exception& e) {
        std::unique_lock lock(mutex_);
        status_ = "failed";
        failure_ = e.what();
        throw ServiceError(400, e.what());
    }
    std::unique_lock lock(mutex_);
    env_ = std::move(env);
    ControllerConfig config;
    config.rebuild_at_leaf = true;
    config.max_steps = request_.max_steps;
    try {
        controller_ = std::make_unique<Controller>(*env_.model, *env_.policy, config, request_.build, request_.seed);
        exec_ = controller_->start();
    } catch (const std::exception& e) {
        status_ = "failed";
        failure_ = e.what();
        throw ServiceError(400, e.what());
    }
    refresh_document();
    status_ = exec_.finished() ? "finished" : "ready";
}

void Session::refresh_document() { document_ = io::to_json(io::serialize_tree(*exec_.tree, *env_.model)); }

std::string Session::status() const {
    std::shared_lock lock(mutex_);
    return status_;
}

void Session::require_ready() const {
    if (status_ == "building") {
        throw ServiceError(409, "session " + id_ + " is still building its tree");
    }
    if (status_ == "failed") {
        throw ServiceError(409, "session " + id_ + " failed to start: " + failure_);
    }
}

json Session::view_locked() const {
    json out{{"id", id_}, {"status", status_}, {"env", request_.env}};
    if (status_ == "failed") {
        out["error"] = failure_;
        return out;
    }
    if (status_ == "building") {
        return out;
    }
    const auto recommended = controller_->select_action(exec_);
    json labels = json::array();
    for (std::size_t a = 0; a < env_.model->action_count(); ++a) {
        labels.push_back(env_.model->action_label(ActionId{a}));
    }
    Particle live;
    live.state = exec_.true_state;
    live.observation = exec_.last_observation;
    out["tree"] = document_;
    out["current_node"] = exec_.current_node ? json(exec_.current_node->id) : json(nullptr);
    out["recommended"] = recommended ? json(recommended->index) : json(nullptr);
    out["recommended_label"] = recommended ? json(env_.model->action_label(*recommended)) : json(nullptr);
    out["actions"] = std::move(labels);
    out["step"] = exec_.step_index;
    out["return"] = exec_.accumulated_return;
    out["finished"] = exec_.finished();
    out["done"] = exec_.done;
    out["rebuilds"] = exec_.rebuilds;
    out["state"] = env_.model->describe_particles(std::span<const Particle>(&live, 1));
    return out;
}

json Session::view() const {
    std::shared_lock lock(mutex_);
    return view_locked();
}

json Session::tree() const {
    std::shared_lock lock(mutex_);
    require_ready();
    return document_;
}

json Session::history() const {
    std::shared_lock lock(mutex_);
    json out = json::array();
    for (const auto& h : history_) {
        out.push_back(json{{"step", h.step},
                           {"action", h.action},
                           {"label", h.label},
                           {"mode", to_string(h.mode)},
                           {"recommended", h.recommended ? json(*h.recommended) : json(nullptr)},
                           {"reward", h.reward},
                           {"rebuilt", h.rebuilt},
                           {"left_tree", h.left_tree}});
    }
    return out;
}

json Session::act(std::optional<std::size_t> action, ActMode mode) {
    std::unique_lock lock(mutex_);
    require_ready();
    if (status_ == "finished" || exec_.finished()) {
        throw ServiceError(409, "session " + id_ + " is finished (return " + std::to_string(exec_.accumulated_return) +
                                    ")");
    }
    const auto recommended = controller_->select_action(exec_);
    if (!action) {
        if (mode == ActMode::Override) {
            throw ServiceError(400, "override needs an action");
        }
        action = recommended->index;
    }
    if (*action >= env_.model->action_count()) {
        throw ServiceError(400, "action " + std::to_string(*action) + " out of range (action count " +
                                    std::to_string(env_.model->action_count()) + ")");
    }
    if (mode == ActMode::Approve && *action != recommended->index) {
        throw ServiceError(409, "approve expects the recommended action " + std::to_string(recommended->index) +
                                    ", got " + std::to_string(*action));
    }

    const ActionId chosen{*action};
    bool left_tree = false;
    if (exec_.in_tree) {
        left_tree = exec_.current_node == nullptr ? exec_.tree->root.action != chosen
                                                  : exec_.current_node->child_with_action(chosen) == nullptr;
    }
    const auto tree_before = exec_.tree;
    controller_->apply(exec_, chosen);

    HistoryRecord rec;
    rec.step = exec_.step_index - 1;
    rec.action = chosen.index;
    rec.label = env_.model->action_label(chosen);
    rec.mode = mode;
    rec.recommended = recommended ? std::optional<std::size_t>(recommended->index) : std::nullopt;
    rec.reward = exec_.trace.back().reward;
    rec.rebuilt = exec_.tree != tree_before;
    rec.left_tree = left_tree;
    history_.push_back(rec);

    if (rec.rebuilt) {
        refresh_document();
    }
    if (exec_.finished()) {
        status_ = "finished";
    }
    json out = view_locked();
    out["last"] = json{{"action", rec.action}, {"label", rec.label},      {"mode", to_string(mode)},
                       {"reward", rec.reward}, {"rebuilt", rec.rebuilt}, {"left_tree", rec.left_tree}};
    return out;
}

json Session::persisted() const {
    std::shared_lock lock(mutex_);
    json steps = json::array();
    for (const auto& h : history_) {
        steps.push_back(json{{"action", h.action}, {"mode", to_string(h.mode)}});
    }
    return json{{"request", request_.to_json()}, {"history", std::move(steps)}};
}

// ---- manager ---------------------------------------------------------------

SessionManager::SessionManager(std::unique_ptr<SessionStore> store) : store_(std::move(store)) {
    if (!store_) {
        throw ContractViolation("session manager needs a store");
    }
}

SessionManager::~SessionManager() {
    std::lock_guard lock(workers_mutex_);
    for (auto& w : workers_) {
        if (w.joinable()) {
            w.join();
        }
    }
}

std::string SessionManager::fresh_id() {
    static thread_local std::random_device device;
    const std::uint64_t entropy = (static_cast<std::uint64_t>(device()) << 32) ^ device();
    std::uint64_t n = 0;
    {
        std::unique_lock lock(mutex_);
        n = ++counter_;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << derive_seed(entropy, {n});
    return out.str();
}

void SessionManager::persist(const Session& session) {
    // Snapshot and write under one lock so a slower writer never stores an older history.
    std::lock_guard lock(persist_mutex_);
    store_->put(session.id(), session.persisted());
}

json SessionManager::create(const json& request) {
    auto session = std::make_shared<Session>(fresh_id(), CreateRequest::from_json(request));
    session->initialize();
    {
        std::unique_lock lock(mutex_);
        sessions_[session->id()] = session;
    }
    persist(*session);
    return session->view();
}

json SessionManager::create_async(const json& request) {
    auto session = std::make_shared<Session>(fresh_id(), CreateRequest::from_json(request));
    {
        std::unique_lock lock(mutex_);
        sessions_[session->id()] = session;
    }
    persist(*session);
    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([session] {
        try {
            session->initialize();
        } catch (const std::exception&) {
            // The failure is recorded on the session and reported by its status.
        }
    });
    return json{{"id", session->id()}, {"status", "building"}};
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) {
    {
        std::shared_lock lock(mutex_);
        auto it = sessions_.find(id);
        if (it != sessions_.end()) {
            return it->second;
        }
    }
    return restore(id);
}

std::shared_ptr<Session> SessionManager::restore(const std::string& id) {
    const auto record = store_->get(id);
    if (!record) {
        return nullptr;
    }
    auto session = std::make_shared<Session>(id, CreateRequest::from_json(record->at("request")));
    session->initialize();
    for (const auto& step : record->at("history")) {
        session->act(step.at("action").get<std::size_t>(), act_mode_from_string(step.at("mode").get<std::string>()));
    }
    std::unique_lock lock(mutex_);
    auto [it, inserted] = sessions_.emplace(id, session);
    return it->second;
}

json SessionManager::act(const std::string& id, std::optional<std::size_t> action, ActMode mode) {
    auto session = find(id);
    if (!session) {
        throw ServiceError(404, "no session " + id);
    }
    json out = session->act(action, mode);
    persist(*session);
    return out;
}

}  // namespace sptree::service
