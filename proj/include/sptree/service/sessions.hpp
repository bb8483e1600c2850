#pragma once

// Human-in-the-loop sessions: a live episode driven by approve/override
// decisions, with the current policy tree always available.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sptree/executor.hpp"
#include "sptree/export.hpp"
#include "sptree/service/registry.hpp"

struct sqlite3;

namespace sptree::service {

/// Error with the HTTP status it maps to.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

enum class ActMode { Approve, Override };

struct HistoryRecord {
    std::size_t step = 0;
    std::size_t action = 0;
    std::string label;
    ActMode mode = ActMode::Approve;
    std::optional<std::size_t> recommended;
    double reward = 0.0;
    bool rebuilt = false;
    bool left_tree = false;
};

/// Persistence for session requests and their action history. Sessions are
/// restored by replaying the history against a fresh session.
class SessionStore {
public:
    virtual ~SessionStore() = default;
    virtual void put(const std::string& id, const nlohmann::json& record) = 0;
    virtual std::optional<nlohmann::json> get(const std::string& id) = 0;
    virtual std::vector<std::string> ids() = 0;
};

class MemoryStore final : public SessionStore {
public:
    void put(const std::string& id, const nlohmann::json& record) override;
    std::optional<nlohmann::json> get(const std::string& id) override;
    std::vector<std::string> ids() override;

private:
    std::mutex mutex_;
    std::map<std::string, nlohmann::json> records_;
};

/// Key-value table in an SQLite file.
class SqliteStore final : public SessionStore {
public:
    explicit SqliteStore(const std::filesystem::path& path);
    ~SqliteStore() override;
    SqliteStore(const SqliteStore&) = delete;
    SqliteStore& operator=(const SqliteStore&) = delete;

    void put(const std::string& id, const nlohmann::json& record) override;
    std::optional<nlohmann::json> get(const std::string& id) override;
    std::vector<std::string> ids() override;

private:
    std::mutex mutex_;
    sqlite3* db_ = nullptr;
};

struct CreateRequest {
    std::string env;
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json options = nlohmann::json::object();
    BuildConfig build;
    std::uint64_t seed = 0;
    std::size_t max_steps = 1000;

    static CreateRequest from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

class Session {
public:
    Session(std::string id, CreateRequest request);

    const std::string& id() const noexcept { return id_; }
    const CreateRequest& request() const noexcept { return request_; }

    /// Builds the environment, its policy and the first tree. Called once.
    void initialize();
    /// "building", "ready", "finished" or "failed".
    std::string status() const;

    nlohmann::json view() const;
    nlohmann::json tree() const;
    nlohmann::json history() const;
    nlohmann::json act(std::optional<std::size_t> action, ActMode mode);

    nlohmann::json persisted() const;

private:
    nlohmann::json view_locked() const;
    void require_ready() const;
    void refresh_document();

    std::string id_;
    CreateRequest request_;

    mutable std::shared_mutex mutex_;
    std::string status_ = "building";
    std::string failure_;
    Environment env_;
    std::unique_ptr<Controller> controller_;
    ExecutionState exec_;
    nlohmann::json document_;
    std::vector<HistoryRecord> history_;
};

class SessionManager {
public:
    explicit SessionManager(std::unique_ptr<SessionStore> store = std::make_unique<MemoryStore>());
    ~SessionManager();

    /// Synchronous create: returns the session view with its first tree.
    nlohmann::json create(const nlohmann::json& request);
    /// Asynchronous create: returns {"id", "status": "building"} at once.
    nlohmann::json create_async(const nlohmann::json& request);

    std::shared_ptr<Session> find(const std::string& id);
    nlohmann::json act(const std::string& id, std::optional<std::size_t> action, ActMode mode);
    void persist(const Session& session);

private:
    std::shared_ptr<Session> restore(const std::string& id);
    std::string fresh_id();

    std::unique_ptr<SessionStore> store_;
    std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mutex persist_mutex_;
    std::mutex workers_mutex_;
    std::vector<std::thread> workers_;
    std::uint64_t counter_ = 0;
};

std::string to_string(ActMode mode);
ActMode act_mode_from_string(const std::string& text);

}  // namespace sptree::service
