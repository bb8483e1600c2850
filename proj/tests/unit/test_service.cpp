#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <thread>

#include "fixtures.hpp"
#include "sptree/service/http.hpp"
#include "sptree/service/sessions.hpp"

using namespace sptree;
using namespace sptree::testing;
using namespace sptree::service;
using nlohmann::json;

namespace {

json grid_request(std::uint64_t seed = 3) {
    return json{{"env", "grid"},
                {"params", {{"p_success", 0.8}}},
                {"build", {{"n_particles", 100}, {"n_min", 20}, {"d_max", 4}}},
                {"seed", seed}};
}

int status_of(const std::function<void()>& call) {
    try {
        call();
    } catch (const ServiceError& e) {
        return e.status();
    }
    return 200;
}

std::filesystem::path fresh_db(const std::string& name) {
    auto path = std::filesystem::temp_directory_path() / ("sptree_test_" + name + ".db");
    std::filesystem::remove(path);
    return path;
}

void wait_until_built(Session& s) {
    for (int i = 0; i < 2000 && s.status() == "building"; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
}

}  // namespace

TEST_CASE("a new grid session recommends the value-iteration action") {
    SessionManager m;
    const auto view = m.create(grid_request());
    CHECK(view["status"] == "ready");
    CHECK(view["step"] == 0);
    CHECK(view["current_node"].is_null());

    env::GridWorldParams p;
    p.p_success = 0.8;
    const auto g = solve_grid(p);
    const auto expected = greedy_action(*g.policy, std::get<StateVector>(initial_query(*g.model, 3)));
    CHECK(view["recommended"] == expected.index);
    CHECK(view["tree"]["nodes"][0]["action"] == expected.index);
    CHECK(view["actions"].size() == 4);
    REQUIRE_NOTHROW(io::tree_document_from_json(view["tree"]).validate());
}

TEST_CASE("bad create requests are rejected with 400") {
    SessionManager m;
    json bad = grid_request();
    bad["params"]["widht"] = 4;
    try {
        m.create(bad);
        FAIL("expected a 400");
    } catch (const ServiceError& e) {
        CHECK(e.status() == 400);
        CHECK(std::string(e.what()).find("widht") != std::string::npos);
    }
    CHECK(status_of([&] { m.create(json{{"env", "chess"}}); }) == 400);
    CHECK(status_of([&] { m.create(json{{"env", "grid"}, {"build", {{"d_max", 0}}}}); }) == 400);
    CHECK(status_of([&] { m.create(json{{"env", "grid"}, {"options", {{"policy", "lookahead"}}}}); }) == 400);
    CHECK(status_of([&] { m.create(json::array()); }) == 400);
}

TEST_CASE("identical requests give identical sessions") {
    SessionManager m;
    auto a = m.create(grid_request(9));
    auto b = m.create(grid_request(9));
    CHECK(a["id"] != b["id"]);
    a.erase("id");
    b.erase("id");
    CHECK(a == b);
}

TEST_CASE("approving follows the tree and records history") {
    SessionManager m;
    const auto view = m.create(grid_request());
    const std::string id = view["id"];
    const auto doc = io::tree_document_from_json(view["tree"]);
    std::vector<std::size_t> approved;
    std::size_t node = 0;
    for (int i = 0; i < 3; ++i) {
        const auto before = m.find(id)->view();
        if (before["finished"] == true) {
            break;
        }
        const auto out = m.act(id, std::nullopt, ActMode::Approve);
        CHECK(out["last"]["action"] == before["recommended"]);
        CHECK(out["last"]["mode"] == "approve");
        approved.push_back(out["last"]["action"]);
        if (out["last"]["rebuilt"] == true || out["current_node"].is_null()) {
            break;
        }
        // The executed node is a child of the previous one with the approved action.
        const auto& rec = doc.node(out["current_node"]);
        if (i > 0) {
            CHECK(rec.parent == std::optional<std::size_t>{node});
        }
        CHECK(rec.action == approved.back());
        node = rec.id;
    }
    const auto history = m.find(id)->history();
    REQUIRE(history.size() == approved.size());
    for (std::size_t i = 0; i < approved.size(); ++i) {
        CHECK(history[i]["action"] == approved[i]);
        CHECK(history[i]["step"] == i);
    }
}

TEST_CASE("approving a different action is a conflict") {
    SessionManager m;
    const auto view = m.create(grid_request());
    const std::string id = view["id"];
    const std::size_t other = (view["recommended"].get<std::size_t>() + 1) % 4;
    CHECK(status_of([&] { m.act(id, other, ActMode::Approve); }) == 409);
    CHECK(status_of([&] { m.act(id, 17, ActMode::Override); }) == 400);
    CHECK(status_of([&] { m.act(id, std::nullopt, ActMode::Override); }) == 400);
    CHECK(m.find(id)->history().empty());
}

TEST_CASE("an override outside the tree triggers a fresh tree") {
    SessionManager m;
    const auto view = m.create(grid_request());
    const std::string id = view["id"];
    const std::size_t other = (view["recommended"].get<std::size_t>() + 1) % 4;
    const auto out = m.act(id, other, ActMode::Override);
    CHECK(out["last"]["left_tree"] == true);
    CHECK(out["last"]["rebuilt"] == true);
    CHECK(out["rebuilds"] == 1);
    CHECK(out["current_node"].is_null());
    const auto doc = io::tree_document_from_json(out["tree"]);
    CHECK(doc.nodes[0].reach_probability == 1.0);
    CHECK(out["recommended"] == doc.nodes[0].action);
    CHECK(m.find(id)->history()[0]["mode"] == "override");
}

TEST_CASE("a finished session refuses actions") {
    SessionManager m;
    json req{{"env", "grid"},
             {"params", {{"width", 3}, {"height", 1}, {"p_success", 1.0}, {"goals", {{2, 0}}}, {"traps", json::array()}}},
             {"build", {{"n_particles", 10}, {"n_min", 1}}}};
    const auto view = m.create(req);
    const std::string id = view["id"];
    m.act(id, std::nullopt, ActMode::Approve);
    const auto last = m.act(id, std::nullopt, ActMode::Approve);
    CHECK(last["finished"] == true);
    CHECK(last["status"] == "finished");
    CHECK(last["return"] == 8.0);
    CHECK(last["recommended"].is_null());
    CHECK(status_of([&] { m.act(id, std::nullopt, ActMode::Approve); }) == 409);
    CHECK(m.find(id)->history().size() == 2);
}

TEST_CASE("unknown sessions are not found") {
    SessionManager m;
    CHECK_FALSE(m.find("deadbeef"));
    CHECK(status_of([&] { m.act("deadbeef", std::nullopt, ActMode::Approve); }) == 404);
}

TEST_CASE("replaying a history reproduces the session") {
    SessionManager m;
    const std::string id = m.create(grid_request(4))["id"];
    const std::size_t other = (m.find(id)->view()["recommended"].get<std::size_t>() + 2) % 4;
    m.act(id, std::nullopt, ActMode::Approve);
    m.act(id, other, ActMode::Override);
    m.act(id, std::nullopt, ActMode::Approve);
    const auto persisted = m.find(id)->persisted();

    SessionManager again;
    const std::string copy = again.create(persisted["request"])["id"];
    for (const auto& step : persisted["history"]) {
        again.act(copy, step["action"].get<std::size_t>(), act_mode_from_string(step["mode"]));
    }
    auto a = m.find(id)->view();
    auto b = again.find(copy)->view();
    a.erase("id");
    b.erase("id");
    CHECK(a == b);
    CHECK(m.find(id)->history() == again.find(copy)->history());
}

TEST_CASE("sessions survive a restart with an SQLite store") {
    const auto path = fresh_db("restart");
    std::string id;
    json before;
    {
        SessionManager m(std::make_unique<SqliteStore>(path));
        id = m.create(grid_request(6))["id"];
        m.act(id, std::nullopt, ActMode::Approve);
        m.act(id, std::nullopt, ActMode::Approve);
        before = m.find(id)->view();
    }
    SessionManager restarted(std::make_unique<SqliteStore>(path));
    const auto session = restarted.find(id);
    REQUIRE(session);
    CHECK(session->view() == before);
    CHECK(session->history().size() == 2);
    CHECK_FALSE(restarted.find("0123456789abcdef"));
    std::filesystem::remove(path);
}

TEST_CASE("stores keep the latest record per id") {
    const auto path = fresh_db("store");
    SqliteStore sql(path);
    MemoryStore mem;
    for (SessionStore* s : {static_cast<SessionStore*>(&sql), static_cast<SessionStore*>(&mem)}) {
        CHECK_FALSE(s->get("a"));
        s->put("a", json{{"v", 1}});
        s->put("b", json{{"v", 2}});
        s->put("a", json{{"v", 3}});
        CHECK((*s->get("a"))["v"] == 3);
        CHECK(s->ids().size() == 2);
    }
    std::filesystem::remove(path);
}

TEST_CASE("asynchronous creation reports building, then ready") {
    SessionManager m;
    const auto out = m.create_async(grid_request());
    CHECK(out["status"] == "building");
    const auto session = m.find(out["id"]);
    REQUIRE(session);
    wait_until_built(*session);
    CHECK(session->status() == "ready");
    CHECK(session->tree()["nodes"].size() >= 1);

    json bad = grid_request();
    bad["options"] = {{"policy", "lookahead"}};
    const auto failed = m.find(m.create_async(bad)["id"]);
    wait_until_built(*failed);
    CHECK(failed->status() == "failed");
    CHECK(status_of([&] { failed->tree(); }) == 409);
}

TEST_CASE("the HTTP API round trip") {
    SessionManager m;
    ApiServer server(m);
    const int port = server.bind_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread serving([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["environments"] == json{"grid", "vaccine", "cyber"});

    auto created = client.Post("/sessions", grid_request().dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto view = json::parse(created->body);
    const std::string id = view["id"];

    auto tree = client.Get("/sessions/" + id + "/tree");
    REQUIRE(tree);
    CHECK(tree->status == 200);
    CHECK(json::parse(tree->body) == view["tree"]);

    const std::size_t other = (view["recommended"].get<std::size_t>() + 1) % 4;
    auto conflict = client.Post("/sessions/" + id + "/act", json{{"mode", "approve"}, {"action", other}}.dump(),
                                "application/json");
    REQUIRE(conflict);
    CHECK(conflict->status == 409);
    CHECK(json::parse(conflict->body).contains("error"));

    auto acted = client.Post("/sessions/" + id + "/act", json{{"mode", "approve"}}.dump(), "application/json");
    REQUIRE(acted);
    CHECK(acted->status == 200);
    CHECK(json::parse(acted->body)["step"] == 1);

    auto history = client.Get("/sessions/" + id + "/history");
    REQUIRE(history);
    CHECK(json::parse(history->body).size() == 1);

    auto status = client.Get("/sessions/" + id + "/status");
    REQUIRE(status);
    CHECK(json::parse(status->body)["status"] == "ready");

    auto missing = client.Get("/sessions/0123456789abcdef");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    auto garbage = client.Post("/sessions", "{oops", "application/json");
    REQUIRE(garbage);
    CHECK(garbage->status == 400);

    auto unknown_field = client.Post("/sessions/" + id + "/act", json{{"verb", "approve"}}.dump(), "application/json");
    REQUIRE(unknown_field);
    CHECK(unknown_field->status == 400);

    auto async = client.Post("/sessions", json{{"env", "cyber"}, {"build", {{"n_particles", 50}, {"n_min", 10}}},
                                               {"async", true}}.dump(),
                             "application/json");
    REQUIRE(async);
    CHECK(async->status == 202);
    CHECK(json::parse(async->body)["status"] == "building");

    server.stop();
    serving.join();
}
