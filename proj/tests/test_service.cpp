#include <doctest.h>

#include <chrono>
#include <future>
#include <set>
#include <thread>

#include "plume/export.hpp"
#include "plume/serialize.hpp"
#include "plume/service.hpp"
#include "support.hpp"

// After Eigen: resolv.h defines _res.
#include <httplib.h>

using namespace plume;
using json::Json;

namespace {

struct Running {
    support::TempDir dir;
    service::Server server;
    int port;
    httplib::Client client;

    explicit Running(int workers)
        : server(service::Config{dir.path(), workers}), port(server.start("127.0.0.1", 0)), client("127.0.0.1", port) {
        client.set_read_timeout(120, 0);
    }
    ~Running() { server.stop(); }
};

httplib::MultipartFormDataItems upload_items(const std::string& name) {
    const auto dir = support::fixture(name);
    httplib::MultipartFormDataItems items{
        {"monitoring", read_file(dir / "monitoring.csv"), "monitoring.csv", "text/csv"},
        {"wells", read_file(dir / "wells.csv"), "wells.csv", "text/csv"},
    };
    if (std::filesystem::exists(dir / "overlays.json"))
        items.push_back({"overlays", read_file(dir / "overlays.json"), "overlays.json", "application/json"});
    return items;
}

std::string upload(httplib::Client& c, const std::string& name) {
    auto r = c.Post("/datasets", upload_items(name));
    REQUIRE(r);
    REQUIRE(r->status == 201);
    return Json::parse(r->body)["id"].get<std::string>();
}

std::string start_analysis(httplib::Client& c, const std::string& dataset, const std::string& options = "{}") {
    auto r = c.Post("/datasets/" + dataset + "/analyses", options, "application/json");
    REQUIRE(r);
    REQUIRE(r->status == 202);
    return Json::parse(r->body)["id"].get<std::string>();
}

std::string wait_done(httplib::Client& c, const std::string& id) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(300);
    while (std::chrono::steady_clock::now() < deadline) {
        auto r = c.Get("/analyses/" + id);
        REQUIRE(r);
        REQUIRE(r->status == 200);
        const auto status = Json::parse(r->body)["status"].get<std::string>();
        if (status == "done" || status == "failed") return status;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    return "timeout";
}

Json get_json(httplib::Client& c, const std::string& path, int expect = 200) {
    auto r = c.Get(path);
    REQUIRE(r);
    CHECK_MESSAGE(r->status == expect, path << " -> " << r->body);
    return Json::parse(r->body);
}

} // namespace

TEST_CASE("upload, analyse and query over HTTP") {
    Running s(2);
    auto& c = s.client;
    CHECK(get_json(c, "/health")["status"] == "ok");

    const auto ds = upload(c, "basic");
    CHECK(upload(c, "basic") == ds);
    auto summary = get_json(c, "/datasets/" + ds);
    CHECK(summary["wells"].size() == 8);

    const auto id = start_analysis(c, ds);
    REQUIRE(wait_done(c, id) == "done");
    const auto& lib = support::analysis("basic");

    for (const auto& solute : lib.dataset.solutes()) {
        for (std::size_t k = 0; k < lib.dataset.intervals().size(); ++k) {
            auto r = c.Get("/analyses/" + id + "/slices/" + std::to_string(k) + "?solute=" + solute);
            REQUIRE(r);
            REQUIRE(r->status == 200);
            auto wire = Json::parse(r->body);
            auto ref = exports::slice_grid(lib, solute, k);
            REQUIRE(wire["values"].size() == ref.values.size());
            bool same = true;
            for (std::size_t i = 0; i < ref.values.size(); ++i)
                same = same && wire["values"][i].get<double>() == ref.values[i];
            CHECK(same);
            CHECK(r->body == exports::to_json(ref).dump());
        }
    }

    const auto& well = lib.dataset.wells()[0].well_id;
    const auto& solute = lib.dataset.solutes()[0];
    auto trend = get_json(c, "/analyses/" + id + "/wells/" + well + "/trend?solute=" + solute);
    CHECK(trend["fitted"].get<std::vector<double>>() == lib.trend(well, solute)->fitted);

    auto missing = get_json(c, "/analyses/" + id + "/wells/NOPE/trend?solute=" + solute, 404);
    CHECK(missing["code"] == "WELL_NOT_FOUND");
    CHECK(get_json(c, "/analyses/deadbeef", 404)["code"] == "ANALYSIS_NOT_FOUND");
    CHECK(get_json(c, "/analyses/" + id + "/slices/999?solute=" + solute, 404)["code"] ==
          "INTERVAL_OUT_OF_RANGE");
    CHECK(get_json(c, "/analyses/" + id + "/slices/0?solute=Kryptonite", 404)["code"] == "SOLUTE_NOT_FOUND");

    auto flow = get_json(c, "/analyses/" + id + "/flow/1");
    CHECK(flow == json::to_json(lib.flow(1), lib.dataset));

    auto ind = get_json(c, "/analyses/" + id + "/indicators?k=2&mode=statistical&thresholds=" + solute + ":5");
    CHECK(ind == json::to_json(ind::indicator_matrix(lib, 2, ind::Mode::ThresholdStatistical, {{solute, 5.0}}),
                               lib.dataset));
    auto cut = get_json(c, "/analyses/" + id + "/indicators?k=2&stable=0.01&strong=0.02");
    CHECK(cut == json::to_json(ind::indicator_matrix(lib, 2, ind::Mode::Trend, {}, {0.01, 0.02}), lib.dataset));

    auto frames = get_json(c, "/analyses/" + id + "/frames?solute=" + solute + "&offset=1&limit=2&nx=10&ny=10");
    CHECK(frames["frames"].size() == 2);

    auto snap = get_json(c, "/analyses/" + id + "/snapshot?thresholds=" + solute + ":5");
    CHECK(snap["matrices"].size() == 3);

    // Idempotent reads.
    for (const std::string path : {"/analyses/" + id, "/analyses/" + id + "/slices/3?solute=" + solute,
                                   "/analyses/" + id + "/indicators?mode=absolute"}) {
        auto a = c.Get(path), b = c.Get(path);
        REQUIRE(a);
        REQUIRE(b);
        CHECK(a->body == b->body);
    }
}

TEST_CASE("queued jobs answer 409 and options are validated") {
    Running s(0);
    auto& c = s.client;
    const auto ds = upload(c, "basic");
    const auto id = start_analysis(c, ds);
    CHECK(get_json(c, "/analyses/" + id)["status"] == "queued");
    CHECK(get_json(c, "/analyses/" + id + "/slices/0?solute=Benzene", 409)["code"] == "JOB_NOT_DONE");

    auto bad = c.Post("/datasets/" + ds + "/analyses", R"({"lambda": -3})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 422);
    CHECK(Json::parse(bad->body)["code"] == "INVALID_OPTIONS");
    auto garbled = c.Post("/datasets/" + ds + "/analyses", "{nope", "application/json");
    REQUIRE(garbled);
    CHECK(garbled->status == 422);
    auto unknown = c.Post("/datasets/0000/analyses", "{}", "application/json");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
}

TEST_CASE("invalid uploads are rejected with diagnostics") {
    Running s(1);
    httplib::MultipartFormDataItems items{
        {"monitoring", "WellID,SampleDate,Constituent,Result,Units\nMW9,2010-01-01,Benzene,-4,ug/L\n", "m.csv", ""},
        {"wells", "WellID,X,Y\nMW1,0,0\n", "w.csv", ""},
    };
    auto r = s.client.Post("/datasets", items);
    REQUIRE(r);
    CHECK(r->status == 422);
    auto body = Json::parse(r->body);
    CHECK(body["code"] == "VALIDATION_FAILED");
    CHECK_FALSE(body["diagnostics"].empty());

    auto plain = s.client.Post("/datasets", "x", "text/plain");
    REQUIRE(plain);
    CHECK(plain->status == 400);
}

TEST_CASE("concurrent analyses complete independently") {
    Running s(2);
    const auto ds = upload(s.client, "basic");
    std::vector<std::future<std::pair<std::string, std::string>>> runs;
    for (const char* opts : {R"({"lambda": 0.5})", R"({"lambda": 5})", "{}"}) {
        runs.push_back(std::async(std::launch::async, [&, opts] {
            httplib::Client c("127.0.0.1", s.port);
            c.set_read_timeout(120, 0);
            auto id = start_analysis(c, ds, opts);
            return std::make_pair(id, wait_done(c, id));
        }));
    }
    std::set<std::string> ids;
    for (auto& f : runs) {
        auto [id, status] = f.get();
        CHECK(status == "done");
        ids.insert(id);
    }
    CHECK(ids.size() == 3);
    std::set<double> lambdas;
    for (const auto& id : ids)
        lambdas.insert(get_json(s.client, "/analyses/" + id)["models"][0]["lambda"].get<double>());
    CHECK(lambdas.count(0.5));
    CHECK(lambdas.count(5.0));
}

TEST_CASE("finished analyses survive a restart") {
    support::TempDir dir;
    std::string id;
    {
        service::Server server(service::Config{dir.path(), 1});
        const int port = server.start("127.0.0.1", 0);
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(120, 0);
        id = start_analysis(c, upload(c, "basic"));
        REQUIRE(wait_done(c, id) == "done");
        server.stop();
    }
    service::Server server(service::Config{dir.path(), 1});
    const int port = server.start("127.0.0.1", 0);
    httplib::Client c("127.0.0.1", port);
    auto r = c.Get("/analyses/" + id + "/slices/0?solute=Benzene");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->body == exports::to_json(exports::slice_grid(support::analysis("basic"), "Benzene", 0)).dump());
    server.stop();
}

TEST_CASE("listen address parsing") {
    CHECK(service::parse_listen("0.0.0.0:8080") == std::pair<std::string, int>{"0.0.0.0", 8080});
    CHECK(service::parse_listen(":9000").second == 9000);
    CHECK(service::parse_listen("7000") == std::pair<std::string, int>{"127.0.0.1", 7000});
}
