#include <atomic>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "keyflux/service.hpp"
// After Eigen: <resolv.h> defines a `_res` macro.
#include "httplib.h"
#include "support/schema.hpp"

using namespace keyflux;
using nlohmann::json;

namespace {

json body_of(const HttpReply& r) { return json::parse(r.body); }

json without_timing(json doc) {
  doc.erase("solveMilliseconds");
  return doc;
}

}  // namespace

TEST_SUITE("service handlers") {
  TEST_CASE("strategies") {
    Service svc;
    const auto r = svc.strategies();
    CHECK(r.status == 200);
    const auto doc = body_of(r);
    CHECK(schema::violations("strategies.schema.json", doc).empty());
    REQUIRE(doc["strategies"].size() == 6);
    bool tb = false, hy = false;
    for (const auto& s : doc["strategies"]) {
      if (s["kind"] == "TB") tb = s["thresholdUnit"] == "Month";
      if (s["kind"] == "HY") hy = s["thresholdUnit"] == "Device and Month";
      if (s["kind"] == "MB") CHECK(s["defaultThresholds"] == json::array({500, 1000, 1500, 2000, 2500}));
    }
    CHECK(tb);
    CHECK(hy);
  }

  TEST_CASE("analyze at the default scenario") {
    Service svc;
    const auto r = svc.analyze(R"({"kind":"LB","threshold":1})");
    REQUIRE(r.status == 200);
    const auto doc = body_of(r);
    CHECK(schema::violations("analyze-response.schema.json", doc).empty());
    CHECK(doc["steadyRisk"].get<double>() == doctest::Approx(0.035).epsilon(0.03));
    CHECK(doc["stateCount"] == 101);
    CHECK(doc["monthlyRisk"].size() == 120);
  }

  TEST_CASE("analyze with no compromise probability") {
    Service svc;
    const auto r = svc.analyze(R"({"kind":"LB","threshold":1,"params":{"pComp":0}})");
    REQUIRE(r.status == 200);
    CHECK(body_of(r)["steadyRisk"] == 0.0);
  }

  TEST_CASE("identical requests give identical bodies and hit the memo") {
    Service svc;
    const std::string req = R"({"kind":"JB","threshold":2,"params":{"max":10}})";
    const auto a = svc.analyze(req);
    const auto b = svc.analyze(req);
    CHECK(without_timing(body_of(a)) == without_timing(body_of(b)));
    CHECK(svc.cached_points() == 1);
    // Field order and spelling variants share one entry.
    svc.analyze(R"({"params":{"max":10},"threshold":2,"kind":"jb"})");
    CHECK(svc.cached_points() == 1);
  }

  TEST_CASE("error statuses") {
    ServiceOptions opts;
    opts.build.state_cap = 1000;
    Service svc(opts);
    CHECK(svc.analyze("not json").status == 400);
    CHECK(svc.analyze(R"([1])").status == 400);
    CHECK(svc.analyze(R"({"threshold":1})").status == 400);
    CHECK(svc.analyze(R"({"kind":"ZZ","threshold":1})").status == 400);
    CHECK(svc.analyze(R"({"kind":"LB","threshold":"one"})").status == 400);
    CHECK(svc.analyze(R"({"kind":"LB","threshold":1,"colour":"red"})").status == 400);
    CHECK(svc.analyze(R"({"kind":"LB","threshold":1,"params":{"pComp":"x"}})").status == 400);
    CHECK(svc.analyze(R"({"kind":"MB","threshold":7})").status == 422);
    CHECK(svc.analyze(R"({"kind":"LB","threshold":0})").status == 422);
    CHECK(svc.analyze(R"({"kind":"LB","threshold":1,"params":{"pComp":2}})").status == 422);
    CHECK(svc.analyze(R"({"kind":"LB","threshold":1,"config":{"horizonMonths":0}})").status == 422);
    CHECK(svc.analyze(R"({"kind":"TB","threshold":1})").status == 507);
    const auto solver = svc.analyze(R"({"kind":"LB","threshold":1,"params":{"rJoin":0,"max":3}})");
    CHECK(solver.status == 500);
    for (const auto& r : {svc.analyze("{"), solver})
      CHECK(schema::violations("error.schema.json", body_of(r)).empty());
  }

  TEST_CASE("nonstandard MB threshold when explicitly allowed") {
    Service svc;
    const auto r = svc.analyze(R"({"kind":"MB","threshold":7,"allowNonstandard":true,"params":{"max":5}})");
    CHECK(r.status == 200);
  }

  TEST_CASE("curves for every kind after stabilisation") {
    Service svc;
    const auto r = svc.curves(R"({"kinds":["LB","JB","JLB","TB","MB","HY"],"phases":["after"],"params":{"max":4}})");
    REQUIRE(r.status == 200);
    const auto doc = body_of(r);
    CHECK(schema::violations("curves.schema.json", doc).empty());
    REQUIRE(doc["curves"].size() == 6);
    for (const auto& c : doc["curves"]) {
      CHECK(c["phase"] == "after");
      CHECK(c["points"].size() == 5);
    }
  }

  TEST_CASE("curves for one kind and one threshold") {
    Service svc;
    const auto r = svc.curves(R"({"kinds":["LB"],"thresholds":[1]})");
    REQUIRE(r.status == 200);
    const auto doc = body_of(r);
    REQUIRE(doc["curves"].size() == 2);
    CHECK(doc["curves"][0]["points"].size() == 1);
    const auto per_kind = svc.curves(R"({"kinds":["LB","JB"],"thresholds":{"JB":[2]},"phases":["before"]})");
    REQUIRE(per_kind.status == 200);
    CHECK(body_of(per_kind)["curves"][0]["points"].size() == 5);
    CHECK(body_of(per_kind)["curves"][1]["points"].size() == 1);
  }

  TEST_CASE("curves errors") {
    Service svc;
    CHECK(svc.curves(R"({"kinds":[]})").status == 400);
    CHECK(svc.curves(R"({})").status == 400);
    CHECK(svc.curves(R"({"kinds":["LB"],"phases":["during"]})").status == 400);
    CHECK(svc.curves(R"({"kinds":["MB"],"thresholds":[7]})").status == 422);
  }

  TEST_CASE("streamed points precede the document") {
    Service svc;
    std::vector<std::string> lines;
    const auto r = svc.curves(R"({"kinds":["LB"],"thresholds":[1,2,3],"stream":true,"params":{"max":5}})",
                              [&](const std::string& l) { lines.push_back(l); });
    REQUIRE(r.status == 200);
    REQUIRE(lines.size() == 3);
    for (const auto& l : lines) {
      const auto j = json::parse(l);
      CHECK(j["kind"] == "LB");
      CHECK(j.contains("before"));
      CHECK(j.contains("after"));
      CHECK(j["total"] == 3);
    }
  }
}

TEST_SUITE("service plumbing") {
  TEST_CASE("LRU eviction") {
    SolveCache cache(2);
    auto point = std::make_shared<const SolvedPoint>();
    cache.insert("a", point);
    cache.insert("b", point);
    CHECK(cache.find("a"));
    cache.insert("c", point);
    CHECK(cache.find("a"));
    CHECK_FALSE(cache.find("b"));
    CHECK(cache.find("c"));
    CHECK(cache.size() == 2);
  }

  TEST_CASE("FIFO semaphore bounds concurrency") {
    FifoSemaphore sem(2);
    std::atomic<int> inside{0}, peak{0};
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i)
      threads.emplace_back([&] {
        sem.acquire();
        const int now = ++inside;
        int seen = peak.load();
        while (now > seen && !peak.compare_exchange_weak(seen, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --inside;
        sem.release();
      });
    threads.clear();
    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);
  }

  TEST_CASE("FIFO semaphore admits in arrival order") {
    FifoSemaphore sem(1);
    sem.acquire();
    std::vector<int> order;
    std::mutex m;
    std::vector<std::jthread> threads;
    for (int i = 0; i < 4; ++i) {
      threads.emplace_back([&, i] {
        sem.acquire();
        {
          std::lock_guard lock(m);
          order.push_back(i);
        }
        sem.release();
      });
      // Let each waiter take its ticket before the next one arrives.
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    sem.release();
    threads.clear();
    CHECK(order == std::vector<int>{0, 1, 2, 3});
  }
}

TEST_SUITE("service over HTTP") {
  TEST_CASE("endpoints on a loopback socket") {
    ServiceOptions opts;
    opts.port = 0;
    Service svc(opts);
    const int port = svc.bind();
    REQUIRE(port > 0);
    std::jthread server([&] { svc.listen(); });
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);

    auto strategies = client.Get("/api/strategies");
    REQUIRE(strategies);
    CHECK(strategies->status == 200);
    CHECK(strategies->get_header_value("Content-Type") == "application/json");

    auto analyzed = client.Post("/api/analyze", R"({"kind":"LB","threshold":1})", "application/json");
    REQUIRE(analyzed);
    CHECK(analyzed->status == 200);
    CHECK(json::parse(analyzed->body)["steadyRisk"].get<double>() == doctest::Approx(0.035).epsilon(0.03));

    auto rejected = client.Post("/api/analyze", R"({"kind":"MB","threshold":7})", "application/json");
    REQUIRE(rejected);
    CHECK(rejected->status == 422);

    auto empty = client.Post("/api/curves", R"({"kinds":[]})", "application/json");
    REQUIRE(empty);
    CHECK(empty->status == 400);

    auto streamed =
        client.Post("/api/curves", R"({"kinds":["JB"],"thresholds":[1,2],"stream":true,"params":{"max":5}})",
                    "application/json");
    REQUIRE(streamed);
    CHECK(streamed->status == 200);
    std::istringstream lines(streamed->body);
    std::vector<json> docs;
    for (std::string l; std::getline(lines, l);)
      if (!l.empty()) docs.push_back(json::parse(l));
    REQUIRE(docs.size() == 3);
    CHECK(docs[0].contains("done"));
    CHECK(schema::violations("curves.schema.json", docs.back()).empty());

    svc.stop();
  }
}
