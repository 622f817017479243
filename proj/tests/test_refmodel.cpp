#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <deque>
#include <random>
#include <sstream>

#include "onhs/refmodel.hpp"

using namespace onhs;
using namespace onhs::refmodel;

namespace {

// Independent reachability oracle: plain breadth-first search over the
// topology, no forwarding tables involved.
std::optional<std::vector<std::string>> bfs_path(const Topology& t,
                                                 const std::string& from,
                                                 const std::string& to) {
    std::map<std::string, std::string> parent;
    std::deque<std::string> queue{from};
    std::set<std::string> seen{from};
    while (!queue.empty()) {
        std::string cur = queue.front();
        queue.pop_front();
        if (cur == to) {
            std::vector<std::string> path{to};
            while (path.back() != from) path.push_back(parent[path.back()]);
            std::reverse(path.begin(), path.end());
            return path;
        }
        for (const auto& other : t.routers) {
            if (!seen.contains(other) && t.adjacent(cur, other)) {
                seen.insert(other);
                parent[other] = cur;
                queue.push_back(other);
            }
        }
    }
    return std::nullopt;
}

Topology random_connected_topology(std::mt19937_64& gen, int n) {
    Topology t;
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("r" + std::to_string(i));
    // random spanning tree first, then extra chords
    for (int i = 1; i < n; ++i) {
        REQUIRE(t.add_link(names[i], names[gen() % i]).ok());
    }
    for (int i = 0; i < n / 2; ++i) {
        auto a = names[gen() % names.size()];
        auto b = names[gen() % names.size()];
        if (a != b) (void)t.add_link(a, b);
    }
    return t;
}

}  // namespace

TEST_CASE("routes parse and format as bang paths") {
    auto r = parse_route("gargoyle!relay1!grampa");
    REQUIRE(r.ok());
    CHECK(r.value().hops == std::vector<std::string>{"gargoyle", "relay1", "grampa"});
    CHECK(format_route(r.value()) == "gargoyle!relay1!grampa");

    auto empty = parse_route("");
    REQUIRE(empty.ok());
    CHECK(empty.value().hops.empty());
    CHECK(format_route(empty.value()).empty());

    CHECK(parse_route("a!!b").code() == Err::BadRoute);
    CHECK(parse_route("!a").code() == Err::BadRoute);
    CHECK(parse_route("a!").code() == Err::BadRoute);

    for (const char* text : {"a", "a!b", "one!two!three!four"}) {
        CHECK(format_route(parse_route(text).value()) == text);
    }
}

TEST_CASE("route concatenation joins at the shared host") {
    Route sally = parse_route("foghorn!gargoyle").take();
    Route candy = parse_route("gargoyle!relay1!grampa").take();
    auto joined = concat_routes(sally, candy);
    REQUIRE(joined.ok());
    CHECK(format_route(joined.value()) == "foghorn!gargoyle!relay1!grampa");

    CHECK(concat_routes(Route{}, candy).value() == candy);
    CHECK(concat_routes(candy, Route{}).value() == candy);

    Route ab = parse_route("a!b").take();
    Route cd = parse_route("c!d").take();
    CHECK(concat_routes(ab, cd).code() == Err::Discontiguous);
}

TEST_CASE("delivery walks live links and reports the broken hop") {
    Topology t;
    REQUIRE(t.add_link("a", "b").ok());
    REQUIRE(t.add_link("b", "c").ok());

    Route route = parse_route("a!b!c").take();
    CHECK(deliver_by_route(t, "a", route).value() == "c");
    CHECK(deliver_by_route(t, "a", Route{}).value() == "a");

    REQUIRE(t.remove_link("b", "c").ok());
    auto broken = deliver_by_route(t, "a", route);
    CHECK(broken.code() == Err::NotAdjacent);
    CHECK(broken.error().aux == 1);

    // a route token only works from its own start
    CHECK(deliver_by_route(t, "b", route).code() == Err::BadRoute);

    CHECK_FALSE(t.remove_link("b", "c").ok());
    CHECK_FALSE(t.add_link("a", "a").ok());
}

TEST_CASE("forwarding tables partition the address space") {
    auto lo = Address32::parse("0.0.0.0").take();
    auto mid = Address32::parse("127.255.255.255").take();
    auto ft = ForwardingTable::make("owner", {{lo, mid, "left"}}, "right");
    REQUIRE(ft.ok());

    CHECK(ft.value().lookup(Address32::parse("5.0.0.1").take()).value() == "left");
    CHECK(ft.value().lookup(Address32::parse("200.0.0.1").take()).value() == "right");
    // hi bound is inclusive
    CHECK(ft.value().lookup(mid).value() == "left");
    CHECK(ft.value().lookup(Address32::parse("128.0.0.0").take()).value() == "right");

    auto no_default = ForwardingTable::make("owner", {{lo, mid, "left"}}, std::nullopt);
    CHECK(no_default.value().lookup(Address32::parse("200.0.0.1").take()).code() ==
          Err::NoRoute);

    auto overlapping = ForwardingTable::make(
        "owner",
        {{lo, mid, "left"},
         {Address32::parse("100.0.0.0").take(), Address32::parse("130.0.0.0").take(),
          "elsewhere"}},
        std::nullopt);
    CHECK(overlapping.code() == Err::OverlappingRanges);

    CHECK(Address32::parse("1.2.3.4").value().text() == "1.2.3.4");
    CHECK(Address32::parse("256.0.0.1").code() == Err::BadAddress);
    CHECK(Address32::parse("1.2.3").code() == Err::BadAddress);
    CHECK(Address32::parse("01.2.3.4").code() == Err::BadAddress);
}

TEST_CASE("hop-by-hop address resolution follows the tables") {
    Topology t;
    REQUIRE(t.add_link("a", "b").ok());
    REQUIRE(t.add_link("b", "c").ok());
    auto addr = [](const char* s) { return Address32::parse(s).take(); };

    Network net;
    net["a"] = {ForwardingTable::make("a", {}, "b").take(), {addr("10.0.0.1")}};
    net["b"] = {ForwardingTable::make("b", {{addr("10.0.0.3"), addr("10.0.0.3"), "c"},
                                            {addr("10.0.0.1"), addr("10.0.0.1"), "a"}},
                                      std::nullopt)
                    .take(),
                {addr("10.0.0.2")}};
    net["c"] = {ForwardingTable::make("c", {}, "b").take(), {addr("10.0.0.3")}};

    auto route = route_by_address(net, t, "a", addr("10.0.0.3"));
    REQUIRE(route.ok());
    CHECK(format_route(route.value()) == "a!b!c");
    CHECK(deliver_by_route(t, "a", route.value()).value() == "c");

    // destination local to the start yields the degenerate route
    CHECK(route_by_address(net, t, "a", addr("10.0.0.1")).value().hops ==
          std::vector<std::string>{"a"});

    // two tables pointing at each other loop
    Network looped = net;
    looped["a"].table = ForwardingTable::make("a", {}, "b").take();
    looped["b"].table = ForwardingTable::make("b", {}, "a").take();
    CHECK(route_by_address(looped, t, "a", addr("10.9.9.9")).code() == Err::Loop);

    CHECK(route_by_address(net, t, "nowhere", addr("10.0.0.3")).code() == Err::NoRoute);
}

TEST_CASE("spanning tree networks match the breadth-first oracle") {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 10; ++trial) {
        Topology t = random_connected_topology(gen, 12);
        auto plan = spanning_tree_network(t, "r0", Address32::parse("10.0.0.0").take());
        REQUIRE(plan.ok());

        for (const auto& start : t.routers) {
            for (const auto& [owner, addr] : plan.value().router_addr) {
                auto route = route_by_address(plan.value().net, t, start, addr, 64);
                REQUIRE(route.ok());
                CHECK(route.value().hops.back() == owner);
                CHECK(deliver_by_route(t, start, route.value()).value() == owner);
                // the oracle agrees the owner is reachable at all
                CHECK(bfs_path(t, start, owner).has_value());
            }
        }
    }
}

TEST_CASE("disconnected topologies fail construction and the oracle agrees") {
    Topology t;
    REQUIRE(t.add_link("a", "b").ok());
    REQUIRE(t.add_link("c", "d").ok());
    CHECK_FALSE(spanning_tree_network(t, "a", Address32::parse("10.0.0.0").take()).ok());
    CHECK_FALSE(bfs_path(t, "a", "c").has_value());

    // host routes simply omit unreachable destinations
    std::map<std::string, Address32> owners{
        {"a", Address32::parse("10.0.0.1").take()},
        {"c", Address32::parse("10.0.0.2").take()},
    };
    auto net = host_route_network(t, owners);
    REQUIRE(net.ok());
    CHECK(route_by_address(net.value(), t, "b", owners["a"]).ok());
    CHECK(route_by_address(net.value(), t, "b", owners["c"]).code() == Err::NoRoute);
}

TEST_CASE("name resolution is a community matter; handles are global") {
    HandleTable handles;
    handles.rebind("h0061A38F9A3540B9", Address32::parse("10.0.0.3").take());

    CommunityNameTable friends;
    friends.community = "friends-of-sally";
    friends.rebind("My favorite candy store", "h0061A38F9A3540B9");

    CommunityNameTable rivals;
    rivals.community = "candy-rivals";
    rivals.rebind("My favorite candy store", "h00B16C049000C09D");

    CHECK(friends.resolve("My favorite candy store").value().handle ==
          "h0061A38F9A3540B9");
    CHECK(rivals.resolve("My favorite candy store").value().handle ==
          "h00B16C049000C09D");
    CHECK(friends.resolve("unknown shop").code() == Err::UnknownName);
    CHECK(handles.lookup("h00DEADBEEF").code() == Err::UnknownHandle);
}

TEST_CASE("rebinding one layer leaves the others alone") {
    HandleTable handles;
    CommunityNameTable names;
    names.community = "web";
    handles.rebind("hG", Address32::parse("10.0.0.3").take());
    names.rebind("ydnac", "hG");

    // the name is captured; the handle still resolves to Grampa
    names.rebind("ydnac", "hBigCorp");
    CHECK(names.resolve("ydnac").value().handle == "hBigCorp");
    CHECK(handles.lookup("hG").value().addr.text() == "10.0.0.3");

    // the handle moves three times; the name binding never changes
    for (const char* a : {"10.0.1.1", "10.0.2.2", "10.0.3.3"}) {
        handles.rebind("hG", Address32::parse(a).take());
        CHECK(names.resolve("ydnac").value().handle == "hBigCorp");
        CHECK(handles.lookup("hG").value().addr.text() == a);
    }

    // rebinding to the identical value changes nothing observable
    auto before = handles.lookup("hG").value().addr;
    handles.rebind("hG", before);
    CHECK(handles.lookup("hG").value().addr == before);
}

TEST_CASE("transitive cache entries take the minimum ttl") {
    HandleTable handles;
    CommunityNameTable names;
    names.community = "web";
    handles.rebind("hG", Address32::parse("10.0.0.3").take(), 60);
    names.rebind("ydnac", "hG", 300);

    auto entry = compose_cache(names, handles, "ydnac", 1000);
    REQUIRE(entry.ok());
    CHECK(entry.value().ttl == 60);
    CHECK(entry.value().address.text() == "10.0.0.3");
    CHECK(entry.value().live(1059));
    CHECK_FALSE(entry.value().live(1060));

    // after expiry, recomposition sees the rebinding made meanwhile
    handles.rebind("hG", Address32::parse("10.0.9.9").take(), 60);
    auto fresh = compose_cache(names, handles, "ydnac", 1060);
    REQUIRE(fresh.ok());
    CHECK(fresh.value().address.text() == "10.0.9.9");

    CHECK(compose_cache(names, handles, "nope", 0).code() == Err::UnknownName);
    names.rebind("dangling", "hNobody");
    CHECK(compose_cache(names, handles, "dangling", 0).code() == Err::UnknownHandle);
}

TEST_CASE("layer variance: routes vary with start, handles do not") {
    std::mt19937_64 gen(5150);
    Topology t = random_connected_topology(gen, 10);
    auto plan = spanning_tree_network(t, "r0", Address32::parse("10.1.0.0").take());
    REQUIRE(plan.ok());

    // address resolution produces different routes from different starts
    Address32 dst = plan.value().router_addr.at("r5");
    auto from_a = route_by_address(plan.value().net, t, "r1", dst, 64).take();
    auto from_b = route_by_address(plan.value().net, t, "r9", dst, 64).take();
    CHECK(from_a.hops.front() != from_b.hops.front());
    CHECK(from_a.hops.back() == from_b.hops.back());

    // handle resolution is one global table: same answer regardless of
    // "where" or "for whom" the query happens
    HandleTable handles;
    handles.rebind("hX", dst);
    auto first = handles.lookup("hX").value().addr;
    for (int i = 0; i < 5; ++i) CHECK(handles.lookup("hX").value().addr == first);
}

TEST_CASE("bundled pseudohistory scripts pass") {
    for (const char* name :
         {"route-sharing", "topology-break", "address-mobility", "name-capture"}) {
        auto outcome = run_scenario_file(std::string(ONHS_SCENARIO_DIR) + "/" + name +
                                         ".txt");
        REQUIRE_MESSAGE(outcome.ok(), name << ": " << outcome.error().to_string());
        INFO(name);
        for (const auto& line : outcome.value().log) INFO(line);
        CHECK(outcome.value().passed());
        CHECK(outcome.value().assertions > 0);
    }
}

TEST_CASE("scenario engine details") {
    {
        std::istringstream empty("");
        auto outcome = run_scenario(empty);
        REQUIRE(outcome.ok());
        CHECK(outcome.value().passed());
        CHECK(outcome.value().assertions == 0);
        CHECK(outcome.value().log.empty());
    }
    {
        std::istringstream bad("FROBNICATE a b\n");
        CHECK(run_scenario(bad).code() == Err::ScriptError);
    }
    {
        std::istringstream bad("MOVE ghost 10.0.0.1\n");
        CHECK(run_scenario(bad).code() == Err::ScriptError);
    }
    {
        std::istringstream bad("BIND-NAME c \"unterminated h\n");
        CHECK(run_scenario(bad).code() == Err::ScriptError);
    }
    {
        // failed expectations are counted, not fatal
        std::istringstream failing(
            "LINK a b\nQUERY-DELIVER a a!b EXPECT c\nQUERY-DELIVER a a!b EXPECT b\n");
        auto outcome = run_scenario(failing);
        REQUIRE(outcome.ok());
        CHECK(outcome.value().assertions == 2);
        CHECK(outcome.value().failures == 1);
        CHECK_FALSE(outcome.value().passed());
    }
    {
        // step counters prefix every log line
        std::istringstream s("LINK a b\nTICK 5\n");
        auto outcome = run_scenario(s).take();
        REQUIRE(outcome.log.size() == 2);
        CHECK(outcome.log[0].starts_with("0001 LINK"));
        CHECK(outcome.log[1].starts_with("0002 TICK"));
    }
    {
        // composed queries hit the cache within ttl and recompose after
        std::istringstream s(
            "LINK a b\n"
            "BIND-HANDLE hX 10.0.0.9 60\n"
            "BIND-NAME c shop hX 300\n"
            "QUERY-COMPOSED c shop EXPECT 10.0.0.9\n"
            "BIND-HANDLE hX 10.0.0.8 60\n"
            "QUERY-COMPOSED c shop EXPECT 10.0.0.9\n"  // cached within ttl
            "TICK 60\n"
            "QUERY-COMPOSED c shop EXPECT 10.0.0.8\n");  // recomposed
        auto outcome = run_scenario(s);
        REQUIRE(outcome.ok());
        CHECK(outcome.value().passed());
    }
}
