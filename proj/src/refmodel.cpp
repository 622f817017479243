#include "onhs/refmodel.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <sstream>

#include "onhs/address.hpp"
#include "onhs/hex.hpp"

namespace onhs::refmodel {

Result<Route> parse_route(std::string_view text) {
    Route r;
    if (text.empty()) return r;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t bang = text.find('!', start);
        std::string_view hop = text.substr(
            start, bang == std::string_view::npos ? std::string_view::npos : bang - start);
        if (hop.empty()) {
            return Result<Route>::failure(Err::BadRoute, "empty hop name");
        }
        r.hops.emplace_back(hop);
        if (bang == std::string_view::npos) break;
        start = bang + 1;
    }
    return r;
}

std::string format_route(const Route& r) {
    std::string out;
    for (std::size_t i = 0; i < r.hops.size(); ++i) {
        if (i > 0) out += '!';
        out += r.hops[i];
    }
    return out;
}

Result<Route> concat_routes(const Route& prefix, const Route& suffix) {
    if (prefix.hops.empty()) return suffix;
    if (suffix.hops.empty()) return prefix;
    if (prefix.hops.back() != suffix.hops.front()) {
        return Result<Route>::failure(Err::Discontiguous,
                                      prefix.hops.back() + " != " + suffix.hops.front());
    }
    Route out = prefix;
    out.hops.insert(out.hops.end(), suffix.hops.begin() + 1, suffix.hops.end());
    return out;
}

void Topology::add_router(const std::string& name) { routers.insert(name); }

namespace {
std::pair<std::string, std::string> norm_link(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}
}  // namespace

Result<void> Topology::add_link(const std::string& a, const std::string& b) {
    if (a == b) return Result<void>::failure(Err::BadRequest, "self link at " + a);
    routers.insert(a);
    routers.insert(b);
    links.insert(norm_link(a, b));
    return {};
}

Result<void> Topology::remove_link(const std::string& a, const std::string& b) {
    if (links.erase(norm_link(a, b)) == 0) {
        return Result<void>::failure(Err::BadRequest, "no link " + a + " " + b);
    }
    return {};
}

bool Topology::adjacent(const std::string& a, const std::string& b) const {
    return links.contains(norm_link(a, b));
}

Result<std::string> deliver_by_route(const Topology& t, const std::string& start,
                                     const Route& r) {
    if (r.hops.empty()) return start;
    if (r.hops.front() != start) {
        return Result<std::string>::failure(
            Err::BadRoute, "route starts at " + r.hops.front() + ", not " + start);
    }
    for (std::size_t i = 0; i + 1 < r.hops.size(); ++i) {
        if (!t.adjacent(r.hops[i], r.hops[i + 1])) {
            return Result<std::string>::failure(
                Err::NotAdjacent, r.hops[i] + "!" + r.hops[i + 1],
                static_cast<long>(i));
        }
    }
    return r.hops.back();
}

Result<Address32> Address32::parse(std::string_view text) {
    auto v = parse_dotted_quad(text);
    if (!v) {
        return Result<Address32>::failure(Err::BadAddress, std::string(text));
    }
    return Address32{*v};
}

std::string Address32::text() const { return format_dotted_quad(value); }

Result<ForwardingTable> ForwardingTable::make(std::string owner, std::vector<Range> ranges,
                                              std::optional<std::string> default_hop) {
    std::sort(ranges.begin(), ranges.end(),
              [](const Range& a, const Range& b) { return a.lo < b.lo; });
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        if (ranges[i].hi < ranges[i].lo) {
            return Result<ForwardingTable>::failure(Err::BadRequest, "range hi below lo");
        }
        if (i > 0 && ranges[i].lo <= ranges[i - 1].hi) {
            return Result<ForwardingTable>::failure(
                Err::OverlappingRanges,
                ranges[i - 1].hi.text() + " overlaps " + ranges[i].lo.text());
        }
    }
    ForwardingTable ft;
    ft.owner = std::move(owner);
    ft.ranges = std::move(ranges);
    ft.default_hop = std::move(default_hop);
    return ft;
}

Result<std::string> ForwardingTable::lookup(Address32 a) const {
    for (const auto& r : ranges) {
        if (r.lo <= a && a <= r.hi) return r.next_hop;
    }
    if (default_hop) return *default_hop;
    return Result<std::string>::failure(Err::NoRoute,
                                        "no range or default for " + a.text());
}

Result<Route> route_by_address(const Network& net, const Topology& t,
                               const std::string& start, Address32 dst, int max_hops) {
    using R = Result<Route>;
    auto node = net.find(start);
    if (node == net.end()) return R::failure(Err::NoRoute, "unknown router " + start);

    Route route;
    route.hops.push_back(start);
    std::set<std::string> visited{start};
    std::string current = start;

    for (int hop = 0; hop <= max_hops; ++hop) {
        const RouterNode& rn = net.at(current);
        if (rn.local.contains(dst)) return route;

        auto next = rn.table.lookup(dst);
        if (!next) return next.error();
        if (!t.adjacent(current, next.value())) {
            return R::failure(Err::NoRoute,
                              current + " cannot reach next hop " + next.value());
        }
        if (!net.contains(next.value())) {
            return R::failure(Err::NoRoute, "next hop has no table: " + next.value());
        }
        if (!visited.insert(next.value()).second) {
            return R::failure(Err::Loop, "revisited " + next.value());
        }
        route.hops.push_back(next.value());
        current = next.value();
    }
    return R::failure(Err::HopLimit, "more than " + std::to_string(max_hops) + " hops");
}

Result<TreePlan> spanning_tree_network(const Topology& t, const std::string& root,
                                       Address32 base) {
    using R = Result<TreePlan>;
    if (!t.routers.contains(root)) return R::failure(Err::BadRequest, "unknown root");

    // Breadth-first spanning tree.
    std::map<std::string, std::vector<std::string>> children;
    std::map<std::string, std::string> parent;
    std::deque<std::string> queue{root};
    std::set<std::string> seen{root};
    while (!queue.empty()) {
        std::string cur = queue.front();
        queue.pop_front();
        for (const auto& other : t.routers) {
            if (!seen.contains(other) && t.adjacent(cur, other)) {
                seen.insert(other);
                parent[other] = cur;
                children[cur].push_back(other);
                queue.push_back(other);
            }
        }
    }
    if (seen.size() != t.routers.size()) {
        return R::failure(Err::BadRequest, "topology not connected from root");
    }
    if (t.routers.size() - 1 > UINT32_MAX - base.value) {
        return R::failure(Err::BadRequest, "address block overflow");
    }

    // Depth-first intervals: each router owns [index, index + subtree - 1].
    std::map<std::string, std::uint32_t> index, subtree;
    std::uint32_t counter = 0;
    std::function<std::uint32_t(const std::string&)> assign =
        [&](const std::string& r) -> std::uint32_t {
        index[r] = counter++;
        std::uint32_t size = 1;
        for (const auto& c : children[r]) size += assign(c);
        subtree[r] = size;
        return size;
    };
    assign(root);

    TreePlan plan;
    for (const auto& r : t.routers) {
        plan.router_addr[r] = Address32{base.value + index[r]};
    }
    for (const auto& r : t.routers) {
        std::vector<ForwardingTable::Range> ranges;
        for (const auto& c : children[r]) {
            ranges.push_back({Address32{base.value + index[c]},
                              Address32{base.value + index[c] + subtree[c] - 1}, c});
        }
        std::optional<std::string> def;
        if (auto it = parent.find(r); it != parent.end()) def = it->second;
        auto ft = ForwardingTable::make(r, std::move(ranges), std::move(def));
        if (!ft) return ft.error();
        plan.net[r] = RouterNode{std::move(ft).take(), {plan.router_addr[r]}};
    }
    return plan;
}

Result<Network> host_route_network(const Topology& t,
                                   const std::map<std::string, Address32>& owner_addr) {
    // For each owner, a breadth-first pass gives every reachable router its
    // first hop toward that owner; each address becomes a singleton range.
    std::map<std::string, std::vector<ForwardingTable::Range>> ranges;
    for (const auto& [owner, addr] : owner_addr) {
        if (!t.routers.contains(owner)) {
            return Result<Network>::failure(Err::BadRequest, "unknown host " + owner);
        }
        std::map<std::string, std::string> toward;  // router -> next hop toward owner
        std::deque<std::string> queue{owner};
        std::set<std::string> seen{owner};
        while (!queue.empty()) {
            std::string cur = queue.front();
            queue.pop_front();
            for (const auto& other : t.routers) {
                if (!seen.contains(other) && t.adjacent(cur, other)) {
                    seen.insert(other);
                    toward[other] = cur;
                    queue.push_back(other);
                }
            }
        }
        for (const auto& [router, next] : toward) {
            ranges[router].push_back({addr, addr, next});
        }
    }

    Network net;
    for (const auto& r : t.routers) {
        auto ft = ForwardingTable::make(r, std::move(ranges[r]), std::nullopt);
        if (!ft) return ft.error();
        RouterNode node{std::move(ft).take(), {}};
        for (const auto& [owner, addr] : owner_addr) {
            if (owner == r) node.local.insert(addr);
        }
        net[r] = std::move(node);
    }
    return net;
}

Result<HandleTable::Entry> HandleTable::lookup(const std::string& handle) const {
    auto it = entries.find(handle);
    if (it == entries.end()) {
        return Result<Entry>::failure(Err::UnknownHandle, handle);
    }
    return it->second;
}

void HandleTable::rebind(const std::string& handle, Address32 addr, std::int64_t ttl) {
    entries[handle] = Entry{addr, ttl};
}

Result<CommunityNameTable::Entry> CommunityNameTable::resolve(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) {
        return Result<Entry>::failure(Err::UnknownName, name + " in " + community);
    }
    return it->second;
}

void CommunityNameTable::rebind(const std::string& name, const std::string& handle,
                                std::int64_t ttl) {
    entries[name] = Entry{handle, ttl};
}

Result<TransitiveCacheEntry> compose_cache(const CommunityNameTable& names,
                                           const HandleTable& handles,
                                           const std::string& name, std::int64_t now) {
    auto n = names.resolve(name);
    if (!n) return n.error();
    auto h = handles.lookup(n.value().handle);
    if (!h) return h.error();
    TransitiveCacheEntry entry;
    entry.community = names.community;
    entry.name = name;
    entry.address = h.value().addr;
    entry.ttl = std::min(n.value().ttl, h.value().ttl);
    entry.inserted_at = now;
    return entry;
}

// ---------------------------------------------------------------------------
// Scenario engine

namespace {

Result<std::vector<std::string>> tokenize(const std::string& line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == ' ' || line[i] == '\t') {
            ++i;
            continue;
        }
        if (line[i] == '"') {
            std::size_t close = line.find('"', i + 1);
            if (close == std::string::npos) {
                return Result<std::vector<std::string>>::failure(Err::ScriptError,
                                                                 "unterminated quote");
            }
            tokens.push_back(line.substr(i + 1, close - i - 1));
            i = close + 1;
        } else {
            std::size_t end = line.find_first_of(" \t", i);
            if (end == std::string::npos) end = line.size();
            tokens.push_back(line.substr(i, end - i));
            i = end;
        }
    }
    return tokens;
}

struct Expectation {
    bool is_error = false;
    std::string value;  // expected text, or error code name
    long aux = -1;      // optional @index on errors
};

// Splits trailing "EXPECT x" / "EXPECT-ERROR CODE[@i]" off the token list.
Result<Expectation> take_expectation(std::vector<std::string>& tokens) {
    using R = Result<Expectation>;
    if (tokens.size() >= 2 && tokens[tokens.size() - 2] == "EXPECT") {
        Expectation e;
        e.value = tokens.back();
        tokens.resize(tokens.size() - 2);
        return e;
    }
    if (tokens.size() >= 2 && tokens[tokens.size() - 2] == "EXPECT-ERROR") {
        Expectation e;
        e.is_error = true;
        e.value = tokens.back();
        if (auto at = e.value.find('@'); at != std::string::npos) {
            auto idx = parse_decimal(std::string_view(e.value).substr(at + 1));
            if (!idx) return R::failure(Err::ScriptError, "bad error index");
            e.aux = static_cast<long>(*idx);
            e.value.resize(at);
        }
        Err code;
        if (!err_from_name(e.value, code)) {
            return R::failure(Err::ScriptError, "unknown error code " + e.value);
        }
        tokens.resize(tokens.size() - 2);
        return e;
    }
    return R::failure(Err::ScriptError, "query without EXPECT");
}

struct Engine {
    Topology topo;
    std::map<std::string, Address32> host_addr;
    HandleTable handles;
    std::map<std::string, CommunityNameTable> communities;
    std::optional<Network> net;
    std::map<std::pair<std::string, std::string>, TransitiveCacheEntry> cache;
    std::int64_t now = 0;

    ScenarioOutcome outcome;
    int step = 0;

    void log(const std::string& text) {
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "%04d ", ++step);
        outcome.log.push_back(prefix + text);
    }

    // Records one assertion outcome against the expectation.
    template <typename T>
    void check(const std::string& what, const Result<T>& result, const Expectation& expect,
               const std::function<std::string(const T&)>& show) {
        ++outcome.assertions;
        std::string got;
        bool pass = false;
        if (result.ok()) {
            got = show(result.value());
            pass = !expect.is_error && got == expect.value;
        } else {
            got = result.error().to_string();
            pass = expect.is_error && err_name(result.code()) == expect.value &&
                   (expect.aux < 0 || result.error().aux == expect.aux);
        }
        if (!pass) ++outcome.failures;
        log(what + " -> " + got + (pass ? " [ok]" : " [FAIL expected " +
                                                        std::string(expect.is_error ? "error " : "") +
                                                        expect.value + "]"));
    }

    Result<void> script_error(std::string detail) const {
        return Result<void>::failure(Err::ScriptError, std::move(detail));
    }

    Result<void> event(std::vector<std::string> tokens);
};

Result<void> Engine::event(std::vector<std::string> tokens) {
    const std::string& verb = tokens[0];

    if (verb == "LINK" || verb == "UNLINK") {
        if (tokens.size() != 3) return script_error(verb + " wants 2 arguments");
        if (verb == "LINK") {
            if (auto r = topo.add_link(tokens[1], tokens[2]); !r) {
                return script_error(r.error().detail);
            }
        } else {
            if (auto r = topo.remove_link(tokens[1], tokens[2]); !r) {
                return script_error(r.error().detail);
            }
        }
        log(verb + " " + tokens[1] + " " + tokens[2]);
        return {};
    }

    if (verb == "MOVE") {
        if (tokens.size() != 3) return script_error("MOVE wants host and address");
        if (!topo.routers.contains(tokens[1])) {
            return script_error("unknown host " + tokens[1]);
        }
        auto addr = Address32::parse(tokens[2]);
        if (!addr) return script_error("bad address " + tokens[2]);
        for (const auto& [host, a] : host_addr) {
            if (host != tokens[1] && a == addr.value()) {
                return script_error("address already at " + host);
            }
        }
        host_addr[tokens[1]] = addr.value();
        log("MOVE " + tokens[1] + " " + tokens[2]);
        return {};
    }

    if (verb == "BIND-HANDLE") {
        if (tokens.size() != 3 && tokens.size() != 4) {
            return script_error("BIND-HANDLE wants handle, address, optional ttl");
        }
        auto addr = Address32::parse(tokens[2]);
        if (!addr) return script_error("bad address " + tokens[2]);
        std::int64_t ttl = 300;
        if (tokens.size() == 4) {
            auto t = parse_decimal(tokens[3]);
            if (!t) return script_error("bad ttl");
            ttl = static_cast<std::int64_t>(*t);
        }
        handles.rebind(tokens[1], addr.value(), ttl);
        log("BIND-HANDLE " + tokens[1] + " " + tokens[2]);
        return {};
    }

    if (verb == "BIND-NAME") {
        if (tokens.size() != 4 && tokens.size() != 5) {
            return script_error("BIND-NAME wants community, name, handle, optional ttl");
        }
        std::int64_t ttl = 300;
        if (tokens.size() == 5) {
            auto t = parse_decimal(tokens[4]);
            if (!t) return script_error("bad ttl");
            ttl = static_cast<std::int64_t>(*t);
        }
        auto& table = communities[tokens[1]];
        table.community = tokens[1];
        table.rebind(tokens[2], tokens[3], ttl);
        log("BIND-NAME " + tokens[1] + " \"" + tokens[2] + "\" " + tokens[3]);
        return {};
    }

    if (verb == "AUTOROUTE") {
        auto built = host_route_network(topo, host_addr);
        if (!built) return script_error(built.error().to_string());
        net = std::move(built).take();
        log("AUTOROUTE over " + std::to_string(topo.routers.size()) + " routers");
        return {};
    }

    if (verb == "TICK") {
        if (tokens.size() != 2) return script_error("TICK wants seconds");
        auto t = parse_decimal(tokens[1]);
        if (!t) return script_error("bad tick");
        now += static_cast<std::int64_t>(*t);
        log("TICK " + tokens[1] + " (now " + std::to_string(now) + ")");
        return {};
    }

    auto expect = take_expectation(tokens);
    if (!expect) return expect.error();
    const Expectation& exp = expect.value();

    if (verb == "QUERY-DELIVER") {
        if (tokens.size() != 3) return script_error("QUERY-DELIVER wants start and route");
        auto route = parse_route(tokens[2] == "-" ? "" : tokens[2]);
        if (route) {
            check<std::string>("QUERY-DELIVER " + tokens[1] + " " + tokens[2],
                               deliver_by_route(topo, tokens[1], route.value()), exp,
                               [](const std::string& s) { return s; });
        } else {
            check<std::string>("QUERY-DELIVER " + tokens[1] + " " + tokens[2],
                               Result<std::string>(route.error()), exp,
                               [](const std::string& s) { return s; });
        }
        return {};
    }

    if (verb == "QUERY-CONCAT") {
        if (tokens.size() != 3) return script_error("QUERY-CONCAT wants two routes");
        auto r1 = parse_route(tokens[1] == "-" ? "" : tokens[1]);
        auto r2 = parse_route(tokens[2] == "-" ? "" : tokens[2]);
        Result<Route> joined = !r1   ? Result<Route>(r1.error())
                               : !r2 ? Result<Route>(r2.error())
                                     : concat_routes(r1.value(), r2.value());
        check<Route>("QUERY-CONCAT " + tokens[1] + " " + tokens[2], joined, exp,
                     [](const Route& r) { return format_route(r); });
        return {};
    }

    if (verb == "QUERY-ADDR") {
        if (tokens.size() != 3) return script_error("QUERY-ADDR wants start and address");
        if (!net) return script_error("no network built; AUTOROUTE first");
        auto addr = Address32::parse(tokens[2]);
        if (!addr) return script_error("bad address " + tokens[2]);
        auto route = route_by_address(*net, topo, tokens[1], addr.value());
        Result<std::string> reached =
            route ? Result<std::string>(route.value().hops.back())
                  : Result<std::string>(route.error());
        check<std::string>("QUERY-ADDR " + tokens[1] + " " + tokens[2], reached, exp,
                           [](const std::string& s) { return s; });
        return {};
    }

    if (verb == "QUERY-HANDLE") {
        if (tokens.size() != 2) return script_error("QUERY-HANDLE wants a handle");
        check<HandleTable::Entry>(
            "QUERY-HANDLE " + tokens[1], handles.lookup(tokens[1]), exp,
            [](const HandleTable::Entry& e) { return e.addr.text(); });
        return {};
    }

    if (verb == "QUERY-NAME") {
        if (tokens.size() != 3) return script_error("QUERY-NAME wants community and name");
        auto it = communities.find(tokens[1]);
        Result<CommunityNameTable::Entry> entry =
            it == communities.end()
                ? Result<CommunityNameTable::Entry>::failure(Err::UnknownName,
                                                             "no community " + tokens[1])
                : it->second.resolve(tokens[2]);
        check<CommunityNameTable::Entry>(
            "QUERY-NAME " + tokens[1] + " \"" + tokens[2] + "\"", entry, exp,
            [](const CommunityNameTable::Entry& e) { return e.handle; });
        return {};
    }

    if (verb == "QUERY-COMPOSED") {
        if (tokens.size() != 3) {
            return script_error("QUERY-COMPOSED wants community and name");
        }
        auto key = std::make_pair(tokens[1], tokens[2]);
        std::string via = "composed";
        Result<TransitiveCacheEntry> entry = [&]() -> Result<TransitiveCacheEntry> {
            if (auto it = cache.find(key); it != cache.end() && it->second.live(now)) {
                via = "cached";
                return it->second;
            }
            auto it = communities.find(tokens[1]);
            if (it == communities.end()) {
                return Result<TransitiveCacheEntry>::failure(Err::UnknownName,
                                                             "no community " + tokens[1]);
            }
            auto fresh = compose_cache(it->second, handles, tokens[2], now);
            if (fresh) cache[key] = fresh.value();
            return fresh;
        }();
        check<TransitiveCacheEntry>(
            "QUERY-COMPOSED " + tokens[1] + " \"" + tokens[2] + "\" (" + via + ")", entry,
            exp, [](const TransitiveCacheEntry& e) { return e.address.text(); });
        return {};
    }

    return script_error("unknown event " + verb);
}

}  // namespace

Result<ScenarioOutcome> run_scenario(std::istream& in) {
    Engine engine;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto tokens = tokenize(line);
        if (!tokens) {
            return Result<ScenarioOutcome>::failure(
                Err::ScriptError, "line " + std::to_string(lineno) + ": " +
                                      tokens.error().detail);
        }
        if (tokens.value().empty() || tokens.value()[0].starts_with("#")) continue;
        if (auto r = engine.event(std::move(tokens).take()); !r) {
            return Result<ScenarioOutcome>::failure(
                Err::ScriptError,
                "line " + std::to_string(lineno) + ": " + r.error().detail);
        }
    }
    return engine.outcome;
}

Result<ScenarioOutcome> run_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        return Result<ScenarioOutcome>::failure(Err::IoError, "cannot open " + path);
    }
    return run_scenario(in);
}

}  // namespace onhs::refmodel
