#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "onhs/error.hpp"

namespace onhs::refmodel {

// Executable model of the four reference layers: routes, addresses, handles,
// names. Everything here is deterministic and single-threaded; it exists to
// make the layering arguments runnable.

// A source route: the full hop sequence, written host1!host2!...!hostn.
struct Route {
    std::vector<std::string> hops;

    friend bool operator==(const Route&, const Route&) = default;
};

Result<Route> parse_route(std::string_view text);
std::string format_route(const Route& r);

// Joins two routes at their shared host (prefix end == suffix start); the
// shared hop appears once in the result. Either side may be empty.
Result<Route> concat_routes(const Route& prefix, const Route& suffix);

struct Topology {
    std::set<std::string> routers;
    std::set<std::pair<std::string, std::string>> links;  // stored with first < second

    void add_router(const std::string& name);
    Result<void> add_link(const std::string& a, const std::string& b);
    Result<void> remove_link(const std::string& a, const std::string& b);
    bool adjacent(const std::string& a, const std::string& b) const;
};

// Walks the route hop by hop; every consecutive pair must be a live link.
// Fails with Err::NotAdjacent carrying the 0-based index of the broken pair.
// An empty route delivers to the start.
Result<std::string> deliver_by_route(const Topology& t, const std::string& start,
                                     const Route& r);

// 32-bit address with the dotted-quad text form.
struct Address32 {
    std::uint32_t value = 0;

    static Result<Address32> parse(std::string_view text);
    std::string text() const;

    auto operator<=>(const Address32&) const = default;
};

// Range-based forwarding: disjoint inclusive ranges mapped to next hops,
// plus an optional default direction.
struct ForwardingTable {
    struct Range {
        Address32 lo, hi;
        std::string next_hop;
    };

    std::string owner;
    std::vector<Range> ranges;
    std::optional<std::string> default_hop;

    static Result<ForwardingTable> make(std::string owner, std::vector<Range> ranges,
                                        std::optional<std::string> default_hop);
    Result<std::string> lookup(Address32 a) const;
};

struct RouterNode {
    ForwardingTable table;
    std::set<Address32> local;  // addresses terminating at this router
};

using Network = std::map<std::string, RouterNode>;

// Hop-by-hop trace of address resolution interleaved with delivery: follows
// each router's forwarding decision until the address is local. The returned
// route replays through deliver_by_route to the same router.
Result<Route> route_by_address(const Network& net, const Topology& t,
                               const std::string& start, Address32 dst,
                               int max_hops = 32);

// Spanning-tree network construction: assigns each router one address from a
// contiguous block (subtree intervals under `base`) and builds consistent
// range tables pointing down the tree, default pointing up. The topology
// must be connected from `root`.
struct TreePlan {
    Network net;
    std::map<std::string, Address32> router_addr;
};

Result<TreePlan> spanning_tree_network(const Topology& t, const std::string& root,
                                       Address32 base);

// Host-route network construction: one singleton range per known address,
// forwarding along shortest paths of the current topology. Used by the
// scenario engine where addresses are arbitrary.
Result<Network> host_route_network(const Topology& t,
                                   const std::map<std::string, Address32>& owner_addr);

// The handle layer: one global table, owner-updatable, context-free.
struct HandleTable {
    struct Entry {
        Address32 addr;
        std::int64_t ttl = 300;
    };
    std::map<std::string, Entry> entries;

    Result<Entry> lookup(const std::string& handle) const;  // Err::UnknownHandle
    void rebind(const std::string& handle, Address32 addr, std::int64_t ttl = 300);
};

// The name layer: per-community tables; the same name may resolve
// differently in different communities.
struct CommunityNameTable {
    std::string community;
    struct Entry {
        std::string handle;
        std::int64_t ttl = 300;
    };
    std::map<std::string, Entry> entries;

    Result<Entry> resolve(const std::string& name) const;  // Err::UnknownName
    void rebind(const std::string& name, const std::string& handle,
                std::int64_t ttl = 300);
};

// A composed name-to-address cache entry; ttl is the minimum of the
// component ttls, so the shortcut never outlives either constituent.
struct TransitiveCacheEntry {
    std::string community;
    std::string name;
    Address32 address;
    std::int64_t ttl = 0;
    std::int64_t inserted_at = 0;

    bool live(std::int64_t now) const { return now < inserted_at + ttl; }
};

Result<TransitiveCacheEntry> compose_cache(const CommunityNameTable& names,
                                           const HandleTable& handles,
                                           const std::string& name, std::int64_t now);

// Scenario engine. Scripts are line-oriented: one event per line, fields
// whitespace-separated with double quotes for names containing spaces, '#'
// starts a comment. Events:
//   LINK a b | UNLINK a b | MOVE host n1.n2.n3.n4
//   BIND-HANDLE h addr [ttl] | BIND-NAME community name h [ttl]
//   AUTOROUTE | TICK seconds
//   QUERY-DELIVER start route EXPECT router
//   QUERY-CONCAT r1 r2 EXPECT r3
//   QUERY-ADDR start addr EXPECT router
//   QUERY-HANDLE h EXPECT addr
//   QUERY-NAME community name EXPECT h
//   QUERY-COMPOSED community name EXPECT addr
// Every EXPECT may instead be EXPECT-ERROR CODE or EXPECT-ERROR CODE@index.
// Routes in queries use bang syntax; "-" is the empty route.
struct ScenarioOutcome {
    std::vector<std::string> log;  // step-numbered event log
    int assertions = 0;
    int failures = 0;

    bool passed() const { return failures == 0; }
};

Result<ScenarioOutcome> run_scenario(std::istream& in);
Result<ScenarioOutcome> run_scenario_file(const std::string& path);

}  // namespace onhs::refmodel
