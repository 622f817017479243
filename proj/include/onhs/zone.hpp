#pragma once

#include <string>

#include "onhs/registry.hpp"

namespace onhs {

// Exports the registry as a DNS master-file fragment so the handle domain
// can be served by any standard authoritative server. One A record per live
// IPv4 binding of an Active handle, one TXT record per handle carrying its
// lifecycle state. Output is deterministic for identical state and `now`.
struct ZoneOptions {
    std::int64_t txt_ttl = 3600;
};

std::string export_zone(const Registry& registry, const std::string& origin,
                        Timestamp now, ZoneOptions opts = {});

}  // namespace onhs
