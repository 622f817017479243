#include "onhs/zone.hpp"

#include <algorithm>
#include <sstream>

namespace onhs {
namespace {

struct ZoneRecord {
    std::string owner;
    std::int64_t ttl;
    std::string type;
    std::string rdata;
};

}  // namespace

std::string export_zone(const Registry& registry, const std::string& origin,
                        Timestamp now, ZoneOptions opts) {
    std::vector<ZoneRecord> records;
    for (const auto& rec : registry.all_records()) {
        const std::string handle_owner = format_handle(rec.handle) + "." + origin;

        std::string txt = "state=" + std::string(record_state_name(rec.state)) +
                          " seq=" + std::to_string(rec.seq) +
                          " keydigest=" + rec.handle.digest_hex;
        records.push_back({handle_owner, opts.txt_ttl, "TXT", "\"" + txt + "\""});

        if (rec.state != RecordState::Active) continue;
        for (const auto& [path, binding] : rec.bindings) {
            if (binding.address.kind != AddressKind::IPv4) continue;
            if (!binding.live(now)) continue;
            std::string owner =
                path == "-" ? handle_owner : path + "." + handle_owner;
            records.push_back(
                {owner, binding.ttl_seconds, "A", binding.address.text()});
        }
    }

    std::sort(records.begin(), records.end(), [](const ZoneRecord& a, const ZoneRecord& b) {
        if (a.owner != b.owner) return a.owner < b.owner;
        if (a.type != b.type) return a.type < b.type;
        return a.rdata < b.rdata;
    });

    std::ostringstream out;
    out << "; onhs zone for " << origin << "\n";
    for (const auto& r : records) {
        out << r.owner << ". " << r.ttl << " IN " << r.type << " " << r.rdata << "\n";
    }
    return out.str();
}

}  // namespace onhs
