#include "vulnkg/nvd_ingest.hpp"

#include <json.hpp>

#include <stdexcept>

#include "vulnkg/util.hpp"

namespace vulnkg {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(CpePart part) {
    switch (part) {
        case CpePart::Application: return "application";
        case CpePart::Os: return "os";
        case CpePart::Hardware: return "hardware";
    }
    return "application";
}

CpePart cpe_part_from_string(const std::string& s) {
    if (s == "application") return CpePart::Application;
    if (s == "os") return CpePart::Os;
    if (s == "hardware") return CpePart::Hardware;
    throw std::runtime_error("unknown CPE part: " + s);
}

bool is_valid_cve_id(const std::string& id) {
    // CVE-\d{4}-\d{4,}
    if (!starts_with(id, "CVE-")) return false;
    size_t i = 4;
    for (int k = 0; k < 4; ++k, ++i) {
        if (i >= id.size() || !isdigit(static_cast<unsigned char>(id[i]))) return false;
    }
    if (i >= id.size() || id[i] != '-') return false;
    ++i;
    size_t digits = 0;
    for (; i < id.size(); ++i, ++digits) {
        if (!isdigit(static_cast<unsigned char>(id[i]))) return false;
    }
    return digits >= 4;
}

namespace {

// Splits a CPE URI on unescaped colons, then removes the backslash escapes.
std::vector<std::string> split_cpe_components(const std::string& uri) {
    std::vector<std::string> parts;
    std::string cur;
    for (size_t i = 0; i < uri.size(); ++i) {
        char c = uri[i];
        if (c == '\\' && i + 1 < uri.size()) {
            cur += uri[i + 1];
            ++i;
        } else if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string escape_cpe_component(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == ':' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace

CpeEntry parse_cpe_uri(const std::string& uri) {
    if (!starts_with(uri, "cpe:2.3:")) {
        throw std::runtime_error("not a cpe:2.3 URI: " + uri);
    }
    std::vector<std::string> parts = split_cpe_components(uri);
    if (parts.size() < 6) {
        throw std::runtime_error("cpe:2.3 URI has fewer than 6 components: " + uri);
    }
    const std::string& part = parts[2];
    CpeEntry entry;
    if (part == "a") entry.part = CpePart::Application;
    else if (part == "o") entry.part = CpePart::Os;
    else if (part == "h") entry.part = CpePart::Hardware;
    else throw std::runtime_error("unknown part component '" + part + "' in " + uri);
    entry.vendor = to_lower(parts[3]);
    entry.product = to_lower(parts[4]);
    entry.version = parts[5];
    return entry;
}

std::string cpe_to_uri(const CpeEntry& entry) {
    const char* part = entry.part == CpePart::Application ? "a"
                     : entry.part == CpePart::Os          ? "o"
                                                          : "h";
    return std::string("cpe:2.3:") + part + ":" + escape_cpe_component(entry.vendor) + ":" +
           escape_cpe_component(entry.product) + ":" + escape_cpe_component(entry.version);
}

namespace {

void collect_cpes_from_node(const json& node, std::vector<CpeEntry>& out) {
    if (node.contains("cpe_match") && node["cpe_match"].is_array()) {
        for (const auto& m : node["cpe_match"]) {
            if (m.contains("cpe23Uri") && m["cpe23Uri"].is_string()) {
                out.push_back(parse_cpe_uri(m["cpe23Uri"].get<std::string>()));
            }
        }
    }
    if (node.contains("children") && node["children"].is_array()) {
        for (const auto& child : node["children"]) collect_cpes_from_node(child, out);
    }
}

std::string select_english_description(const json& cve) {
    if (!cve.contains("description")) return "";
    const json& d = cve["description"];
    if (!d.contains("description_data") || !d["description_data"].is_array()) return "";
    for (const auto& entry : d["description_data"]) {
        if (entry.value("lang", "") == "en") {
            return entry.value("value", "");
        }
    }
    return "";
}

std::vector<std::string> collect_cwe_ids(const json& cve) {
    std::vector<std::string> out;
    if (!cve.contains("problemtype")) return out;
    const json& pt = cve["problemtype"];
    if (!pt.contains("problemtype_data") || !pt["problemtype_data"].is_array()) return out;
    for (const auto& ptd : pt["problemtype_data"]) {
        if (!ptd.contains("description") || !ptd["description"].is_array()) continue;
        for (const auto& desc : ptd["description"]) {
            std::string value = desc.value("value", "");
            // NVD also emits NVD-CWE-noinfo / NVD-CWE-Other; keep CWE-N only.
            if (starts_with(value, "CWE-") && value.size() > 4 &&
                value.find_first_not_of("0123456789", 4) == std::string::npos) {
                out.push_back(value);
            }
        }
    }
    return out;
}

}  // namespace

std::vector<CveRecord> parse_feed(const std::string& feed_bytes, FeedSkipReport* report) {
    json doc;
    try {
        doc = json::parse(feed_bytes);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("feed parse error at byte " + std::to_string(e.byte) + ": " +
                                 e.what());
    }

    FeedSkipReport local;
    FeedSkipReport& stats = report ? *report : local;

    std::vector<CveRecord> records;
    if (!doc.contains("CVE_Items") || !doc["CVE_Items"].is_array()) {
        throw std::runtime_error("feed has no CVE_Items array");
    }
    for (const auto& item : doc["CVE_Items"]) {
        ++stats.total_items;
        if (!item.contains("cve")) {
            ++stats.missing_id;
            continue;
        }
        const json& cve = item["cve"];
        std::string id;
        if (cve.contains("CVE_data_meta") && cve["CVE_data_meta"].contains("ID")) {
            id = cve["CVE_data_meta"]["ID"].get<std::string>();
        }
        if (!is_valid_cve_id(id)) {
            ++stats.missing_id;
            continue;
        }
        std::string description = select_english_description(cve);
        if (description.empty()) {
            ++stats.no_description;
            continue;
        }
        if (starts_with(description, "** REJECT **")) {
            ++stats.rejected;
            continue;
        }

        CveRecord record;
        record.cve_id = id;
        record.description = description;
        record.year = std::stoi(id.substr(4, 4));
        record.cwe_ids = collect_cwe_ids(cve);
        if (item.contains("configurations") && item["configurations"].contains("nodes") &&
            item["configurations"]["nodes"].is_array()) {
            for (const auto& node : item["configurations"]["nodes"]) {
                collect_cpes_from_node(node, record.cpes);
            }
        }
        records.push_back(std::move(record));
    }
    return records;
}

namespace {

ordered_json record_to_json(const CveRecord& r) {
    ordered_json j;
    j["cve_id"] = r.cve_id;
    j["description"] = r.description;
    j["cwe_ids"] = r.cwe_ids;
    ordered_json cpes = ordered_json::array();
    for (const auto& c : r.cpes) {
        ordered_json jc;
        jc["part"] = to_string(c.part);
        jc["vendor"] = c.vendor;
        jc["product"] = c.product;
        jc["version"] = c.version;
        cpes.push_back(std::move(jc));
    }
    j["cpes"] = std::move(cpes);
    j["year"] = r.year;
    return j;
}

CveRecord record_from_json(const json& j) {
    CveRecord r;
    r.cve_id = j.at("cve_id").get<std::string>();
    r.description = j.at("description").get<std::string>();
    r.cwe_ids = j.at("cwe_ids").get<std::vector<std::string>>();
    for (const auto& jc : j.at("cpes")) {
        CpeEntry c;
        c.part = cpe_part_from_string(jc.at("part").get<std::string>());
        c.vendor = jc.at("vendor").get<std::string>();
        c.product = jc.at("product").get<std::string>();
        c.version = jc.at("version").get<std::string>();
        r.cpes.push_back(std::move(c));
    }
    r.year = j.at("year").get<int>();
    return r;
}

}  // namespace

std::string records_to_ndjson(const std::vector<CveRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

std::vector<CveRecord> records_from_ndjson(const std::string& ndjson) {
    std::vector<CveRecord> records;
    size_t pos = 0;
    while (pos < ndjson.size()) {
        size_t end = ndjson.find('\n', pos);
        if (end == std::string::npos) end = ndjson.size();
        if (end > pos) {
            records.push_back(record_from_json(json::parse(ndjson.substr(pos, end - pos))));
        }
        pos = end + 1;
    }
    return records;
}

}  // namespace vulnkg
