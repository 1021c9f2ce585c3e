#pragma once

#include <string>
#include <vector>

namespace vulnkg {

enum class CpePart { Application, Os, Hardware };

const char* to_string(CpePart part);
CpePart cpe_part_from_string(const std::string& s);

/// One affected platform, parsed from a CPE 2.3 URI.
/// vendor/product are kept lowercase with underscores as they appear in the URI;
/// version is verbatim and may be a wildcard ("*" or "-").
struct CpeEntry {
    CpePart part = CpePart::Application;
    std::string vendor;
    std::string product;
    std::string version;

    bool operator==(const CpeEntry&) const = default;
};

/// One normalized NVD entry.
struct CveRecord {
    std::string cve_id;                 // CVE-YYYY-NNNN+
    std::string description;            // first English description
    std::vector<std::string> cwe_ids;   // CWE-N, possibly empty
    std::vector<CpeEntry> cpes;
    int year = 0;                       // year component of cve_id
};

/// Items that parse_feed dropped and why.
struct FeedSkipReport {
    int total_items = 0;
    int missing_id = 0;       // no CVE_data_meta.ID or malformed id
    int rejected = 0;         // description starts with "** REJECT **"
    int no_description = 0;   // no non-empty English description

    int skipped() const { return missing_id + rejected + no_description; }
};

bool is_valid_cve_id(const std::string& id);

/// Parses a cpe:2.3 URI. Colon splitting honors backslash escapes; fields are
/// unescaped afterwards. Throws std::runtime_error on a wrong prefix or fewer
/// than six components.
CpeEntry parse_cpe_uri(const std::string& uri);

/// Inverse of parse_cpe_uri for the four stored components (escapes ':' and '\').
std::string cpe_to_uri(const CpeEntry& entry);

/// Parses an NVD JSON 1.1 feed document (top-level CVE_Items array).
/// Malformed JSON throws std::runtime_error carrying the byte offset.
/// Items without a usable id or description are skipped and counted.
std::vector<CveRecord> parse_feed(const std::string& feed_bytes, FeedSkipReport* report = nullptr);

/// Newline-delimited JSON, one record per line.
std::string records_to_ndjson(const std::vector<CveRecord>& records);
std::vector<CveRecord> records_from_ndjson(const std::string& ndjson);

}  // namespace vulnkg
