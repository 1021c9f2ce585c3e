#include "feedgen.hpp"

#include <json.hpp>

#include <random>
#include <vector>

namespace vulnkg::testsupport {

namespace {

using nlohmann::json;

struct VendorEntry {
    const char* vendor;
    std::vector<const char*> products;
};

const std::vector<VendorEntry>& vendor_table() {
    static const std::vector<VendorEntry> table = {
        {"apache", {"http_server", "tomcat", "struts", "log4j", "kafka", "airflow"}},
        {"microsoft", {"windows_10", "exchange_server", "sharepoint_server", "edge", "office"}},
        {"oracle", {"mysql", "weblogic_server", "database_server", "vm_virtualbox"}},
        {"ibm", {"websphere_application_server", "db2", "qradar"}},
        {"google", {"chrome", "android", "tensorflow"}},
        {"mozilla", {"firefox", "thunderbird"}},
        {"wordpress", {"wordpress"}},
        {"drupal", {"drupal"}},
        {"joomla", {"joomla"}},
        {"red_hat", {"enterprise_linux", "openshift", "jboss_middleware"}},
        {"debian", {"debian_linux"}},
        {"canonical", {"ubuntu_linux"}},
        {"cisco", {"ios_xe", "webex_meetings", "adaptive_security_appliance"}},
        {"juniper", {"junos"}},
        {"siemens", {"simatic_s7", "teamcenter"}},
        {"adobe", {"acrobat_reader", "photoshop", "coldfusion"}},
        {"sap", {"netweaver", "business_one"}},
        {"vmware", {"vcenter_server", "esxi", "workstation"}},
        {"citrix", {"application_delivery_controller", "hypervisor"}},
        {"fortinet", {"fortios", "fortimanager"}},
        {"f5", {"big-ip"}},
        {"atlassian", {"jira", "confluence", "bitbucket"}},
        {"jetbrains", {"teamcity", "intellij_idea"}},
        {"gitlab", {"gitlab"}},
        {"jenkins", {"jenkins"}},
        {"elastic", {"elasticsearch", "kibana"}},
        {"splunk", {"splunk_enterprise"}},
        {"mongodb", {"mongodb"}},
        {"postgresql", {"postgresql"}},
        {"php", {"php"}},
        {"python", {"cpython"}},
        {"nodejs", {"node.js"}},
        {"limesurvey", {"limesurvey"}},
        {"zoho", {"manageengine_servicedesk_plus", "manageengine_admanager_plus"}},
        {"trend_micro", {"apex_one", "deep_security"}},
        {"schneider_electric", {"ecostruxure_control_expert", "modicon_m580"}},
        {"netgear", {"r7000_firmware", "prosafe"}},
        {"qnap", {"qts", "photo_station"}},
        {"synology", {"diskstation_manager"}},
        {"huawei", {"emui", "cloudengine"}},
    };
    return table;
}

struct VulnClass {
    const char* primary_term;        // main outcome phrase, also in the gazetteer
    std::vector<const char*> cwes;   // first is the dominant assignment
};

const std::vector<VulnClass>& class_table() {
    static const std::vector<VulnClass> table = {
        {"cross-site scripting", {"CWE-79", "CWE-80"}},
        {"sql injection", {"CWE-89", "CWE-74"}},
        {"buffer overflow", {"CWE-787", "CWE-120", "CWE-119"}},
        {"directory traversal", {"CWE-22", "CWE-23"}},
        {"information disclosure", {"CWE-200", "CWE-668"}},
        {"denial of service", {"CWE-400", "CWE-770"}},
        {"remote code execution", {"CWE-94", "CWE-502"}},
        {"authentication bypass", {"CWE-287", "CWE-306"}},
        {"cross-site request forgery", {"CWE-352"}},
        {"privilege escalation", {"CWE-269", "CWE-250"}},
        {"server-side request forgery", {"CWE-918"}},
        {"xml external entity", {"CWE-611"}},
    };
    return table;
}

const std::vector<const char*>& action_table() {
    static const std::vector<const char*> actions = {
        "execute arbitrary code",      "obtain sensitive information",
        "cause a denial of service",   "inject arbitrary web script",
        "read arbitrary files",        "gain elevated privileges",
        "bypass authentication",       "execute arbitrary sql commands",
        "hijack the authentication",   "write arbitrary files",
    };
    return actions;
}

const std::vector<const char*>& vector_table() {
    static const std::vector<const char*> vectors = {
        "URL parameter", "HTTP request",  "configuration file", "crafted packet",
        "form field",    "cookie value",  "serialized object",  "uploaded file",
    };
    return vectors;
}

const std::vector<const char*>& actor_table() {
    static const std::vector<const char*> actors = {"remote attackers", "local users",
                                                    "authenticated users"};
    return actors;
}

std::string display_name(const std::string& cpe_field) {
    // "red_hat" -> "Red Hat"; dots and dashes are kept as-is.
    std::string out;
    bool cap = true;
    for (char c : cpe_field) {
        if (c == '_') {
            out += ' ';
            cap = true;
        } else if (cap) {
            out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            cap = false;
        } else {
            out += c;
        }
    }
    return out;
}

std::string random_version(std::mt19937& rng) {
    return std::to_string(rng() % 9) + "." + std::to_string(rng() % 20) + "." +
           std::to_string(rng() % 30);
}

}  // namespace

std::string generate_feed_json(const FeedGenOptions& options) {
    std::mt19937 rng(options.seed);
    const auto& vendors = vendor_table();
    const auto& classes = class_table();

    json items = json::array();
    for (size_t i = 0; i < options.n_cves; ++i) {
        const int year = options.start_year + static_cast<int>(rng() % 6);
        const std::string cve_id = "CVE-" + std::to_string(year) + "-" +
                                   std::to_string(10000 + i);

        const VendorEntry& ve = vendors[rng() % vendors.size()];
        const std::string product = ve.products[rng() % ve.products.size()];
        const std::string version = random_version(rng);
        const std::string vendor_disp = display_name(ve.vendor);
        const std::string product_disp = display_name(product);

        // The outcome class drives both the phrasing and the CWE assignment.
        const VulnClass& vc = classes[rng() % classes.size()];
        const std::string cwe = (rng() % 100 < 85 || vc.cwes.size() == 1)
                                    ? vc.cwes[0]
                                    : vc.cwes[1 + rng() % (vc.cwes.size() - 1)];
        const std::string action = action_table()[rng() % action_table().size()];
        const std::string vec = vector_table()[rng() % vector_table().size()];
        const std::string actors = actor_table()[rng() % actor_table().size()];
        const std::string term = vc.primary_term;

        std::string description;
        switch (rng() % 5) {
            case 0:
                description = display_name(term) + " vulnerability in " + vendor_disp + " " +
                              product_disp + " before " + version + " allows " + actors +
                              " to " + action + " via a crafted " + vec + ".";
                break;
            case 1:
                description = vendor_disp + " " + product_disp + " through " + version +
                              " allows " + actors + " to " + action + " via the " + vec +
                              ", leading to " + term + ".";
                break;
            case 2:
                description = "A flaw was found in " + vendor_disp + " " + product_disp + " " +
                              version + ". An attacker could " + action +
                              ", resulting in " + term + ".";
                break;
            case 3:
                description = display_name(term) + " in " + vendor_disp + " " + product_disp +
                              " " + version + " and earlier allows " + actors + " to " + action +
                              ".";
                break;
            default:
                description = "Improper input validation in " + product_disp + " " + version +
                              " from " + vendor_disp + " permits " + actors + " to " + action +
                              " via a " + vec + ", causing " + term + ".";
                break;
        }

        json item;
        item["cve"]["CVE_data_meta"]["ID"] = cve_id;
        item["cve"]["problemtype"]["problemtype_data"] = json::array(
            {{{"description", json::array({{{"lang", "en"}, {"value", cwe}}})}}});
        item["cve"]["description"]["description_data"] =
            json::array({{{"lang", "en"}, {"value", description}}});

        const bool with_cpe =
            (static_cast<double>(rng() % 1000) / 1000.0) >= options.no_cpe_fraction;
        if (with_cpe) {
            std::string uri = std::string("cpe:2.3:a:") + ve.vendor + ":" + product + ":" +
                              version + ":*:*:*:*:*:*:*";
            json match = json::array({{{"vulnerable", true}, {"cpe23Uri", uri}}});
            json node = {{"operator", "OR"}, {"cpe_match", match}};
            if (rng() % 10 == 0) {
                // occasional nested configuration, as in real feeds
                json child = {{"operator", "OR"},
                              {"cpe_match",
                               json::array({{{"vulnerable", true},
                                             {"cpe23Uri", std::string("cpe:2.3:o:") + ve.vendor +
                                                              ":" + product + "_firmware:*:*:*:*:*:*:*:*"}}})}};
                node = {{"operator", "AND"}, {"children", json::array({node, child})}};
            }
            item["configurations"]["CVE_data_version"] = "4.0";
            item["configurations"]["nodes"] = json::array({node});
        } else {
            item["configurations"]["CVE_data_version"] = "4.0";
            item["configurations"]["nodes"] = json::array();
        }
        items.push_back(std::move(item));
    }

    json feed;
    feed["CVE_data_type"] = "CVE";
    feed["CVE_data_format"] = "MITRE";
    feed["CVE_data_version"] = "4.0";
    feed["CVE_Items"] = std::move(items);
    return feed.dump();
}

}  // namespace vulnkg::testsupport
