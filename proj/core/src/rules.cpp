#include "persistlens/rules.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"
#include "persistlens/annotate.hpp"
#include "persistlens/error.hpp"

namespace persistlens {

using ojson = nlohmann::ordered_json;

// Order matters: the first matching row wins. Account Manipulation precedes
// Create Account so "new admin account" reads as a privilege change.
const std::vector<KeywordRule>& persistence_rules() {
    static const std::vector<KeywordRule> rules = {
        {"Account Manipulation: SSH Authorized Keys",
         {"authorized_keys", "authorized keys"},
         {"appended our public key to root authorized_keys on the jump box"}},
        {"Account Manipulation",
         {"admin account", "to domain admins", "to the administrators group",
          "to local administrators", "granted additional privileges", "added additional roles"},
         {"created new admin account for later access",
          "added svc_backup to domain admins to keep a foothold",
          "granted additional privileges to the helpdesk account"}},
        {"Create Account",
         {"created a local user", "created local user", "created a new user", "new domain user",
          "useradd", "net user /add", "backdoor account"},
         {"created a local user named sysupdate on the web tier",
          "set up a backdoor account in the staging domain"}},
        {"Valid Accounts",
         {"stolen credentials", "harvested credentials", "valid credentials", "compromised account",
          "reused credentials"},
         {"logged back in with stolen credentials from the earlier phish",
          "reused harvested credentials to keep access to the finance share"}},
        {"Modify Authentication Process",
         {"skeleton key", "pam module", "password filter", "patched authentication",
          "authentication package"},
         {"installed a skeleton key on the domain controller",
          "swapped the pam module so any password works for our user",
          "registered a password filter to capture resets"}},
        {"Server Software Component: Web Shell",
         {"web shell", "webshell"},
         {"dropped a web shell on the intranet portal"}},
        {"Scheduled Task/Job",
         {"scheduled task", "schtasks", "crontab", "cron job"},
         {"registered a scheduled task that relaunches the beacon hourly",
          "added a cron job to call home every 10 minutes"}},
        {"Create or Modify System Process",
         {"installed a service", "new service", "systemd service", "sc create",
          "windows service for the implant"},
         {"installed a service that restarts the implant at boot",
          "wrote a systemd service unit for the agent"}},
        {"Boot or Logon Autostart Execution",
         {"run key", "startup folder", "autostart"},
         {"set a run key under hkcu to launch the loader",
          "copied the loader into the startup folder"}},
        {"Boot or Logon Initialization Scripts",
         {"logon script", "rc.local", "login hook"},
         {"modified the logon script on the file server", "appended the stager to rc.local"}},
        {"Event Triggered Execution",
         {"wmi event subscription", "sticky keys", ".bashrc", "powershell profile"},
         {"created a wmi event subscription to respawn the payload",
          "replaced sticky keys with cmd for console access"}},
        {"Hijack Execution Flow",
         {"dll hijack", "dll side-load", "dll sideload", "ld_preload"},
         {"planted a dll hijack in the updater directory"}},
        {"External Remote Services",
         {"vpn access", "exposed rdp", "external remote access", "citrix gateway"},
         {"kept vpn access through the contractor profile"}},
        {"Office Application Startup",
         {"outlook rule", "office template macro", "office add-in"},
         {"set an outlook rule that launches the macro"}},
        {"BITS Jobs",
         {"bits job", "bitsadmin"},
         {"queued a bits job to fetch and run the payload"}},
        {"Browser Extensions",
         {"browser extension"},
         {"side-loaded a browser extension on the admin workstation"}},
        {"Compromise Host Software Binary",
         {"trojanized", "backdoored the binary"},
         {"replaced sshd with a trojanized build"}},
        {"Implant Internal Image",
         {"backdoored container image", "implanted image"},
         {"pushed a backdoored container image to the registry"}},
        {"Pre-OS Boot",
         {"bootkit", "firmware implant"},
         {"flashed a firmware implant on the management controller"}},
        {"Traffic Signaling",
         {"port knock"},
         {"configured a port knock sequence to reopen ssh"}},
        {"Power Settings",
         {"powercfg", "disabled sleep"},
         {"used powercfg to keep the host from sleeping"}},
    };
    return rules;
}

const std::vector<std::string>& non_persistence_phrases() {
    static const std::vector<std::string> phrases = {
        "exfil", "upload", "download", "scan", "nmap", "enumerat", "recon", "dump", "crack",
        "pivot", "lateral", "screenshot", "lsass", "kerberoast", "phish",
    };
    return phrases;
}

namespace {

std::string lower(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (unsigned char c : text) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

RuleVerdict classify_text(std::string_view description) {
    const auto text = lower(description);
    for (const auto& rule : persistence_rules()) {
        for (const auto& phrase : rule.phrases) {
            if (text.find(phrase) == std::string::npos) continue;
            RuleVerdict v;
            v.is_persistence = true;
            v.label = rule.label;
            v.matched_phrase = phrase;
            v.reasoning = "The action mentions '" + phrase +
                          "', which sets up a way back into the environment that survives "
                          "interruption; this maps to " + rule.label + ".";
            return v;
        }
    }
    RuleVerdict v;
    for (const auto& phrase : non_persistence_phrases()) {
        if (text.find(phrase) != std::string::npos) {
            v.matched_phrase = phrase;
            break;
        }
    }
    v.reasoning = v.matched_phrase.empty()
                      ? "No persistence indicator in the action description."
                      : "The action is about '" + v.matched_phrase +
                            "', which does not establish continued access.";
    return v;
}

std::string rule_description(std::string_view entry_text) {
    std::size_t start = 0;
    while (start <= entry_text.size()) {
        auto end = entry_text.find('\n', start);
        if (end == std::string_view::npos) end = entry_text.size();
        auto line = trim(entry_text.substr(start, end - start));
        if (!line.empty()) {
            if (line.size() > 200) line = line.substr(0, 200);
            return std::string(line);
        }
        start = end + 1;
    }
    return {};
}

namespace {

class RuleBackend final : public ModelBackend {
public:
    std::string backend_id() const override { return "rules"; }
    std::string model_id() const override { return std::string(kRuleModelId); }

    BackendResponse complete(const BackendRequest& request) override {
        ojson payload;
        try {
            payload = ojson::parse(request.user_payload);
        } catch (const ojson::exception& e) {
            throw ArgumentError(std::string("rule backend: payload is not JSON: ") + e.what());
        }
        BackendResponse out;
        if (request.stage == kSegmentationStage) {
            out.text = segment(payload).dump();
        } else if (request.stage == kClassificationStage) {
            out.text = classify(payload).dump();
        } else {
            throw ArgumentError("rule backend: unknown stage '" + request.stage + "'");
        }
        return out;
    }

private:
    static ojson segment(const ojson& payload) {
        ojson actions = ojson::array();
        for (const auto& entry : payload.at("entries")) {
            const auto index = entry.at("index").get<std::size_t>();
            auto description = rule_description(entry.at("text").get<std::string>());
            actions.push_back(ojson{{"start_entry", index}, {"end_entry", index},
                                    {"description", std::move(description)}});
        }
        return ojson{{"actions", std::move(actions)}};
    }

    static ojson classify(const ojson& payload) {
        const auto verdict = classify_text(payload.at("target").at("description").get<std::string>());
        ojson out;
        out["reasoning"] = verdict.reasoning;
        out["is_persistence"] = verdict.is_persistence;
        out["technique_label"] = verdict.is_persistence ? ojson(verdict.label) : ojson(nullptr);
        return out;
    }
};

}  // namespace

std::shared_ptr<ModelBackend> make_rule_backend() { return std::make_shared<RuleBackend>(); }

}  // namespace persistlens
