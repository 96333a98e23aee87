#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acrlab/corpus.hpp"
#include "acrlab/errors.hpp"
#include "acrlab/framing.hpp"
#include "acrlab/gateway.hpp"
#include "acrlab/util.hpp"

namespace acrlab {

struct TargetSpec {
    std::string project;
    std::string cve;
    fs::path repo_path;
    std::string fix_commit;
    fs::path workflow_path;
    int cwe_id = 0;
    std::vector<std::string> guideline_paths;
    std::string validated_by; // operator id for assisted reverts

    std::string target_id() const { return project + "/" + cve; }
};

struct BenchSpec {
    std::vector<std::string> models;
    std::vector<FramingCondition> conditions = all_conditions();
    long bonferroni_m = 0; // 0 = derived from the run
};

struct CorpusSpec {
    fs::path root;
    long max_tokens = 100000;
    std::vector<SampleStratum> strata;
};

struct CampaignConfig {
    std::string campaign_id = "default";
    fs::path store_dir = "runs/default";
    fs::path templates_dir = "templates";
    fs::path lexicon_path;
    fs::path policy_path;
    BackendKind backend = BackendKind::mock;
    bool live_allowed = false; // set only by the --live flag
    int t_max = 10;
    bool defense_escalate = true;
    std::uint64_t rng_seed = 0;
    int max_parallel = 4;
    std::string default_review_model = "claude-sonnet-4-5";
    std::string attack_model; // empty = use each target's review model
    int review_max_turns = 25;
    bool interactive = false;
    std::map<std::string, std::string> web_cache;
    std::vector<ProviderProfile> profiles;
    std::vector<TargetSpec> targets;
    BenchSpec bench;
    CorpusSpec corpus;
};

namespace configdetail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace configdetail

// Configuration file schema (JSON): see README. Relative paths are resolved
// against the config file's directory.
inline CampaignConfig load_config(const fs::path& config_path) {
    json doc;
    try {
        doc = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
        fail(Errc::config_error, "bad config " + config_path.string() + ": " + e.what());
    }
    const fs::path base = config_path.has_parent_path() ? config_path.parent_path() : ".";

    CampaignConfig cfg;
    cfg.campaign_id = doc.value("campaign_id", "default");
    cfg.store_dir = configdetail::resolve(base, doc.value("store", "runs/default"));
    cfg.templates_dir = configdetail::resolve(base, doc.value("templates_dir", "templates"));
    cfg.lexicon_path = configdetail::resolve(base, doc.value("lexicon", ""));
    cfg.policy_path = configdetail::resolve(base, doc.value("policy", ""));
    if (cfg.lexicon_path.empty()) cfg.lexicon_path = cfg.templates_dir / "lexicon.json";
    if (cfg.policy_path.empty()) cfg.policy_path = cfg.templates_dir / "policy.json";

    const std::string backend = doc.value("backend", "mock");
    if (backend == "mock") cfg.backend = BackendKind::mock;
    else if (backend == "live") cfg.backend = BackendKind::live;
    else fail(Errc::config_error, "unknown backend kind: " + backend);

    cfg.t_max = doc.value("t_max", 10);
    if (cfg.t_max < 1) fail(Errc::config_error, "t_max must be >= 1");
    const std::string defense = doc.value("defense", "escalate");
    cfg.defense_escalate = defense != "off";
    cfg.rng_seed = doc.value("rng_seed", 0ULL);
    cfg.max_parallel = doc.value("max_parallel", 4);
    cfg.default_review_model = doc.value("default_review_model", "claude-sonnet-4-5");
    cfg.attack_model = doc.value("attack_model", "");
    cfg.review_max_turns = doc.value("review_max_turns", 25);
    for (const auto& [k, v] : doc.value("web_cache", json::object()).items())
        cfg.web_cache[k] = v.get<std::string>();

    for (const auto& p : doc.value("profiles", json::array())) {
        ProviderProfile profile;
        profile.model_id = p.value("model_id", "");
        profile.input_usd_per_mtok = p.value("input_usd_per_mtok", 0.0);
        profile.output_usd_per_mtok = p.value("output_usd_per_mtok", 0.0);
        profile.rate_limit_per_min = p.value("rate_limit_per_min", 60);
        profile.wire = p.value("wire", "anthropic") == std::string("openai") ? WireFormat::openai
                                                                             : WireFormat::anthropic;
        profile.api_base = p.value("api_base", "");
        profile.auth_env = p.value("auth_env", "");
        cfg.profiles.push_back(std::move(profile));
    }

    for (const auto& t : doc.value("targets", json::array())) {
        TargetSpec target;
        target.project = t.value("project", "");
        target.cve = t.value("cve", "");
        target.repo_path = configdetail::resolve(base, t.value("repo", ""));
        target.fix_commit = t.value("fix_commit", "");
        target.workflow_path = configdetail::resolve(base, t.value("workflow", ""));
        target.cwe_id = t.value("cwe", 0);
        for (const auto& g : t.value("guidelines", json::array()))
            target.guideline_paths.push_back(g.get<std::string>());
        target.validated_by = t.value("validated_by", "");
        if (target.project.empty() || target.cve.empty())
            fail(Errc::config_error, "target needs project and cve");
        cfg.targets.push_back(std::move(target));
    }

    if (doc.contains("bench")) {
        const auto& b = doc["bench"];
        for (const auto& m : b.value("models", json::array()))
            cfg.bench.models.push_back(m.get<std::string>());
        if (b.contains("conditions")) {
            cfg.bench.conditions.clear();
            for (const auto& c : b["conditions"]) {
                const auto parsed = condition_from_slug(c.get<std::string>());
                if (!parsed) fail(Errc::config_error, "unknown condition: " + c.get<std::string>());
                cfg.bench.conditions.push_back(*parsed);
            }
        }
        cfg.bench.bonferroni_m = b.value("bonferroni_m", 0L);
    }

    if (doc.contains("corpus")) {
        const auto& c = doc["corpus"];
        cfg.corpus.root = configdetail::resolve(base, c.value("root", ""));
        cfg.corpus.max_tokens = c.value("max_tokens", 100000L);
        for (const auto& s : c.value("strata", json::array()))
            cfg.corpus.strata.push_back(
                {s.value("cwe", 0), s.value("language", ""), s.value("count", std::size_t{0})});
    }
    return cfg;
}

// Mock-script file: {"scripts": [{"key": "campaign|target|purpose",
// "cycle": false, "responses": [{"text": "...", "input_tokens": n,
// "output_tokens": n}, ...]}]}
inline void load_mock_scripts(Gateway& gateway, const fs::path& script_path) {
    json doc;
    try {
        doc = json::parse(read_file(script_path));
    } catch (const json::exception& e) {
        fail(Errc::config_error, "bad mock script " + script_path.string() + ": " + e.what());
    }
    for (const auto& s : doc.value("scripts", json::array())) {
        std::vector<ScriptedResponse> responses;
        for (const auto& r : s.value("responses", json::array())) {
            ScriptedResponse resp;
            if (r.is_string()) {
                resp.text = r.get<std::string>();
            } else {
                resp.text = r.value("text", "");
                if (r.contains("input_tokens")) resp.input_tokens = r["input_tokens"].get<long long>();
                if (r.contains("output_tokens"))
                    resp.output_tokens = r["output_tokens"].get<long long>();
            }
            responses.push_back(std::move(resp));
        }
        gateway.script_mock(s.value("key", ""), std::move(responses), s.value("cycle", false));
    }
}

} // namespace acrlab
