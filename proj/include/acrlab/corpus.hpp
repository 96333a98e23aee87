#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acrlab/errors.hpp"
#include "acrlab/rng.hpp"
#include "acrlab/util.hpp"

namespace acrlab {

using json = nlohmann::json;

// One vulnerable/patched file pair. Layout on disk:
//   <root>/<pair_id>/bad_<pair_id>_<k>.<ext>
//   <root>/<pair_id>/good_<pair_id>_<k>.<ext>
//   <root>/<pair_id>/pair.json        {"cve": "...", "cwe": <int>}
// Language is inferred from the file extension.
struct FilePair {
    std::string pair_id;
    std::string cve_id;
    int cwe_id = 0;
    std::string language;
    fs::path vulnerable_path;
    fs::path patched_path;
    long vulnerable_token_estimate = 0;
    long patched_token_estimate = 0;
};

struct SampleStratum {
    int cwe_id = 0;
    std::string language;
    std::size_t target_count = 0;
};

struct SampleSpec {
    std::vector<SampleStratum> strata;
    std::uint64_t rng_seed = 0;
};

struct Exclusion {
    std::string pair_id;
    std::string reason; // "placeholder_content" | "token_limit"
};

struct CorpusManifest {
    std::vector<FilePair> pairs;
    std::vector<Exclusion> exclusions;
};

namespace detail {

inline const std::map<std::string, std::string>& extension_languages() {
    static const std::map<std::string, std::string> table = {
        {".c", "C"},       {".h", "C"},          {".cpp", "C++"},   {".cc", "C++"},
        {".php", "PHP"},   {".js", "JavaScript"}, {".ts", "TypeScript"},
        {".py", "Python"}, {".go", "Go"},        {".rb", "Ruby"},   {".java", "Java"},
    };
    return table;
}

inline std::string language_for(const fs::path& file) {
    const auto& table = extension_languages();
    auto it = table.find(to_lower(file.extension().string()));
    if (it != table.end()) return it->second;
    std::string ext = file.extension().string();
    if (!ext.empty() && ext.front() == '.') ext.erase(0, 1);
    return ext.empty() ? "unknown" : ext;
}

inline constexpr const char* kPlaceholderContent = "404: Not Found";

} // namespace detail

inline CorpusManifest load_manifest(const fs::path& root) {
    if (!fs::is_directory(root)) fail(Errc::empty_corpus, "corpus root missing: " + root.string());

    std::vector<fs::path> pair_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) pair_dirs.push_back(entry.path());
    std::sort(pair_dirs.begin(), pair_dirs.end());
    if (pair_dirs.empty()) fail(Errc::empty_corpus, "no pair directories under " + root.string());

    CorpusManifest manifest;
    for (const auto& dir : pair_dirs) {
        const std::string pair_id = dir.filename().string();
        fs::path bad, good;
        for (const auto& f : fs::directory_iterator(dir)) {
            if (!f.is_regular_file()) continue;
            const std::string name = f.path().filename().string();
            if (name.starts_with("bad_")) bad = f.path();
            else if (name.starts_with("good_")) good = f.path();
        }
        if (bad.empty() || good.empty())
            fail(Errc::malformed_layout, "pair " + pair_id + " missing its " +
                                             (bad.empty() ? "bad_" : "good_") + " counterpart");

        const std::string bad_content = read_file(bad);
        const std::string good_content = read_file(good);
        if (bad_content == detail::kPlaceholderContent || good_content == detail::kPlaceholderContent) {
            manifest.exclusions.push_back({pair_id, "placeholder_content"});
            continue;
        }

        FilePair pair;
        pair.pair_id = pair_id;
        pair.vulnerable_path = bad;
        pair.patched_path = good;
        pair.language = detail::language_for(bad);
        pair.vulnerable_token_estimate = token_estimate(bad_content);
        pair.patched_token_estimate = token_estimate(good_content);

        const fs::path meta = dir / "pair.json";
        if (fs::exists(meta)) {
            json m;
            try {
                m = json::parse(read_file(meta));
            } catch (const json::exception& e) {
                fail(Errc::malformed_layout, "bad pair.json in " + pair_id + ": " + e.what());
            }
            pair.cve_id = m.value("cve", "");
            pair.cwe_id = m.value("cwe", 0);
        }
        manifest.pairs.push_back(std::move(pair));
    }
    return manifest;
}

inline CorpusManifest filter_pairs(CorpusManifest manifest, long max_tokens) {
    if (max_tokens <= 0) fail(Errc::domain_error, "max_tokens must be positive");
    CorpusManifest out;
    out.exclusions = std::move(manifest.exclusions);
    for (auto& pair : manifest.pairs) {
        if (pair.vulnerable_token_estimate > max_tokens || pair.patched_token_estimate > max_tokens)
            out.exclusions.push_back({pair.pair_id, "token_limit"});
        else
            out.pairs.push_back(std::move(pair));
    }
    return out;
}

// Stratified sampling without replacement. Strata are processed in spec
// order; within a stratum the eligible pairs are sorted by pair_id and a
// partial Fisher-Yates (see rng.hpp) picks target_count of them. One
// SplitMix64 stream seeded from rng_seed drives all strata, so the whole
// selection is a pure function of (manifest, spec).
inline std::vector<FilePair> stratified_sample(const CorpusManifest& manifest,
                                               const SampleSpec& spec) {
    SplitMix64 rng(spec.rng_seed);
    std::vector<FilePair> sample;
    for (const auto& stratum : spec.strata) {
        std::vector<const FilePair*> eligible;
        for (const auto& pair : manifest.pairs)
            if (pair.cwe_id == stratum.cwe_id && pair.language == stratum.language)
                eligible.push_back(&pair);
        std::sort(eligible.begin(), eligible.end(),
                  [](const FilePair* a, const FilePair* b) { return a->pair_id < b->pair_id; });
        if (eligible.size() < stratum.target_count)
            fail(Errc::insufficient_stratum,
                 "stratum (CWE-" + std::to_string(stratum.cwe_id) + ", " + stratum.language +
                     ") has " + std::to_string(eligible.size()) + " pairs, need " +
                     std::to_string(stratum.target_count));
        const auto picks = sample_without_replacement(eligible.size(), stratum.target_count, rng);
        for (const auto i : picks) sample.push_back(*eligible[i]);
    }
    return sample;
}

inline json manifest_to_json(const CorpusManifest& manifest) {
    json pairs = json::array();
    for (const auto& p : manifest.pairs)
        pairs.push_back({{"pair_id", p.pair_id},
                         {"cve", p.cve_id},
                         {"cwe", p.cwe_id},
                         {"language", p.language},
                         {"vulnerable_path", p.vulnerable_path.string()},
                         {"patched_path", p.patched_path.string()},
                         {"vulnerable_token_estimate", p.vulnerable_token_estimate},
                         {"patched_token_estimate", p.patched_token_estimate}});
    json exclusions = json::array();
    for (const auto& e : manifest.exclusions)
        exclusions.push_back({{"pair_id", e.pair_id}, {"reason", e.reason}});
    return {{"pairs", pairs}, {"exclusions", exclusions}};
}

inline std::string exclusions_to_csv(const CorpusManifest& manifest) {
    std::string csv = "pair_id,reason\n";
    for (const auto& e : manifest.exclusions) csv += e.pair_id + "," + e.reason + "\n";
    return csv;
}

} // namespace acrlab
