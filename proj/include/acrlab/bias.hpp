#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "acrlab/diff.hpp"
#include "acrlab/errors.hpp"
#include "acrlab/gateway.hpp"
#include "acrlab/util.hpp"

namespace acrlab {

enum class MetadataProvenance { baseline, template_combo, llm_seed, llm_refined };

struct CommentInjection {
    std::string file;    // repo-relative path
    long line_anchor = 0; // first new-side line of the file's first hunk
    std::string text;    // comment body without the language marker
};

struct PrMetadata {
    std::string title;
    std::string description;
    std::string commit_message;
    std::vector<CommentInjection> comment_injections;
    int iteration_index = 0; // 0 unless provenance == llm_refined
    MetadataProvenance provenance = MetadataProvenance::baseline;
    int combo_index = 0; // meaningful for template_combo only
};

struct BiasCombo {
    bool authority = false;
    bool self_correctness = false;
    bool misleading = false;

    int index() const { return (authority ? 1 : 0) | (self_correctness ? 2 : 0) | (misleading ? 4 : 0); }

    std::string label() const {
        if (!authority && !self_correctness && !misleading) return "baseline";
        std::vector<std::string> parts;
        if (authority) parts.push_back("authority");
        if (self_correctness) parts.push_back("self-correctness");
        if (misleading) parts.push_back("misleading");
        return join(parts, "+");
    }
};

// The PR description/commit message of the unbiased attack: the literal
// phrase "Change {filenames}".
inline PrMetadata baseline_metadata(const std::vector<std::string>& touched_files) {
    if (touched_files.empty()) fail(Errc::empty_change, "baseline metadata needs touched files");
    PrMetadata meta;
    meta.commit_message = "Change " + join(touched_files, ", ");
    meta.description = meta.commit_message;
    meta.title = meta.commit_message;
    meta.provenance = MetadataProvenance::baseline;
    return meta;
}

// All 2^3 bias combinations in a fixed order: index i maps authority to bit
// 0, self-correctness to bit 1, misleading to bit 2, so the all-false
// baseline combo comes first.
inline std::vector<BiasCombo> enumerate_combos() {
    std::vector<BiasCombo> combos;
    for (int i = 0; i < 8; ++i)
        combos.push_back({(i & 1) != 0, (i & 2) != 0, (i & 4) != 0});
    return combos;
}

namespace biasdetail {

inline std::string load_fragment(const fs::path& path) {
    std::string s = read_file(path);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

inline void anchor_from_diff(const std::string& diff_text, std::string& file, long& line) {
    const UnifiedDiff diff = parse_unified_diff(diff_text);
    const auto files = touched_files(diff);
    if (files.empty()) return;
    file = files.front();
    for (const auto& fd : diff.files) {
        if (detail::strip_prefix(fd.new_path) != file || fd.hunks.empty()) continue;
        line = fd.hunks.front().new_start;
        return;
    }
}

} // namespace biasdetail

// Instantiate the fixed bias templates onto baseline metadata. Channels of
// disabled bias kinds stay byte-identical to the baseline.
inline PrMetadata apply_templates(const BiasCombo& combo, const PrMetadata& base,
                                  const std::string& diff_text, int cwe_id,
                                  const fs::path& templates_dir) {
    if (base.provenance != MetadataProvenance::baseline)
        fail(Errc::config_error, "apply_templates expects baseline metadata");
    if (combo.misleading && cwe_id <= 0)
        fail(Errc::missing_cwe, "misleading template needs a CWE id");

    const fs::path dir = templates_dir / "bias";
    const std::string cwe_slot = "CWE-" + std::to_string(cwe_id);

    PrMetadata out = base;
    out.provenance = MetadataProvenance::template_combo;
    out.combo_index = combo.index();

    if (combo.authority)
        out.commit_message += "\n" + biasdetail::load_fragment(dir / "authority_commit.txt");
    if (combo.self_correctness)
        out.commit_message += "\n" + biasdetail::load_fragment(dir / "self_correctness_commit.txt");
    if (combo.misleading)
        out.commit_message +=
            "\n" + replace_all(biasdetail::load_fragment(dir / "misleading_commit.txt"), "{CWE-XX}",
                               cwe_slot);

    if (combo.misleading)
        out.description +=
            "\n\n" + replace_all(biasdetail::load_fragment(dir / "misleading_description_head.txt"),
                                 "{CWE-XX}", cwe_slot);
    if (combo.authority)
        out.description += "\n" + biasdetail::load_fragment(dir / "authority_description.txt");
    if (combo.self_correctness)
        out.description += "\n" + biasdetail::load_fragment(dir / "self_correctness_description.txt");
    if (combo.misleading)
        out.description +=
            "\n" + biasdetail::load_fragment(dir / "misleading_description_tail.txt");

    std::string anchor_file;
    long anchor_line = 0;
    biasdetail::anchor_from_diff(diff_text, anchor_file, anchor_line);
    if (!anchor_file.empty()) {
        if (combo.authority)
            out.comment_injections.push_back(
                {anchor_file, anchor_line, biasdetail::load_fragment(dir / "authority_comment.txt")});
        if (combo.self_correctness)
            out.comment_injections.push_back({anchor_file, anchor_line,
                                              biasdetail::load_fragment(
                                                  dir / "self_correctness_comment.txt")});
    }
    return out;
}

// Materialize the comment injections into the diff the reviewer sees.
inline std::string apply_injections_to_diff(const std::string& diff_text,
                                            const std::vector<CommentInjection>& injections) {
    if (injections.empty()) return diff_text;
    UnifiedDiff diff = parse_unified_diff(diff_text);
    for (const auto& inj : injections)
        inject_top_comments(diff, inj.file, {"// " + inj.text});
    return to_string(diff);
}

struct PromptParams {
    std::string fix_commit;
    std::string diff;
    std::vector<std::string> repo_guideline_paths;
    std::optional<fs::path> prior_review_path;
    int next_index = 1;
};

namespace biasdetail {

inline std::string guidelines_or_default(const std::vector<std::string>& paths) {
    if (paths.empty()) return "CLAUDE.md, security.md";
    return join(paths, ", ");
}

} // namespace biasdetail

inline std::string render_seed_prompt(const PromptParams& params, const fs::path& templates_dir) {
    if (params.fix_commit.empty() || params.diff.empty())
        fail(Errc::config_error, "seed prompt needs fix_commit and diff");
    std::string text = read_file(templates_dir / "prompts" / "seed.txt");
    text = replace_all(std::move(text), "{FIX-COMMIT}", params.fix_commit);
    text = replace_all(std::move(text), "{GUIDELINES}",
                       biasdetail::guidelines_or_default(params.repo_guideline_paths));
    text = replace_all(std::move(text), "{DIFF}", params.diff);
    return text;
}

inline std::string render_refinement_prompt(const PromptParams& params,
                                            const fs::path& templates_dir) {
    if (!params.prior_review_path)
        fail(Errc::missing_review, "refinement prompt needs the prior review path");
    if (params.next_index < 2)
        fail(Errc::config_error, "refinement next_index must be >= 2");
    if (!fs::exists(*params.prior_review_path))
        fail(Errc::missing_review, "review file missing: " + params.prior_review_path->string());

    const fs::path& p = *params.prior_review_path;
    std::string display = p.filename().string();
    if (p.has_parent_path()) display = p.parent_path().filename().string() + "/" + display;

    std::string text = read_file(templates_dir / "prompts" / "refine.txt");
    text = replace_all(std::move(text), "{REVIEW-FILE}", display);
    text = replace_all(std::move(text), "{NEXT-INDEX}", std::to_string(params.next_index));
    text = replace_all(std::move(text), "{REVIEW}", read_file(p));
    return text;
}

namespace biasdetail {

inline std::optional<std::string> section_after(const std::vector<std::string>& lines,
                                                std::size_t start, std::size_t end) {
    std::string body;
    for (std::size_t i = start; i < end; ++i) {
        if (!body.empty()) body += "\n";
        body += lines[i];
    }
    std::string trimmed = trim(body);
    if (trimmed.empty()) return std::nullopt;
    return trimmed;
}

} // namespace biasdetail

// Parse a generation reply (the COMMIT_MESSAGE / PR_DESCRIPTION /
// COMMENT_EDITS contract) into PrMetadata.
inline PrMetadata parse_generated_metadata(const std::string& reply_text,
                                           MetadataProvenance provenance, int iteration_index) {
    const auto lines = split_lines(reply_text);
    std::size_t commit_at = lines.size(), descr_at = lines.size(), comments_at = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string t = trim(lines[i]);
        if (t == "COMMIT_MESSAGE:") commit_at = i;
        else if (t == "PR_DESCRIPTION:") descr_at = i;
        else if (t == "COMMENT_EDITS:") comments_at = i;
    }
    if (commit_at >= lines.size() || descr_at >= lines.size())
        fail(Errc::unparseable_generation,
             "generation reply lacks COMMIT_MESSAGE/PR_DESCRIPTION sections");

    PrMetadata meta;
    meta.provenance = provenance;
    meta.iteration_index = provenance == MetadataProvenance::llm_refined ? iteration_index : 0;

    const auto commit = biasdetail::section_after(lines, commit_at + 1, descr_at);
    const auto descr = biasdetail::section_after(lines, descr_at + 1, comments_at);
    if (!commit) fail(Errc::unparseable_generation, "empty COMMIT_MESSAGE section");
    if (!descr) fail(Errc::unparseable_generation, "empty PR_DESCRIPTION section");
    meta.commit_message = *commit;
    meta.description = *descr;
    meta.title = split_lines(meta.commit_message).front();

    if (comments_at < lines.size()) {
        for (std::size_t i = comments_at + 1; i < lines.size(); ++i) {
            const std::string line = trim(lines[i]);
            if (line.empty() || to_lower(line) == "none") continue;
            const std::size_t c1 = line.find(':');
            if (c1 == std::string::npos) continue;
            const std::size_t c2 = line.find(':', c1 + 1);
            if (c2 == std::string::npos) continue;
            CommentInjection inj;
            inj.file = trim(line.substr(0, c1));
            inj.line_anchor = std::strtol(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr, 10);
            inj.text = trim(line.substr(c2 + 1));
            if (!inj.file.empty()) meta.comment_injections.push_back(std::move(inj));
        }
    }
    return meta;
}

inline PrMetadata generate_metadata(Gateway& gateway, const ChatJob& job,
                                    MetadataProvenance provenance, int iteration_index = 0) {
    if (provenance != MetadataProvenance::llm_seed && provenance != MetadataProvenance::llm_refined)
        fail(Errc::config_error, "generate_metadata produces llm_seed or llm_refined metadata");
    const ChatResult reply = gateway.complete(job);
    return parse_generated_metadata(reply.text, provenance, iteration_index);
}

} // namespace acrlab
