#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "acrlab/diff.hpp"
#include "acrlab/errors.hpp"
#include "acrlab/gateway.hpp"
#include "acrlab/subprocess.hpp"
#include "acrlab/util.hpp"

namespace acrlab {

// Local clone under test. origin_note is provenance for reports only; the
// codebase has no push/fetch capability, and every mutating operation
// requires sanitized == true (zero configured remotes).
struct RepoHandle {
    fs::path path;
    std::string head;
    bool sanitized = false;
    std::string origin_note;
};

struct FixCommitRef {
    std::string cve_id;
    std::string commit_id;
    enum class Source { advisory, nvd, manual } source = Source::manual;
};

enum class RevertMode { clean, assisted, failed };
enum class RevertValidation { pending, human_validated };

struct RevertResult {
    RevertMode mode = RevertMode::failed;
    std::string branch;
    std::string diff;
    std::vector<std::string> touched_files;
    std::vector<std::string> conflict_files;
    RevertValidation validation = RevertValidation::pending;
};

namespace gitdetail {

inline RunResult git(const fs::path& repo, std::vector<std::string> args,
                     const std::string& stdin_data = {}) {
    std::vector<std::string> argv = {"git",
                                     "-C",
                                     repo.string(),
                                     "-c",
                                     "user.name=acrlab",
                                     "-c",
                                     "user.email=acrlab@localhost",
                                     "-c",
                                     "commit.gpgsign=false"};
    argv.insert(argv.end(), args.begin(), args.end());
    return run_process(argv, {}, stdin_data);
}

inline RunResult git_ok(const fs::path& repo, std::vector<std::string> args,
                        const std::string& stdin_data = {}) {
    RunResult r = git(repo, args, stdin_data);
    if (!r.ok())
        fail(Errc::config_error, "git " + join(args, " ") + " failed: " + trim(r.err));
    return r;
}

inline std::string sanitize_branch_component(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '-';
    return s;
}

} // namespace gitdetail

// One mutating operation per repository at a time; distinct repos proceed in
// parallel.
class RepoLocks {
public:
    static std::unique_lock<std::mutex> acquire(const fs::path& repo) {
        static std::mutex registry_mutex;
        static std::map<std::string, std::unique_ptr<std::mutex>> locks;
        std::string key;
        std::error_code ec;
        const fs::path canon = fs::weakly_canonical(repo, ec);
        key = ec ? repo.string() : canon.string();
        std::mutex* m = nullptr;
        {
            std::lock_guard<std::mutex> g(registry_mutex);
            auto& slot = locks[key];
            if (!slot) slot = std::make_unique<std::mutex>();
            m = slot.get();
        }
        return std::unique_lock<std::mutex>(*m);
    }
};

inline std::vector<std::string> list_remotes(const fs::path& repo) {
    const RunResult r = gitdetail::git(repo, {"remote"});
    if (!r.ok()) fail(Errc::not_a_repository, repo.string() + " is not a git repository");
    std::vector<std::string> remotes;
    for (const auto& line : split_lines(r.out))
        if (!trim(line).empty()) remotes.push_back(trim(line));
    return remotes;
}

inline RepoHandle open_repo(const fs::path& path) {
    const RunResult probe = gitdetail::git(path, {"rev-parse", "--git-dir"});
    if (!probe.ok()) fail(Errc::not_a_repository, path.string() + " is not a git repository");
    RepoHandle handle;
    handle.path = path;
    const RunResult head = gitdetail::git(path, {"rev-parse", "HEAD"});
    handle.head = head.ok() ? trim(head.out) : "";
    handle.sanitized = list_remotes(path).empty();
    return handle;
}

// Remove every configured remote; idempotent on an already-clean repo.
inline RepoHandle sanitize_clone(const fs::path& source_path) {
    RepoHandle handle = open_repo(source_path);
    for (const auto& remote : list_remotes(source_path)) {
        handle.origin_note += (handle.origin_note.empty() ? "" : ", ") + remote;
        gitdetail::git_ok(source_path, {"remote", "remove", remote});
    }
    handle.sanitized = true;
    return handle;
}

inline void require_sanitized(const RepoHandle& repo, const char* op) {
    if (!repo.sanitized)
        fail(Errc::safety_violation,
             std::string(op) + " refused: repository has configured remotes (" +
                 repo.path.string() + ")");
}

inline std::string tree_hash(const fs::path& repo, const std::string& rev) {
    return trim(gitdetail::git_ok(repo, {"rev-parse", rev + "^{tree}"}).out);
}

inline std::string current_branch(const fs::path& repo) {
    return trim(gitdetail::git_ok(repo, {"symbolic-ref", "--short", "HEAD"}).out);
}

inline bool commit_exists(const fs::path& repo, const std::string& commit_id) {
    return gitdetail::git(repo, {"cat-file", "-e", commit_id + "^{commit}"}).ok();
}

namespace gitdetail {

inline std::string default_revert_message(const std::vector<std::string>& touched) {
    std::vector<std::string> names;
    for (const auto& t : touched) names.push_back(fs::path(t).filename().string());
    return "Change " + join(names, ", ");
}

} // namespace gitdetail

// Revert the fixing commit on a fresh branch. Conflicts are a result, not an
// exception: mode == failed carries the conflicting files and the original
// branch is left untouched either way.
inline RevertResult clean_revert(const RepoHandle& repo, const FixCommitRef& fix) {
    require_sanitized(repo, "clean_revert");
    auto lock = RepoLocks::acquire(repo.path);
    if (!commit_exists(repo.path, fix.commit_id))
        fail(Errc::config_error, "fix commit not in history: " + fix.commit_id);

    const std::string base_branch = current_branch(repo.path);
    const std::string base_head = trim(gitdetail::git_ok(repo.path, {"rev-parse", "HEAD"}).out);
    const std::string branch =
        "revert-" + gitdetail::sanitize_branch_component(
                        fix.cve_id.empty() ? fix.commit_id.substr(0, 12) : fix.cve_id);

    gitdetail::git_ok(repo.path, {"switch", "-C", branch, base_head});
    RevertResult result;
    result.branch = branch;

    const RunResult revert = gitdetail::git(repo.path, {"revert", "--no-commit", fix.commit_id});
    if (!revert.ok()) {
        const RunResult conflicts =
            gitdetail::git(repo.path, {"diff", "--name-only", "--diff-filter=U"});
        for (const auto& line : split_lines(conflicts.out))
            if (!trim(line).empty()) result.conflict_files.push_back(trim(line));
        std::sort(result.conflict_files.begin(), result.conflict_files.end());
        if (!gitdetail::git(repo.path, {"revert", "--abort"}).ok())
            gitdetail::git(repo.path, {"reset", "--hard", "HEAD"});
        gitdetail::git_ok(repo.path, {"switch", base_branch});
        gitdetail::git(repo.path, {"branch", "-D", branch});
        result.mode = RevertMode::failed;
        return result;
    }

    const RunResult staged = gitdetail::git_ok(repo.path, {"diff", "--cached", "--name-only"});
    for (const auto& line : split_lines(staged.out))
        if (!trim(line).empty()) result.touched_files.push_back(trim(line));
    if (result.touched_files.empty()) {
        gitdetail::git(repo.path, {"revert", "--abort"});
        gitdetail::git_ok(repo.path, {"switch", base_branch});
        gitdetail::git(repo.path, {"branch", "-D", branch});
        fail(Errc::config_error,
             "reverting " + fix.commit_id + " produces no change against HEAD");
    }

    gitdetail::git_ok(repo.path,
                      {"commit", "-m", gitdetail::default_revert_message(result.touched_files)});
    result.diff = gitdetail::git_ok(repo.path, {"diff", base_head, "HEAD"}).out;
    gitdetail::git_ok(repo.path, {"switch", base_branch});
    result.mode = RevertMode::clean;
    result.validation = RevertValidation::pending;
    return result;
}

namespace gitdetail {

inline std::string extract_patch_candidate(const std::string& text) {
    const std::size_t fence = text.find("```diff");
    if (fence != std::string::npos) {
        const std::size_t start = text.find('\n', fence);
        if (start != std::string::npos) {
            const std::size_t end = text.find("```", start);
            if (end != std::string::npos) return text.substr(start + 1, end - start - 1);
        }
    }
    const std::size_t git_header = text.find("diff --git ");
    if (git_header != std::string::npos) return text.substr(git_header);
    const std::size_t bare = text.find("--- ");
    if (bare != std::string::npos) return text.substr(bare);
    return text;
}

} // namespace gitdetail

// LLM-assisted revert for the conflicted case. The backend must answer with
// a unified diff (fenced or raw) that applies to the current HEAD; a human
// still has to mark the result validated before campaigns may use it.
inline RevertResult assisted_revert(const RepoHandle& repo, const FixCommitRef& fix,
                                    Gateway& gateway, const std::string& model_id,
                                    const RoutingKey& routing, int max_attempts = 1) {
    require_sanitized(repo, "assisted_revert");
    auto lock = RepoLocks::acquire(repo.path);
    if (!commit_exists(repo.path, fix.commit_id))
        fail(Errc::config_error, "fix commit not in history: " + fix.commit_id);

    const std::string fix_diff = gitdetail::git_ok(repo.path, {"show", fix.commit_id}).out;
    const std::string prompt =
        "The commit below fixed " + fix.cve_id +
        " but no longer reverts cleanly because the surrounding code has changed.\n"
        "Produce a unified diff against the current HEAD that faithfully reverts the "
        "fixing logic of this commit. Respond with the diff inside a ```diff fence and "
        "nothing else.\n\nFixing commit:\n" +
        fix_diff;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        ChatJob job;
        job.model_id = model_id;
        job.routing = routing;
        job.messages = {{"user", prompt}};
        const ChatResult reply = gateway.complete(job);
        if (trim(reply.text).empty()) continue;

        std::string candidate = gitdetail::extract_patch_candidate(reply.text);
        if (!candidate.empty() && candidate.back() != '\n') candidate += '\n';
        const RunResult check = gitdetail::git(repo.path, {"apply", "--check", "-"}, candidate);
        if (!check.ok())
            fail(Errc::patch_rejected, "generated diff does not apply: " + trim(check.err));

        const std::string base_branch = current_branch(repo.path);
        const std::string base_head =
            trim(gitdetail::git_ok(repo.path, {"rev-parse", "HEAD"}).out);
        const std::string branch =
            "assisted-revert-" + gitdetail::sanitize_branch_component(
                                     fix.cve_id.empty() ? fix.commit_id.substr(0, 12) : fix.cve_id);
        gitdetail::git_ok(repo.path, {"switch", "-C", branch, base_head});
        gitdetail::git_ok(repo.path, {"apply", "--index", "-"}, candidate);

        RevertResult result;
        result.branch = branch;
        const RunResult staged = gitdetail::git_ok(repo.path, {"diff", "--cached", "--name-only"});
        for (const auto& line : split_lines(staged.out))
            if (!trim(line).empty()) result.touched_files.push_back(trim(line));
        gitdetail::git_ok(
            repo.path, {"commit", "-m", gitdetail::default_revert_message(result.touched_files)});
        result.diff = gitdetail::git_ok(repo.path, {"diff", base_head, "HEAD"}).out;
        gitdetail::git_ok(repo.path, {"switch", base_branch});
        result.mode = RevertMode::assisted;
        result.validation = RevertValidation::pending;
        return result;
    }
    fail(Errc::assist_exhausted,
         "no usable revert after " + std::to_string(max_attempts) + " attempts for " + fix.cve_id);
}

// Apply a stored revert diff onto base_rev in a scratch branch and return the
// resulting tree hash. Used to check the diff/apply round trip.
inline std::string apply_diff_tree(const RepoHandle& repo, const std::string& base_rev,
                                   const std::string& diff_text) {
    auto lock = RepoLocks::acquire(repo.path);
    const std::string base_branch = current_branch(repo.path);
    gitdetail::git_ok(repo.path, {"switch", "-C", "acrlab-apply-scratch", base_rev});
    std::string payload = diff_text;
    if (!payload.empty() && payload.back() != '\n') payload += '\n';
    const RunResult applied = gitdetail::git(repo.path, {"apply", "--index", "-"}, payload);
    if (!applied.ok()) {
        gitdetail::git(repo.path, {"reset", "--hard", "HEAD"});
        gitdetail::git_ok(repo.path, {"switch", base_branch});
        gitdetail::git(repo.path, {"branch", "-D", "acrlab-apply-scratch"});
        fail(Errc::patch_rejected, "stored diff no longer applies: " + trim(applied.err));
    }
    gitdetail::git_ok(repo.path, {"commit", "-m", "scratch apply"});
    const std::string tree = tree_hash(repo.path, "HEAD");
    gitdetail::git_ok(repo.path, {"switch", base_branch});
    gitdetail::git(repo.path, {"branch", "-D", "acrlab-apply-scratch"});
    return tree;
}

} // namespace acrlab
