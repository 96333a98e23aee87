#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "acrlab/errors.hpp"
#include "acrlab/util.hpp"

namespace acrlab {

// Just enough unified-diff structure to extract touched files and splice
// comment lines into hunks; everything else round-trips verbatim.
struct DiffLine {
    char origin = ' '; // ' ', '+', '-', '\'
    std::string text;  // without the origin character
};

struct DiffHunk {
    long old_start = 0;
    long old_count = 0;
    long new_start = 0;
    long new_count = 0;
    std::string heading; // text after the closing @@
    std::vector<DiffLine> lines;
};

struct FileDiff {
    std::string old_path; // as written, e.g. "a/src/x.ts"
    std::string new_path;
    std::vector<std::string> header_lines; // diff --git / index / mode lines
    std::vector<DiffHunk> hunks;
};

struct UnifiedDiff {
    std::vector<FileDiff> files;
};

namespace detail {

inline bool parse_range(const std::string& token, long& start, long& count) {
    // token like "-12,7" or "+3"
    const char* p = token.c_str() + 1;
    char* end = nullptr;
    start = std::strtol(p, &end, 10);
    if (end == p) return false;
    if (*end == ',') {
        const char* q = end + 1;
        count = std::strtol(q, &end, 10);
        if (end == q) return false;
    } else {
        count = 1;
    }
    return *end == '\0';
}

inline bool parse_hunk_header(const std::string& line, DiffHunk& hunk) {
    if (!line.starts_with("@@ ")) return false;
    const std::size_t close = line.find(" @@", 3);
    if (close == std::string::npos) return false;
    const std::string ranges = line.substr(3, close - 3);
    const std::size_t space = ranges.find(' ');
    if (space == std::string::npos) return false;
    if (!parse_range(ranges.substr(0, space), hunk.old_start, hunk.old_count)) return false;
    if (!parse_range(ranges.substr(space + 1), hunk.new_start, hunk.new_count)) return false;
    hunk.heading = line.substr(close + 3);
    return true;
}

inline std::string strip_prefix(const std::string& path) {
    if (path.size() > 2 && (path.starts_with("a/") || path.starts_with("b/")))
        return path.substr(2);
    return path;
}

} // namespace detail

inline UnifiedDiff parse_unified_diff(const std::string& text) {
    UnifiedDiff diff;
    FileDiff* file = nullptr;
    DiffHunk* hunk = nullptr;

    for (const auto& line : split_lines(text)) {
        if (line.starts_with("diff --git ") || (line.starts_with("--- ") && !hunk)) {
            if (line.starts_with("diff --git ")) {
                diff.files.emplace_back();
                file = &diff.files.back();
                hunk = nullptr;
                file->header_lines.push_back(line);
                continue;
            }
            // bare ---/+++ pair without a diff --git header
            if (!file || !file->hunks.empty() || !file->old_path.empty()) {
                diff.files.emplace_back();
                file = &diff.files.back();
                hunk = nullptr;
            }
            file->old_path = line.substr(4);
            continue;
        }
        if (!file) continue;
        if (line.starts_with("--- ")) {
            file->old_path = line.substr(4);
            hunk = nullptr;
            continue;
        }
        if (line.starts_with("+++ ")) {
            file->new_path = line.substr(4);
            hunk = nullptr;
            continue;
        }
        DiffHunk parsed;
        if (detail::parse_hunk_header(line, parsed)) {
            file->hunks.push_back(std::move(parsed));
            hunk = &file->hunks.back();
            continue;
        }
        if (hunk) {
            if (line.empty()) {
                hunk->lines.push_back({' ', ""});
            } else if (line[0] == '+' || line[0] == '-' || line[0] == ' ' || line[0] == '\\') {
                hunk->lines.push_back({line[0], line.substr(1)});
            }
            continue;
        }
        file->header_lines.push_back(line);
    }
    return diff;
}

inline std::string to_string(const UnifiedDiff& diff) {
    std::string out;
    for (const auto& file : diff.files) {
        for (const auto& h : file.header_lines) out += h + "\n";
        if (!file.old_path.empty()) out += "--- " + file.old_path + "\n";
        if (!file.new_path.empty()) out += "+++ " + file.new_path + "\n";
        for (const auto& hunk : file.hunks) {
            char header[80];
            std::snprintf(header, sizeof(header), "@@ -%ld,%ld +%ld,%ld @@", hunk.old_start,
                          hunk.old_count, hunk.new_start, hunk.new_count);
            out += header;
            out += hunk.heading;
            out += "\n";
            for (const auto& l : hunk.lines) {
                out += l.origin;
                out += l.text;
                out += "\n";
            }
        }
    }
    return out;
}

// Repo-relative paths of the files a diff touches, in diff order.
inline std::vector<std::string> touched_files(const UnifiedDiff& diff) {
    std::vector<std::string> files;
    for (const auto& f : diff.files) {
        std::string path = detail::strip_prefix(f.new_path);
        if (path.empty() || path == "/dev/null") path = detail::strip_prefix(f.old_path);
        if (!path.empty() && path != "/dev/null") files.push_back(path);
    }
    return files;
}

inline std::vector<std::string> touched_basenames(const UnifiedDiff& diff) {
    std::vector<std::string> names;
    for (const auto& p : touched_files(diff)) names.push_back(fs::path(p).filename().string());
    return names;
}

// Prepend comment lines as additions at the top of the file's first hunk.
// The hunk's new-side count grows and later hunks of the same file shift.
inline bool inject_top_comments(UnifiedDiff& diff, const std::string& repo_relative_file,
                                const std::vector<std::string>& comment_lines) {
    for (auto& file : diff.files) {
        std::string path = detail::strip_prefix(file.new_path);
        if (path != repo_relative_file || file.hunks.empty()) continue;
        DiffHunk& first = file.hunks.front();
        for (std::size_t i = 0; i < comment_lines.size(); ++i)
            first.lines.insert(first.lines.begin() + static_cast<long>(i),
                               DiffLine{'+', comment_lines[i]});
        const long shift = static_cast<long>(comment_lines.size());
        first.new_count += shift;
        for (std::size_t h = 1; h < file.hunks.size(); ++h) file.hunks[h].new_start += shift;
        return true;
    }
    return false;
}

} // namespace acrlab
