#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "acrlab/corpus.hpp"
#include "acrlab/errors.hpp"
#include "acrlab/gateway.hpp"
#include "acrlab/stats.hpp"
#include "acrlab/util.hpp"

namespace acrlab {

// ---------------------------------------------------------------------------
// Conditions and prompts
// ---------------------------------------------------------------------------

enum class FramingCondition { neutral, weak_bug, strong_bug, weak_bug_free, strong_bug_free };

inline const std::vector<FramingCondition>& all_conditions() {
    static const std::vector<FramingCondition> conditions = {
        FramingCondition::neutral, FramingCondition::weak_bug, FramingCondition::strong_bug,
        FramingCondition::weak_bug_free, FramingCondition::strong_bug_free};
    return conditions;
}

inline const char* condition_slug(FramingCondition c) {
    switch (c) {
        case FramingCondition::neutral: return "neutral";
        case FramingCondition::weak_bug: return "weak_bug";
        case FramingCondition::strong_bug: return "strong_bug";
        case FramingCondition::weak_bug_free: return "weak_bug_free";
        case FramingCondition::strong_bug_free: return "strong_bug_free";
    }
    return "neutral";
}

inline const char* condition_display(FramingCondition c) {
    switch (c) {
        case FramingCondition::neutral: return "Neutral";
        case FramingCondition::weak_bug: return "Weak Bug";
        case FramingCondition::strong_bug: return "Strong Bug";
        case FramingCondition::weak_bug_free: return "Weak Bug-free";
        case FramingCondition::strong_bug_free: return "Strong Bug-free";
    }
    return "Neutral";
}

inline std::optional<FramingCondition> condition_from_slug(const std::string& slug) {
    for (const auto c : all_conditions())
        if (slug == condition_slug(c)) return c;
    return std::nullopt;
}

inline bool condition_requires_cwe(FramingCondition c) {
    return c == FramingCondition::strong_bug || c == FramingCondition::strong_bug_free;
}

inline std::string cwe_display_name(int cwe_id) {
    switch (cwe_id) {
        case 79: return "XSS";
        case 89: return "SQL Injection";
        case 125: return "Buffer Read";
        case 787: return "Buffer Write";
        default: return "CWE-" + std::to_string(cwe_id);
    }
}

// Prompt = shared task block + condition framing block + shared output-format
// block. The task and format blocks are byte-identical across conditions for
// the same file, so any two conditions differ only in the framing block.
inline std::string render_framing_prompt(FramingCondition condition,
                                         const std::string& file_content, int cwe_id,
                                         const std::string& language,
                                         const fs::path& templates_dir) {
    if (file_content.empty()) fail(Errc::config_error, "render_framing_prompt: empty file");
    if (condition_requires_cwe(condition) && cwe_id <= 0)
        fail(Errc::missing_cwe, std::string("condition ") + condition_display(condition) +
                                    " needs a CWE to instantiate");

    const fs::path dir = templates_dir / "framing";
    std::string task = read_file(dir / "task.txt");
    task = replace_all(std::move(task), "{LANGUAGE}", language);
    task = replace_all(std::move(task), "{CODE}", file_content);

    std::string framing = read_file(dir / (std::string(condition_slug(condition)) + ".txt"));
    framing = replace_all(std::move(framing), "{CWE_NAME}", cwe_display_name(cwe_id));
    framing = replace_all(std::move(framing), "{CWE_ID}", std::to_string(cwe_id));

    return task + framing + read_file(dir / "format.txt");
}

// ---------------------------------------------------------------------------
// Verdict parsing
// ---------------------------------------------------------------------------

enum class Decision { vulnerable, secure };
enum class ParseStatus { clean, repaired, unparseable };

struct DetectionVerdict {
    std::optional<Decision> decision;
    std::string justification;
    ParseStatus parse_status = ParseStatus::unparseable;
};

// First line matching "VERDICT: <word>" decides; clean when it is the first
// non-empty line, repaired when prose precedes it, unparseable when absent or
// the word is neither VULNERABLE nor SECURE.
inline DetectionVerdict parse_verdict(const std::string& response_text) {
    DetectionVerdict verdict;
    const auto lines = split_lines(response_text);

    std::size_t marker_at = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string t = trim(lines[i]);
        if (to_lower(t).starts_with("verdict:")) {
            marker_at = i;
            break;
        }
    }
    if (marker_at == lines.size()) return verdict;

    const std::string token = to_lower(trim(trim(lines[marker_at]).substr(8)));
    if (token.starts_with("vulnerable")) verdict.decision = Decision::vulnerable;
    else if (token.starts_with("secure")) verdict.decision = Decision::secure;
    else return verdict;

    std::size_t first_content = 0;
    while (first_content < lines.size() && trim(lines[first_content]).empty()) ++first_content;
    verdict.parse_status = marker_at == first_content ? ParseStatus::clean : ParseStatus::repaired;

    std::vector<std::string> rest(lines.begin() + static_cast<long>(marker_at) + 1, lines.end());
    std::string justification = join(rest, "\n");
    const std::string lowered = to_lower(justification);
    const std::size_t j = lowered.find("justification:");
    if (j != std::string::npos) justification = justification.substr(j + 14);
    verdict.justification = trim(justification);
    return verdict;
}

// ---------------------------------------------------------------------------
// Grid execution
// ---------------------------------------------------------------------------

enum class FileRole { vulnerable, patched };

inline const char* role_name(FileRole r) { return r == FileRole::vulnerable ? "vulnerable" : "patched"; }

struct FramingCell {
    std::string model_id;
    FramingCondition condition = FramingCondition::neutral;
    std::string pair_id;
    FileRole role = FileRole::vulnerable;
    DetectionVerdict verdict;
    std::string transcript_ref;
    std::string error_note;

    std::string key() const {
        return model_id + "|" + condition_slug(condition) + "|" + pair_id + "|" + role_name(role);
    }
};

inline json cell_to_json(const FramingCell& cell) {
    json j = {{"model", cell.model_id},
              {"condition", condition_slug(cell.condition)},
              {"pair", cell.pair_id},
              {"role", role_name(cell.role)},
              {"parse_status", cell.verdict.parse_status == ParseStatus::clean      ? "clean"
                               : cell.verdict.parse_status == ParseStatus::repaired ? "repaired"
                                                                                    : "unparseable"},
              {"justification", cell.verdict.justification},
              {"transcript_ref", cell.transcript_ref},
              {"error_note", cell.error_note}};
    if (cell.verdict.decision)
        j["decision"] = *cell.verdict.decision == Decision::vulnerable ? "vulnerable" : "secure";
    return j;
}

inline FramingCell cell_from_json(const json& j) {
    FramingCell cell;
    cell.model_id = j.value("model", "");
    cell.condition = condition_from_slug(j.value("condition", "neutral"))
                         .value_or(FramingCondition::neutral);
    cell.pair_id = j.value("pair", "");
    cell.role = j.value("role", "vulnerable") == std::string("patched") ? FileRole::patched
                                                                        : FileRole::vulnerable;
    const std::string status = j.value("parse_status", "unparseable");
    cell.verdict.parse_status = status == "clean"      ? ParseStatus::clean
                                : status == "repaired" ? ParseStatus::repaired
                                                       : ParseStatus::unparseable;
    if (j.contains("decision"))
        cell.verdict.decision = j["decision"] == std::string("vulnerable") ? Decision::vulnerable
                                                                           : Decision::secure;
    cell.verdict.justification = j.value("justification", "");
    cell.transcript_ref = j.value("transcript_ref", "");
    cell.error_note = j.value("error_note", "");
    return cell;
}

inline long grid_cardinality(long models, long conditions, long files) {
    return models * conditions * files;
}

struct GridRunStats {
    std::size_t total_cells = 0;
    std::size_t new_backend_calls = 0;
    std::size_t resumed_cells = 0;
};

// Execute the model x condition x file grid against the gateway. Cells are
// persisted one JSONL line each as they finish; rerunning with the same store
// skips completed cells. Per-cell provider failures become unparseable cells
// with an error note; configuration errors and exhausted mock scripts abort.
inline std::vector<FramingCell> run_grid(const std::vector<std::string>& models,
                                         const std::vector<FramingCondition>& conditions,
                                         const std::vector<FilePair>& sample, Gateway& gateway,
                                         const fs::path& store_dir,
                                         const std::string& campaign_id, int max_parallel = 4,
                                         const fs::path& templates_dir = "templates",
                                         GridRunStats* stats_out = nullptr) {
    if (sample.empty()) fail(Errc::config_error, "run_grid: empty sample");
    if (models.empty() || conditions.empty())
        fail(Errc::config_error, "run_grid: no models or conditions");
    for (const auto& m : models)
        if (!gateway.has_profile(m)) fail(Errc::config_error, "no profile for model " + m);

    const fs::path cells_path = store_dir / "cells.jsonl";
    std::map<std::string, FramingCell> existing;
    if (fs::exists(cells_path))
        for (const auto& line : split_lines(read_file(cells_path))) {
            if (trim(line).empty()) continue;
            FramingCell cell = cell_from_json(json::parse(line));
            existing[cell.key()] = std::move(cell);
        }

    struct Task {
        const FilePair* pair;
        FileRole role;
        std::string model;
        FramingCondition condition;
    };
    std::vector<Task> tasks;
    for (const auto& model : models)
        for (const auto condition : conditions)
            for (const auto& pair : sample)
                for (const auto role : {FileRole::vulnerable, FileRole::patched})
                    tasks.push_back({&pair, role, model, condition});

    std::mutex io_mutex;
    std::vector<FramingCell> fresh;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> new_calls{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& task = tasks[i];
            FramingCell cell;
            cell.model_id = task.model;
            cell.condition = task.condition;
            cell.pair_id = task.pair->pair_id;
            cell.role = task.role;
            {
                std::lock_guard<std::mutex> g(io_mutex);
                if (existing.count(cell.key())) continue;
            }

            const fs::path file_path = task.role == FileRole::vulnerable
                                           ? task.pair->vulnerable_path
                                           : task.pair->patched_path;
            const std::string content = read_file(file_path);
            const std::string prompt = render_framing_prompt(
                task.condition, content, task.pair->cwe_id, task.pair->language, templates_dir);

            ChatJob job;
            job.model_id = task.model;
            job.routing = {campaign_id, cell.pair_id + "/" + role_name(task.role),
                           std::string("bench/") + task.model + "/" + condition_slug(task.condition)};
            job.messages = {{"user", prompt}};

            try {
                new_calls.fetch_add(1);
                const ChatResult reply = gateway.complete(job);
                cell.verdict = parse_verdict(reply.text);
                const std::string blob = fnv1a64_hex(reply.text) + ".txt";
                write_file(store_dir / "transcripts" / blob, reply.text);
                cell.transcript_ref = "transcripts/" + blob;
            } catch (const Error& e) {
                if (e.code() == Errc::script_exhausted || e.code() == Errc::config_error) throw;
                cell.verdict = DetectionVerdict{};
                cell.error_note = e.what();
            }

            std::lock_guard<std::mutex> g(io_mutex);
            append_line(cells_path, cell_to_json(cell).dump());
            fresh.push_back(cell);
        }
    };

    const int threads = std::max(1, std::min<int>(max_parallel, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&]() {
            try {
                worker();
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);

    std::vector<FramingCell> cells;
    for (auto& [key, cell] : existing) cells.push_back(std::move(cell));
    cells.insert(cells.end(), fresh.begin(), fresh.end());
    std::sort(cells.begin(), cells.end(),
              [](const FramingCell& a, const FramingCell& b) { return a.key() < b.key(); });

    if (stats_out) {
        stats_out->total_cells = cells.size();
        stats_out->new_backend_calls = new_calls.load();
        stats_out->resumed_cells = existing.size();
    }
    return cells;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct RateSlice {
    long numerator = 0;
    long denominator = 0;
    double rate = 0.0; // numerator / denominator
};

// Detection rate on vulnerable files / true-negative rate on patched files.
// Unparseable cells stay in the denominator and never count as correct.
inline RateSlice detection_rate(const std::vector<FramingCell>& cells, const std::string& model,
                                FramingCondition condition, FileRole role) {
    RateSlice slice;
    for (const auto& cell : cells) {
        if (cell.model_id != model || cell.condition != condition || cell.role != role) continue;
        ++slice.denominator;
        if (!cell.verdict.decision) continue;
        const Decision want =
            role == FileRole::vulnerable ? Decision::vulnerable : Decision::secure;
        if (*cell.verdict.decision == want) ++slice.numerator;
    }
    if (slice.denominator == 0)
        fail(Errc::empty_slice, std::string("no cells for ") + model + "/" +
                                    condition_display(condition) + "/" + role_name(role));
    slice.rate = static_cast<double>(slice.numerator) / static_cast<double>(slice.denominator);
    return slice;
}

inline double delta_vs_neutral_pp(const RateSlice& condition_rate, const RateSlice& neutral_rate) {
    return (condition_rate.rate - neutral_rate.rate) * 100.0;
}

// ---------------------------------------------------------------------------
// Justification labels (manual validation record store)
// ---------------------------------------------------------------------------

struct JustificationLabel {
    std::string cell_key;
    std::string label; // "correct" | "incorrect" | "generic"
    std::string annotator;
    std::string note;
};

class LabelStore {
public:
    explicit LabelStore(fs::path path) : path_(std::move(path)) {
        if (!fs::exists(path_)) return;
        for (const auto& line : split_lines(read_file(path_))) {
            if (trim(line).empty()) continue;
            const json j = json::parse(line);
            JustificationLabel label{j.value("cell", ""), j.value("label", ""),
                                     j.value("annotator", ""), j.value("note", "")};
            labels_[label.cell_key + "|" + label.annotator] = label;
        }
    }

    // Upsert semantics per (cell, annotator). The referenced cell must be a
    // Vulnerable verdict on a vulnerable file.
    void record(const JustificationLabel& label, const std::vector<FramingCell>& cells) {
        if (label.label != "correct" && label.label != "incorrect" && label.label != "generic")
            fail(Errc::config_error, "unknown label kind: " + label.label);
        const FramingCell* cell = nullptr;
        for (const auto& c : cells)
            if (c.key() == label.cell_key) {
                cell = &c;
                break;
            }
        if (!cell) fail(Errc::unknown_cell, "no such cell: " + label.cell_key);
        if (cell->role != FileRole::vulnerable || !cell->verdict.decision ||
            *cell->verdict.decision != Decision::vulnerable)
            fail(Errc::wrong_cell_kind,
                 "labels apply to Vulnerable verdicts on vulnerable files: " + label.cell_key);
        labels_[label.cell_key + "|" + label.annotator] = label;
        if (!path_.empty())
            append_line(path_, json{{"cell", label.cell_key},
                                    {"label", label.label},
                                    {"annotator", label.annotator},
                                    {"note", label.note}}
                                   .dump());
    }

    std::size_t size() const { return labels_.size(); }

    // Fractions are over labeled cells only (per model).
    std::map<std::string, std::map<std::string, long>> summarize(
        const std::vector<FramingCell>& cells) const {
        std::map<std::string, std::string> cell_model;
        for (const auto& c : cells) cell_model[c.key()] = c.model_id;
        std::map<std::string, std::map<std::string, long>> counts;
        for (const auto& [key, label] : labels_) {
            auto it = cell_model.find(label.cell_key);
            if (it == cell_model.end()) continue;
            ++counts[it->second][label.label];
        }
        return counts;
    }

private:
    fs::path path_;
    std::map<std::string, JustificationLabel> labels_; // key: cell|annotator
};

// ---------------------------------------------------------------------------
// Per-condition accuracy report
// ---------------------------------------------------------------------------

struct BiasReportEntry {
    std::string model;
    FramingCondition condition;
    FileRole role;
    RateSlice slice;
    double delta_pp = 0.0;       // vs neutral, percentage points
    SignificanceResult sig;      // vs neutral (non-neutral conditions only)
};

struct BiasReport {
    std::vector<BiasReportEntry> entries;
    long comparisons_m = 0;
};

inline BiasReport compute_bias_report(const std::vector<FramingCell>& cells,
                                      const std::vector<std::string>& models,
                                      const std::vector<FramingCondition>& conditions,
                                      long bonferroni_m = 0) {
    BiasReport report;
    const std::vector<FileRole> roles = {FileRole::vulnerable, FileRole::patched};

    if (bonferroni_m <= 0) {
        long m = 0;
        for (const auto& model : models) {
            (void)model;
            for (const auto c : conditions)
                if (c != FramingCondition::neutral) m += static_cast<long>(roles.size());
        }
        bonferroni_m = std::max(1L, m);
    }
    report.comparisons_m = bonferroni_m;

    for (const auto& model : models) {
        std::map<FileRole, RateSlice> neutral;
        for (const auto role : roles) {
            try {
                neutral[role] = detection_rate(cells, model, FramingCondition::neutral, role);
            } catch (const Error& e) {
                if (e.code() == Errc::empty_slice)
                    fail(Errc::missing_baseline, "no Neutral cells for " + model);
                throw;
            }
        }
        for (const auto condition : conditions) {
            for (const auto role : roles) {
                BiasReportEntry entry;
                entry.model = model;
                entry.condition = condition;
                entry.role = role;
                entry.slice = condition == FramingCondition::neutral
                                  ? neutral[role]
                                  : detection_rate(cells, model, condition, role);
                if (condition != FramingCondition::neutral) {
                    if (neutral.find(role) == neutral.end())
                        fail(Errc::missing_baseline, "no neutral rate for " + model);
                    entry.delta_pp = delta_vs_neutral_pp(entry.slice, neutral[role]);
                    entry.sig = bonferroni_adjust(
                        two_proportion_ztest(entry.slice.numerator, entry.slice.denominator,
                                             neutral[role].numerator, neutral[role].denominator),
                        bonferroni_m);
                }
                report.entries.push_back(std::move(entry));
            }
        }
    }
    return report;
}

inline std::string render_bias_report_markdown(const BiasReport& report,
                                               const std::vector<std::string>& models,
                                               const std::vector<FramingCondition>& conditions) {
    std::string md = "# Detection accuracy by framing condition\n\n";
    md += "Bonferroni family size m = " + std::to_string(report.comparisons_m) + "\n\n";
    md += "| Model |";
    for (const auto c : conditions)
        md += std::string(" ") + condition_display(c) + " Vuln. | " + condition_display(c) +
              " Fixed |";
    md += "\n|---|";
    for (std::size_t i = 0; i < conditions.size() * 2; ++i) md += "---|";
    md += "\n";

    auto find_entry = [&report](const std::string& model, FramingCondition c,
                                FileRole role) -> const BiasReportEntry* {
        for (const auto& e : report.entries)
            if (e.model == model && e.condition == c && e.role == role) return &e;
        return nullptr;
    };

    for (const auto& model : models) {
        md += "| " + model + " |";
        for (const auto c : conditions) {
            for (const auto role : {FileRole::vulnerable, FileRole::patched}) {
                const BiasReportEntry* e = find_entry(model, c, role);
                if (!e) {
                    md += " - |";
                    continue;
                }
                std::string cell = format_fixed(e->slice.rate * 100.0, 1) + "%";
                if (c != FramingCondition::neutral) {
                    cell += " (" + format_signed(e->delta_pp, 1) + ")";
                    cell += marker_text(e->sig.marker);
                }
                md += " " + cell + " |";
            }
        }
        md += "\n";
    }
    return md;
}

inline std::string render_bias_report_csv(const BiasReport& report) {
    std::string csv =
        "model,condition,role,numerator,denominator,rate_pct,delta_pp,z,p_raw,p_adj,m,marker\n";
    for (const auto& e : report.entries) {
        csv += e.model;
        csv += ",";
        csv += condition_display(e.condition);
        csv += ",";
        csv += role_name(e.role);
        csv += "," + std::to_string(e.slice.numerator) + "," + std::to_string(e.slice.denominator);
        csv += "," + format_fixed(e.slice.rate * 100.0, 4);
        if (e.condition == FramingCondition::neutral) {
            csv += ",,,,,";
            csv += std::to_string(report.comparisons_m);
            csv += ",";
        } else {
            char zbuf[64], pbuf[64], abuf[64];
            std::snprintf(zbuf, sizeof(zbuf), "%.6f", e.sig.z);
            std::snprintf(pbuf, sizeof(pbuf), "%.6e", e.sig.p_raw);
            std::snprintf(abuf, sizeof(abuf), "%.6e", e.sig.p_adjusted);
            csv += "," + format_fixed(e.delta_pp, 4) + "," + zbuf + "," + pbuf + "," + abuf + "," +
                   std::to_string(report.comparisons_m) + "," + marker_text(e.sig.marker);
        }
        csv += "\n";
    }
    return csv;
}

} // namespace acrlab
