#pragma once

#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acrlab/util.hpp"

namespace acrlab {

// Append-only run store: one records.jsonl event log plus artifact files laid
// out under targets/<project>__<cve>/. Resumability is replay of the log.
class RunStore {
public:
    explicit RunStore(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
    }

    const fs::path& dir() const { return dir_; }

    void append_record(const json& record) {
        std::lock_guard<std::mutex> lock(mutex_);
        append_line(dir_ / "records.jsonl", record.dump());
    }

    std::vector<json> load_records() const {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<json> records;
        const fs::path path = dir_ / "records.jsonl";
        if (!fs::exists(path)) return records;
        for (const auto& line : split_lines(read_file(path))) {
            if (trim(line).empty()) continue;
            records.push_back(json::parse(line));
        }
        return records;
    }

    static std::string sanitize_component(std::string s) {
        for (auto& c : s)
            if (c == '/' || c == '\\' || c == ':') c = '_';
        return s;
    }

    fs::path target_dir(const std::string& project, const std::string& cve) const {
        return dir_ / "targets" / (sanitize_component(project) + "__" + sanitize_component(cve));
    }

    fs::path reports_dir() const { return dir_ / "reports"; }
    fs::path ledger_path() const { return dir_ / "ledger.jsonl"; }

private:
    fs::path dir_;
    mutable std::mutex mutex_;
};

} // namespace acrlab
