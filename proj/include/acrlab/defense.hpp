#pragma once

#include <optional>
#include <string>
#include <vector>

#include "acrlab/acr.hpp"
#include "acrlab/bias.hpp"
#include "acrlab/errors.hpp"
#include "acrlab/util.hpp"

namespace acrlab {

enum class DebiasLevel { d1, d2 };

inline const char* debias_name(DebiasLevel level) {
    return level == DebiasLevel::d1 ? "D-1" : "D-2";
}

inline constexpr const char* kRedactedDescriptionName = "PR-description-redacted.txt";
inline constexpr const char* kDebiasMarker = "--- debias instruction ---";

// Debiased-1 redacts the PR description (empty file, diff untouched);
// Debiased-2 additionally appends a fixed instruction block telling the
// reviewer to ignore commit metadata and judge only the code diff. Both are
// idempotent. Comment injections live in the diff and are deliberately left
// alone.
inline std::pair<ReviewJobSpec, PrMetadata> debias(ReviewJobSpec job, PrMetadata metadata,
                                                   DebiasLevel level,
                                                   const fs::path& templates_dir) {
    // D1 redaction (D2 strictly extends it)
    if (job.description_path.filename() != kRedactedDescriptionName) {
        const fs::path redacted = job.description_path.parent_path() / kRedactedDescriptionName;
        write_file(redacted, "");
        job.description_path = redacted;
    } else {
        write_file(job.description_path, "");
    }
    metadata.description.clear();

    if (level == DebiasLevel::d2 && job.review_prompt.find(kDebiasMarker) == std::string::npos) {
        job.review_prompt += "\n\n";
        job.review_prompt += kDebiasMarker;
        job.review_prompt += "\n";
        job.review_prompt += read_file(templates_dir / "prompts" / "debias2.txt");
    }
    return {std::move(job), std::move(metadata)};
}

// Escalation schedule per target: defenses run only against successful
// attacks, and D-2 is tested only when D-1 did not already reject.
inline std::vector<DebiasLevel> defense_escalation(ReviewVerdict attack_verdict,
                                                   std::optional<ReviewVerdict> d1_verdict) {
    std::vector<DebiasLevel> schedule;
    if (attack_verdict != ReviewVerdict::approve) return schedule;
    schedule.push_back(DebiasLevel::d1);
    if (d1_verdict && *d1_verdict != ReviewVerdict::reject) schedule.push_back(DebiasLevel::d2);
    return schedule;
}

// Incremental form used by the campaign loop: the next defense to run, or
// nothing when the schedule is finished.
inline std::optional<DebiasLevel> next_defense_step(ReviewVerdict attack_verdict,
                                                    std::optional<ReviewVerdict> d1_verdict) {
    if (attack_verdict != ReviewVerdict::approve) return std::nullopt;
    if (!d1_verdict) return DebiasLevel::d1;
    if (*d1_verdict != ReviewVerdict::reject) return DebiasLevel::d2;
    return std::nullopt;
}

} // namespace acrlab
