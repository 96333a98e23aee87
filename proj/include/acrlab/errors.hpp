#pragma once

#include <stdexcept>
#include <string>

namespace acrlab {

// Error taxonomy for the whole library. One exception type carrying a code
// keeps catch sites simple; the code is what tests and the CLI dispatch on.
enum class Errc {
    // gateway
    provider_error,
    script_exhausted,
    rate_limited,
    duplicate_script,
    // corpus
    malformed_layout,
    empty_corpus,
    insufficient_stratum,
    // framing / stats
    missing_cwe,
    empty_slice,
    missing_baseline,
    domain_error,
    unknown_cell,
    wrong_cell_kind,
    // repo forge
    not_a_repository,
    safety_violation,
    assist_exhausted,
    patch_rejected,
    // bias forge
    empty_change,
    missing_review,
    unparseable_generation,
    // acr harness
    no_review_step,
    malformed_workflow,
    review_empty,
    policy_abort,
    already_adapted,
    // campaign
    config_error,
    mismatched_targets,
    refuse_partial,
    aborted_by_operator,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::provider_error: return "ProviderError";
        case Errc::script_exhausted: return "ScriptExhausted";
        case Errc::rate_limited: return "RateLimited";
        case Errc::duplicate_script: return "DuplicateScript";
        case Errc::malformed_layout: return "MalformedLayout";
        case Errc::empty_corpus: return "EmptyCorpus";
        case Errc::insufficient_stratum: return "InsufficientStratum";
        case Errc::missing_cwe: return "MissingCwe";
        case Errc::empty_slice: return "EmptySlice";
        case Errc::missing_baseline: return "MissingBaseline";
        case Errc::domain_error: return "DomainError";
        case Errc::unknown_cell: return "UnknownCell";
        case Errc::wrong_cell_kind: return "WrongCellKind";
        case Errc::not_a_repository: return "NotARepository";
        case Errc::safety_violation: return "SafetyViolation";
        case Errc::assist_exhausted: return "AssistExhausted";
        case Errc::patch_rejected: return "PatchRejected";
        case Errc::empty_change: return "EmptyChange";
        case Errc::missing_review: return "MissingReview";
        case Errc::unparseable_generation: return "UnparseableGeneration";
        case Errc::no_review_step: return "NoReviewStep";
        case Errc::malformed_workflow: return "MalformedWorkflow";
        case Errc::review_empty: return "ReviewEmpty";
        case Errc::policy_abort: return "PolicyAbort";
        case Errc::already_adapted: return "AlreadyAdapted";
        case Errc::config_error: return "ConfigError";
        case Errc::mismatched_targets: return "MismatchedTargets";
        case Errc::refuse_partial: return "RefusePartial";
        case Errc::aborted_by_operator: return "AbortedByOperator";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace acrlab
