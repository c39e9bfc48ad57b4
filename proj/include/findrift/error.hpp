#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace findrift {

// Stable error identities. Each maps to a process exit code so scripted
// callers can distinguish config mistakes from provider trouble from
// invariant failures.
enum class ErrorCode {
    // corpus
    EmptyDocument,
    InvalidChunking,
    EmptyCorpus,
    DuplicateSnippetId,
    // provider
    ProviderUnreachable,
    ProviderRejected,
    ProviderTimeout,
    InvalidMock,
    InvalidDecodingConfig,
    // tasks
    UnboundPlaceholder,
    TemplateTampered,
    IoFailure,
    // metrics
    NoRuns,
    DegenerateTable,
    AlignmentError,
    InvalidRate,
    // invariants
    FixtureTampered,
    QueryTimeout,
    InvalidMarkers,
    // attestation
    DuplicateRun,
    CorruptTrace,
    StaleCorpus,
    // runner
    InvalidPlan,
    ConditionMismatch,
    ConfigError,
};

class HarnessError : public std::runtime_error {
public:
    HarnessError(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyDocument: return "EmptyDocument";
        case ErrorCode::InvalidChunking: return "InvalidChunking";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::DuplicateSnippetId: return "DuplicateSnippetId";
        case ErrorCode::ProviderUnreachable: return "ProviderUnreachable";
        case ErrorCode::ProviderRejected: return "ProviderRejected";
        case ErrorCode::ProviderTimeout: return "ProviderTimeout";
        case ErrorCode::InvalidMock: return "InvalidMock";
        case ErrorCode::InvalidDecodingConfig: return "InvalidDecodingConfig";
        case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
        case ErrorCode::TemplateTampered: return "TemplateTampered";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::NoRuns: return "NoRuns";
        case ErrorCode::DegenerateTable: return "DegenerateTable";
        case ErrorCode::AlignmentError: return "AlignmentError";
        case ErrorCode::InvalidRate: return "InvalidRate";
        case ErrorCode::FixtureTampered: return "FixtureTampered";
        case ErrorCode::QueryTimeout: return "QueryTimeout";
        case ErrorCode::InvalidMarkers: return "InvalidMarkers";
        case ErrorCode::DuplicateRun: return "DuplicateRun";
        case ErrorCode::CorruptTrace: return "CorruptTrace";
        case ErrorCode::StaleCorpus: return "StaleCorpus";
        case ErrorCode::InvalidPlan: return "InvalidPlan";
        case ErrorCode::ConditionMismatch: return "ConditionMismatch";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "UnknownError";
}

// CLI exit codes: 0 success, 2 invariant/acceptance failure,
// 3 provider failure, 4 config error.
inline int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ProviderUnreachable:
        case ErrorCode::ProviderRejected:
        case ErrorCode::ProviderTimeout:
            return 3;
        case ErrorCode::ConfigError:
        case ErrorCode::InvalidPlan:
        case ErrorCode::InvalidDecodingConfig:
        case ErrorCode::UnboundPlaceholder:
        case ErrorCode::InvalidMock:
        case ErrorCode::InvalidMarkers:
            return 4;
        default:
            return 2;
    }
}

}  // namespace findrift
