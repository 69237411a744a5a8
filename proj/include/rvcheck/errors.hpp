#pragma once

#include <stdexcept>
#include <string>

namespace rvcheck {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- data / input errors ----

struct EmptyPassage : Error {
    EmptyPassage() : Error("passage has no sentences") {}
};

struct EmptyInput : Error {
    explicit EmptyInput(const std::string& what = "empty input") : Error(what) {}
};

struct EmptyCalibration : Error {
    EmptyCalibration() : Error("no calibration scores given") {}
};

struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& what = "label lists differ in length") : Error(what) {}
};

struct UnequalRaterCounts : Error {
    explicit UnequalRaterCounts(const std::string& what = "items rated by different numbers of raters") : Error(what) {}
};

struct SchemaViolation : Error {
    explicit SchemaViolation(const std::string& what) : Error(what) {}
};

struct UnknownRecordId : Error {
    explicit UnknownRecordId(const std::string& id) : Error("results reference unknown record id: " + id), id(id) {}
    std::string id;
};

struct InsufficientCandidates : Error {
    explicit InsufficientCandidates(const std::string& bucket, size_t have, size_t want)
        : Error("bucket " + bucket + " has " + std::to_string(have) + " candidates, need " + std::to_string(want)),
          bucket(bucket) {}
    std::string bucket;
};

// ---- provider errors ----

struct TransportError : Error {
    explicit TransportError(const std::string& what) : Error(what) {}
};

struct AuthError : Error {
    explicit AuthError(const std::string& what) : Error(what) {}
};

struct RateLimited : Error {
    explicit RateLimited(const std::string& what) : Error(what) {}
};

// ---- pipeline content errors (become NonFactual verdicts inside detect loops) ----

struct ParseFailure : Error {
    explicit ParseFailure(const std::string& what) : Error(what) {}
};

struct NoRequirementsParsed : ParseFailure {
    NoRequirementsParsed() : ParseFailure("no enumerated requirement lines found") {}
};

struct LeakageGuardFailure : Error {
    explicit LeakageGuardFailure(const std::string& entity)
        : Error("generated question still contains the entity name: " + entity) {}
};

}  // namespace rvcheck
