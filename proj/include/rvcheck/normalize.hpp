#pragma once

#include <string>
#include <string_view>

namespace rvcheck {

// Canonical text form used for entity-answer comparison: compatibility fold
// (fullwidth forms, typographic quotes/dashes, unicode spaces, common Latin
// ligatures), lowercase, trimmed, internal whitespace collapsed to single
// spaces, surrounding quotes and terminal punctuation (.,!?;:) stripped.
// Idempotent: normalize(normalize(x)) == normalize(x).
std::string normalize(std::string_view text);

// True iff normalize(needle) occurs as a substring of normalize(haystack).
bool contains_normalized(std::string_view haystack, std::string_view needle);

}  // namespace rvcheck
