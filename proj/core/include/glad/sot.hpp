#pragma once

#include <string>
#include <vector>

#include "glad/error.hpp"

namespace glad {

using Words = std::vector<std::string>;

/// One speaker's transcript with its utterance start time in seconds.
struct SpeakerUtterance {
  Words words;
  double start_time = 0.0;
};

/// A serialized multi-talker transcript: word tokens with speaker-change
/// separator tokens between consecutive speakers. Well-formed sequences
/// never begin or end with a separator and never contain two adjacent ones;
/// model output may violate that, which the lenient parser tolerates.
struct SotSequence {
  std::vector<std::string> tokens;
  std::string separator = "$";

  /// Tokens joined by single spaces.
  std::string text() const;
  /// Splits on runs of whitespace.
  static SotSequence from_text(const std::string& text,
                               std::string separator = "$");
};

/// Serializes to one token stream: utterances sorted ascending by start time
/// (ties keep list order), one separator token between consecutive speakers.
/// Rejects an empty utterance list, empty/whitespace words and words equal
/// to or containing the separator.
SotSequence serialize(const std::vector<SpeakerUtterance>& utterances,
                      const std::string& separator = "$");

/// Strict split on separator tokens. A leading, trailing or doubled
/// separator throws MalformedSequenceError; otherwise returns the
/// separator_count + 1 non-empty segments.
std::vector<Words> deserialize(const SotSequence& seq);

struct LenientParse {
  std::vector<Words> segments;  // empty segments dropped
  std::size_t warnings = 0;     // number of empty segments dropped
};

/// Tolerant split for model hypotheses: empty segments are dropped and
/// counted instead of raising.
LenientParse deserialize_lenient(const SotSequence& seq);

}  // namespace glad
