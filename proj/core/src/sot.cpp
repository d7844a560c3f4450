#include "glad/sot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

namespace glad {

std::string SotSequence::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

SotSequence SotSequence::from_text(const std::string& text,
                                   std::string separator) {
  SotSequence seq;
  seq.separator = std::move(separator);
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) seq.tokens.push_back(tok);
  return seq;
}

namespace {

void check_word(const std::string& word, const std::string& separator) {
  if (word.empty()) {
    throw InvalidInputError("serialize: empty word token");
  }
  if (std::any_of(word.begin(), word.end(),
                  [](unsigned char c) { return std::isspace(c); })) {
    throw InvalidInputError("serialize: word '" + word +
                            "' contains whitespace");
  }
  if (word.find(separator) != std::string::npos) {
    throw InvalidInputError("serialize: word '" + word +
                            "' contains the separator token '" + separator +
                            "'");
  }
}

}  // namespace

SotSequence serialize(const std::vector<SpeakerUtterance>& utterances,
                      const std::string& separator) {
  if (utterances.empty()) {
    throw InvalidInputError("serialize: empty utterance list");
  }
  if (separator.empty()) {
    throw InvalidInputError("serialize: empty separator token");
  }
  for (const SpeakerUtterance& u : utterances) {
    if (u.words.empty()) {
      throw InvalidInputError("serialize: speaker with no words");
    }
    if (!std::isfinite(u.start_time)) {
      throw InvalidInputError("serialize: non-finite start time");
    }
    for (const std::string& w : u.words) check_word(w, separator);
  }
  // Chronological speaker order; stable so equal start times keep list order.
  std::vector<std::size_t> order(utterances.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return utterances[a].start_time < utterances[b].start_time;
  });

  SotSequence seq;
  seq.separator = separator;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i) seq.tokens.push_back(separator);
    const Words& w = utterances[order[i]].words;
    seq.tokens.insert(seq.tokens.end(), w.begin(), w.end());
  }
  return seq;
}

namespace {

std::vector<Words> split_segments(const SotSequence& seq) {
  std::vector<Words> segments(1);
  for (const std::string& tok : seq.tokens) {
    if (tok == seq.separator) {
      segments.emplace_back();
    } else {
      segments.back().push_back(tok);
    }
  }
  return segments;
}

}  // namespace

std::vector<Words> deserialize(const SotSequence& seq) {
  if (seq.tokens.empty()) {
    throw MalformedSequenceError("deserialize: empty sequence");
  }
  std::vector<Words> segments = split_segments(seq);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].empty()) {
      const char* where = i == 0                    ? "leading"
                          : i + 1 == segments.size() ? "trailing"
                                                     : "adjacent";
      throw MalformedSequenceError(std::string("deserialize: ") + where +
                                   " separator produces an empty speaker "
                                   "segment");
    }
  }
  return segments;
}

LenientParse deserialize_lenient(const SotSequence& seq) {
  LenientParse out;
  for (Words& seg : split_segments(seq)) {
    if (seg.empty()) {
      ++out.warnings;
    } else {
      out.segments.push_back(std::move(seg));
    }
  }
  return out;
}

}  // namespace glad
