#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glad/sot.hpp"

namespace glad {

/// Minimal-alignment edit statistics for one reference/hypothesis pair.
struct EditCounts {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t ref_words = 0;

  std::int64_t errors() const { return substitutions + deletions + insertions; }
  /// errors / ref_words; callers must ensure ref_words > 0.
  double wer() const { return static_cast<double>(errors()) / ref_words; }

  EditCounts& operator+=(const EditCounts& other);
};

/// Levenshtein alignment with unit costs; S + D + I is minimal.
EditCounts word_edit_distance(const Words& ref, const Words& hyp);

/// Permutation-invariant WER counts for serialized multi-talker output.
/// The shorter side is padded with empty segments, every bijection between
/// reference and hypothesis segments is scored, and the minimizing one is
/// returned. ref_words counts real (unpadded) reference words only.
/// More than 6 segments on either side is refused (factorial blow-up).
EditCounts pi_wer(const std::vector<Words>& refs,
                  const std::vector<Words>& hyp_segments);

enum class OverlapBand { none, low, mid, high };

std::string to_string(OverlapBand band);
OverlapBand band_from_string(const std::string& s);

/// Overlap-ratio bands partitioning (0, 1]: low (0, 0.2], mid (0.2, 0.5],
/// high (0.5, 1]. A ratio of exactly 0 maps to `none`.
OverlapBand bucket_assign(double ratio);

/// Arithmetic mean of the low/mid/high band WERs. All three must be present.
double oa_wer(const std::map<OverlapBand, double>& band_wers);

/// Rounds a percent figure to one decimal for display.
double round_percent(double value);

/// One reference record: per-speaker transcripts plus the mixture's overlap
/// ratio (absent ratio means a single-talker utterance, band `none`).
struct RefRecord {
  std::string id;
  std::vector<SpeakerUtterance> speakers;
  std::optional<double> ratio;
};

struct HypRecord {
  std::string id;
  std::string sot_text;
};

struct UtteranceScore {
  std::string id;
  OverlapBand band = OverlapBand::none;
  EditCounts counts;
};

struct WerReport {
  std::vector<UtteranceScore> utterances;
  double pooled_wer = 0.0;  // sum errors / sum ref words, as a fraction
  std::map<OverlapBand, double> band_wer;  // low/mid/high where data exists
  std::optional<double> oa_wer;            // absent when a band is missing
  std::size_t warnings = 0;
  std::vector<std::string> warning_messages;
};

/// Scores a corpus: per-utterance pi_wer over leniently parsed hypotheses,
/// pooled WER (sum of errors over sum of reference words), per-band pooled
/// WERs, and OA-WER when all three bands have data. Reference and hypothesis
/// id sets must match exactly.
WerReport score_corpus(const std::vector<RefRecord>& refs,
                       const std::vector<HypRecord>& hyps,
                       const std::string& separator = "$");

/// JSONL manifests: {"id", "speakers": [{"words": [...], "start": s}],
/// "ratio": r?} per line for references, {"id", "sot": "..."} for
/// hypotheses.
std::vector<RefRecord> load_refs_jsonl(std::istream& is);
std::vector<HypRecord> load_hyps_jsonl(std::istream& is);
void write_refs_jsonl(std::ostream& os, const std::vector<RefRecord>& refs);
void write_hyps_jsonl(std::ostream& os, const std::vector<HypRecord>& hyps);

/// Report JSON: {"pooled", "per_band": {...}, "oa_wer", "warnings", ...}
/// with WERs in percent at full precision; rounding is display-only.
void write_report_json(std::ostream& os, const WerReport& report);

/// Human-readable table with low/mid/high/OA-WER columns (one decimal).
std::string format_report_table(const WerReport& report);

}  // namespace glad
