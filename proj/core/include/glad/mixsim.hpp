#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glad/metrics.hpp"
#include "glad/rng.hpp"

namespace glad {

/// Corpus entry: metadata only, there is no audio anywhere in this library.
struct UtteranceMeta {
  std::string id;
  double duration = 0.0;  // seconds, > 0
  std::int64_t word_count = 0;
};

struct MixComponent {
  std::string utterance_id;
  double offset = 0.0;  // seconds from mixture start, first is always 0
};

/// One simulated mixture: components in chronological order, the fraction of
/// time with two or more simultaneously active speakers, and its band.
struct MixtureSpec {
  std::string id;
  std::vector<MixComponent> components;
  double total_duration = 0.0;
  double overlap_ratio = 0.0;
  OverlapBand band = OverlapBand::none;
};

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

/// Fraction of [min start, max end] during which at least two intervals are
/// active. Degenerate intervals (end <= start) are rejected.
double overlap_ratio(const std::vector<Interval>& intervals);

/// Deterministic mixture from explicit offsets (offsets[0] must be 0 and
/// offsets must be strictly increasing).
MixtureSpec mixture_from_offsets(const std::vector<UtteranceMeta>& utts,
                                 const std::vector<double>& offsets);

/// Random mixture of 1..3 utterances. Speaker k+1 starts strictly after
/// speaker k, with its offset drawn uniformly over
/// (offset_k, offset_k + duration_k]. With a target band, offsets are
/// rejection-sampled until bucket_assign(ratio) matches; 1000 failed draws
/// raise InfeasibleBandError.
MixtureSpec make_mixture(const std::vector<UtteranceMeta>& utts, Rng& rng,
                         std::optional<OverlapBand> target_band = std::nullopt);

/// Per-band hour targets for two-speaker mixtures.
using BandHours = std::map<OverlapBand, double>;

struct ManifestSummary {
  std::map<OverlapBand, double> achieved_hours;  // none = single-talker
  std::map<OverlapBand, std::int64_t> utterance_counts;
  double total_hours = 0.0;
  std::int64_t total_utterances = 0;
};

/// Emits single-talker entries until `single_talker_hours` is reached
/// (sampling the corpus without replacement), then two-speaker mixtures per
/// band until each band's summed duration reaches its target, each within
/// one mixture's slack. Pairs are drawn with replacement. Raises
/// InfeasibleBandError naming the band that cannot be filled.
std::vector<MixtureSpec> build_manifest(const std::vector<UtteranceMeta>& corpus,
                                        const BandHours& composition,
                                        double single_talker_hours, Rng& rng);

ManifestSummary summarize_manifest(const std::vector<MixtureSpec>& manifest);

/// Corpus JSONL: {"id", "duration", "word_count"} per line.
std::vector<UtteranceMeta> load_corpus_jsonl(std::istream& is);
void write_corpus_jsonl(std::ostream& os,
                        const std::vector<UtteranceMeta>& corpus);

/// Manifest JSONL: {"id", "components": [{"utt", "offset"}], "ratio",
/// "band", "total_duration"} per line.
std::vector<MixtureSpec> load_manifest_jsonl(std::istream& is);
void write_manifest_jsonl(std::ostream& os,
                          const std::vector<MixtureSpec>& manifest);

}  // namespace glad
