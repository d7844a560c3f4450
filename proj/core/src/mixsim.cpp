#include "glad/mixsim.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace glad {

double overlap_ratio(const std::vector<Interval>& intervals) {
  if (intervals.empty()) {
    throw InvalidInputError("overlap_ratio: no intervals");
  }
  for (const Interval& iv : intervals) {
    if (!std::isfinite(iv.start) || !std::isfinite(iv.end) ||
        !(iv.end > iv.start)) {
      throw InvalidInputError("overlap_ratio: degenerate interval [" +
                              std::to_string(iv.start) + ", " +
                              std::to_string(iv.end) + "]");
    }
  }
  double lo = intervals[0].start, hi = intervals[0].end;
  std::vector<std::pair<double, int>> events;
  events.reserve(intervals.size() * 2);
  for (const Interval& iv : intervals) {
    lo = std::min(lo, iv.start);
    hi = std::max(hi, iv.end);
    events.emplace_back(iv.start, +1);
    events.emplace_back(iv.end, -1);
  }
  std::sort(events.begin(), events.end());
  double overlapped = 0.0;
  double prev_t = events.front().first;
  int active = 0;
  for (const auto& [t, delta] : events) {
    if (active >= 2) overlapped += t - prev_t;
    prev_t = t;
    active += delta;
  }
  return overlapped / (hi - lo);
}

namespace {

void check_utterances(const std::vector<UtteranceMeta>& utts) {
  if (utts.empty() || utts.size() > 3) {
    throw InvalidInputError("mixture: needs 1 to 3 utterances, got " +
                            std::to_string(utts.size()));
  }
  for (const UtteranceMeta& u : utts) {
    if (u.id.empty()) throw InvalidInputError("mixture: empty utterance id");
    if (!std::isfinite(u.duration) || !(u.duration > 0.0)) {
      throw InvalidInputError("mixture: utterance '" + u.id +
                              "' has non-positive duration");
    }
  }
}

std::string joined_id(const std::vector<UtteranceMeta>& utts) {
  std::string id;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    if (i) id.push_back('+');
    id += utts[i].id;
  }
  return id;
}

MixtureSpec assemble(const std::vector<UtteranceMeta>& utts,
                     const std::vector<double>& offsets) {
  MixtureSpec spec;
  spec.id = joined_id(utts);
  std::vector<Interval> intervals;
  double total_end = 0.0;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    spec.components.push_back({utts[i].id, offsets[i]});
    intervals.push_back({offsets[i], offsets[i] + utts[i].duration});
    total_end = std::max(total_end, offsets[i] + utts[i].duration);
  }
  spec.total_duration = total_end;
  spec.overlap_ratio = utts.size() == 1 ? 0.0 : overlap_ratio(intervals);
  spec.band = bucket_assign(spec.overlap_ratio);
  return spec;
}

}  // namespace

MixtureSpec mixture_from_offsets(const std::vector<UtteranceMeta>& utts,
                                 const std::vector<double>& offsets) {
  check_utterances(utts);
  if (offsets.size() != utts.size()) {
    throw InvalidInputError("mixture_from_offsets: " +
                            std::to_string(offsets.size()) + " offsets for " +
                            std::to_string(utts.size()) + " utterances");
  }
  if (offsets[0] != 0.0) {
    throw InvalidInputError("mixture_from_offsets: first offset must be 0");
  }
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    if (!std::isfinite(offsets[i]) ||
        (i > 0 && !(offsets[i] > offsets[i - 1]))) {
      throw InvalidInputError(
          "mixture_from_offsets: offsets must be strictly increasing");
    }
  }
  return assemble(utts, offsets);
}

MixtureSpec make_mixture(const std::vector<UtteranceMeta>& utts, Rng& rng,
                         std::optional<OverlapBand> target_band) {
  check_utterances(utts);
  if (utts.size() == 1) {
    if (target_band && *target_band != OverlapBand::none) {
      throw InfeasibleBandError(
          "make_mixture: a single utterance cannot reach band '" +
          to_string(*target_band) + "'");
    }
    return assemble(utts, {0.0});
  }
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<double> offsets = {0.0};
    for (std::size_t k = 1; k < utts.size(); ++k) {
      // Uniform over (prev, prev + prev_duration]: strictly after the
      // previous speaker starts, never after they finish.
      const double prev = offsets[k - 1];
      offsets.push_back(prev +
                        (1.0 - rng.next_double()) * utts[k - 1].duration);
    }
    MixtureSpec spec = assemble(utts, offsets);
    if (!target_band || spec.band == *target_band) return spec;
  }
  throw InfeasibleBandError("make_mixture: band '" + to_string(*target_band) +
                            "' unreachable for mixture '" + joined_id(utts) +
                            "' after " + std::to_string(kMaxAttempts) +
                            " draws");
}

std::vector<MixtureSpec> build_manifest(const std::vector<UtteranceMeta>& corpus,
                                        const BandHours& composition,
                                        double single_talker_hours, Rng& rng) {
  for (const auto& [band, hours] : composition) {
    if (band == OverlapBand::none) {
      throw InvalidInputError(
          "build_manifest: composition bands must be low/mid/high");
    }
    if (!std::isfinite(hours) || hours < 0.0) {
      throw InvalidInputError("build_manifest: negative target for band '" +
                              to_string(band) + "'");
    }
  }
  if (!(single_talker_hours >= 0.0) || !std::isfinite(single_talker_hours)) {
    throw InvalidInputError("build_manifest: bad single-talker hours");
  }
  for (const UtteranceMeta& u : corpus) {
    if (!std::isfinite(u.duration) || !(u.duration > 0.0)) {
      throw InvalidInputError("build_manifest: utterance '" + u.id +
                              "' has non-positive duration");
    }
  }

  std::vector<MixtureSpec> manifest;
  std::size_t counter = 0;
  auto sequenced = [&counter](MixtureSpec spec) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "m%06zu-", counter++);
    spec.id = buf + spec.id;
    return spec;
  };

  // Single-talker entries: without replacement via a seeded shuffle.
  const double single_target = single_talker_hours * 3600.0;
  if (single_target > 0.0) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }
    double achieved = 0.0;
    std::size_t next = 0;
    while (achieved < single_target) {
      if (next >= order.size()) {
        throw InfeasibleBandError(
            "build_manifest: single-talker target " +
            std::to_string(single_talker_hours) + " h infeasible; corpus has " +
            std::to_string(achieved / 3600.0) + " h");
      }
      MixtureSpec spec = assemble({corpus[order[next++]]}, {0.0});
      achieved += spec.total_duration;
      manifest.push_back(sequenced(std::move(spec)));
    }
  }

  // Two-speaker mixtures per band: random pairing with replacement.
  constexpr int kMaxPairFailures = 1000;
  for (const auto& [band, hours] : composition) {
    const double target = hours * 3600.0;
    if (target <= 0.0) continue;
    if (corpus.size() < 2) {
      throw InfeasibleBandError("build_manifest: band '" + to_string(band) +
                                "' needs at least two corpus utterances");
    }
    double achieved = 0.0;
    int failures = 0;
    while (achieved < target) {
      const std::size_t i = rng.uniform_int(corpus.size());
      std::size_t j = rng.uniform_int(corpus.size());
      while (j == i) j = rng.uniform_int(corpus.size());
      try {
        MixtureSpec spec = make_mixture({corpus[i], corpus[j]}, rng, band);
        achieved += spec.total_duration;
        manifest.push_back(sequenced(std::move(spec)));
        failures = 0;
      } catch (const InfeasibleBandError&) {
        if (++failures >= kMaxPairFailures) {
          throw InfeasibleBandError(
              "build_manifest: band '" + to_string(band) + "' stalled at " +
              std::to_string(achieved / 3600.0) + " of " +
              std::to_string(hours) + " h");
        }
      }
    }
  }
  return manifest;
}

ManifestSummary summarize_manifest(const std::vector<MixtureSpec>& manifest) {
  ManifestSummary s;
  for (const MixtureSpec& spec : manifest) {
    s.achieved_hours[spec.band] += spec.total_duration / 3600.0;
    s.utterance_counts[spec.band] += 1;
    s.total_hours += spec.total_duration / 3600.0;
    s.total_utterances += 1;
  }
  return s;
}

namespace {

using nlohmann::json;

json parse_line(const std::string& line, std::size_t line_no,
                const char* what) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw InvalidInputError(std::string(what) + ": line " +
                            std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace

std::vector<UtteranceMeta> load_corpus_jsonl(std::istream& is) {
  std::vector<UtteranceMeta> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no, "corpus");
    try {
      UtteranceMeta u;
      u.id = j.at("id").get<std::string>();
      u.duration = j.at("duration").get<double>();
      u.word_count = j.at("word_count").get<std::int64_t>();
      out.push_back(std::move(u));
    } catch (const json::exception& e) {
      throw InvalidInputError("corpus: line " + std::to_string(line_no) +
                              ": " + e.what());
    }
  }
  return out;
}

void write_corpus_jsonl(std::ostream& os,
                        const std::vector<UtteranceMeta>& corpus) {
  for (const UtteranceMeta& u : corpus) {
    os << json{{"id", u.id},
               {"duration", u.duration},
               {"word_count", u.word_count}}
              .dump()
       << '\n';
  }
}

std::vector<MixtureSpec> load_manifest_jsonl(std::istream& is) {
  std::vector<MixtureSpec> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no, "manifest");
    try {
      MixtureSpec spec;
      spec.id = j.at("id").get<std::string>();
      for (const json& jc : j.at("components")) {
        spec.components.push_back({jc.at("utt").get<std::string>(),
                                   jc.at("offset").get<double>()});
      }
      spec.total_duration = j.at("total_duration").get<double>();
      spec.overlap_ratio = j.at("ratio").get<double>();
      spec.band = band_from_string(j.at("band").get<std::string>());
      if (spec.band != bucket_assign(spec.overlap_ratio)) {
        throw InvalidInputError("manifest: line " + std::to_string(line_no) +
                                ": band does not match ratio");
      }
      out.push_back(std::move(spec));
    } catch (const json::exception& e) {
      throw InvalidInputError("manifest: line " + std::to_string(line_no) +
                              ": " + e.what());
    }
  }
  return out;
}

void write_manifest_jsonl(std::ostream& os,
                          const std::vector<MixtureSpec>& manifest) {
  for (const MixtureSpec& spec : manifest) {
    json components = json::array();
    for (const MixComponent& c : spec.components) {
      components.push_back({{"utt", c.utterance_id}, {"offset", c.offset}});
    }
    os << json{{"id", spec.id},
               {"components", components},
               {"ratio", spec.overlap_ratio},
               {"band", to_string(spec.band)},
               {"total_duration", spec.total_duration}}
              .dump()
       << '\n';
  }
}

}  // namespace glad
