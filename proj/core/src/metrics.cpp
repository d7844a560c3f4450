#include "glad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace glad {

EditCounts& EditCounts::operator+=(const EditCounts& other) {
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  ref_words += other.ref_words;
  return *this;
}

EditCounts word_edit_distance(const Words& ref, const Words& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  struct Cell {
    std::int64_t total, sub, del, ins;
  };
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    prev[j] = {static_cast<std::int64_t>(j), 0, 0,
               static_cast<std::int64_t>(j)};
  }
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {static_cast<std::int64_t>(i), 0, static_cast<std::int64_t>(i), 0};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool match = ref[i - 1] == hyp[j - 1];
      Cell diag = prev[j - 1];
      if (!match) {
        ++diag.total;
        ++diag.sub;
      }
      Cell del = prev[j];
      ++del.total;
      ++del.del;
      Cell ins = cur[j - 1];
      ++ins.total;
      ++ins.ins;
      // Prefer substitution, then deletion, then insertion on ties.
      Cell best = diag;
      if (del.total < best.total) best = del;
      if (ins.total < best.total) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  EditCounts out;
  out.substitutions = prev[m].sub;
  out.deletions = prev[m].del;
  out.insertions = prev[m].ins;
  out.ref_words = static_cast<std::int64_t>(n);
  return out;
}

EditCounts pi_wer(const std::vector<Words>& refs,
                  const std::vector<Words>& hyp_segments) {
  if (refs.empty()) {
    throw InvalidInputError("pi_wer: no reference segments");
  }
  const std::size_t k = std::max(refs.size(), hyp_segments.size());
  if (k > 6) {
    throw InvalidInputError(
        "pi_wer: " + std::to_string(k) +
        " segments exceed the supported maximum of 6 (K! bijections)");
  }
  std::vector<Words> padded_refs = refs;
  std::vector<Words> padded_hyps = hyp_segments;
  padded_refs.resize(k);
  padded_hyps.resize(k);

  // Pairwise counts, then the minimizing bijection.
  std::vector<std::vector<EditCounts>> pair_counts(k, std::vector<EditCounts>(k));
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t h = 0; h < k; ++h)
      pair_counts[r][h] = word_edit_distance(padded_refs[r], padded_hyps[h]);

  std::vector<std::size_t> perm(k), best_perm;
  std::iota(perm.begin(), perm.end(), 0);
  std::int64_t best_total = -1;
  do {
    std::int64_t total = 0;
    for (std::size_t r = 0; r < k; ++r) total += pair_counts[r][perm[r]].errors();
    if (best_total < 0 || total < best_total) {
      best_total = total;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  EditCounts out;
  for (std::size_t r = 0; r < k; ++r) out += pair_counts[r][best_perm[r]];
  return out;
}

std::string to_string(OverlapBand band) {
  switch (band) {
    case OverlapBand::none: return "none";
    case OverlapBand::low: return "low";
    case OverlapBand::mid: return "mid";
    case OverlapBand::high: return "high";
  }
  return "?";
}

OverlapBand band_from_string(const std::string& s) {
  if (s == "none") return OverlapBand::none;
  if (s == "low") return OverlapBand::low;
  if (s == "mid") return OverlapBand::mid;
  if (s == "high") return OverlapBand::high;
  throw InvalidInputError("unknown overlap band '" + s + "'");
}

OverlapBand bucket_assign(double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw InvalidInputError("bucket_assign: ratio " + std::to_string(ratio) +
                            " outside [0, 1]");
  }
  if (ratio == 0.0) return OverlapBand::none;
  if (ratio <= 0.2) return OverlapBand::low;
  if (ratio <= 0.5) return OverlapBand::mid;
  return OverlapBand::high;
}

double oa_wer(const std::map<OverlapBand, double>& band_wers) {
  double sum = 0.0;
  for (OverlapBand band :
       {OverlapBand::low, OverlapBand::mid, OverlapBand::high}) {
    auto it = band_wers.find(band);
    if (it == band_wers.end()) {
      throw InvalidInputError("oa_wer: missing band '" + to_string(band) +
                              "'");
    }
    sum += it->second;
  }
  return sum / 3.0;
}

double round_percent(double value) { return std::round(value * 10.0) / 10.0; }

namespace {

std::vector<Words> reference_segments(const RefRecord& ref) {
  if (ref.speakers.empty()) {
    throw InvalidInputError("reference '" + ref.id + "' has no speakers");
  }
  std::vector<std::size_t> order(ref.speakers.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return ref.speakers[a].start_time <
                            ref.speakers[b].start_time;
                   });
  std::vector<Words> segments;
  segments.reserve(order.size());
  for (std::size_t idx : order) {
    if (ref.speakers[idx].words.empty()) {
      throw InvalidInputError("reference '" + ref.id +
                              "' has a speaker with no words");
    }
    segments.push_back(ref.speakers[idx].words);
  }
  return segments;
}

}  // namespace

WerReport score_corpus(const std::vector<RefRecord>& refs,
                       const std::vector<HypRecord>& hyps,
                       const std::string& separator) {
  std::map<std::string, const HypRecord*> hyp_by_id;
  for (const HypRecord& h : hyps) {
    if (!hyp_by_id.emplace(h.id, &h).second) {
      throw InvalidInputError("score_corpus: duplicate hypothesis id '" +
                              h.id + "'");
    }
  }
  std::vector<std::string> missing, extra;
  std::map<std::string, bool> seen_ref;
  for (const RefRecord& r : refs) {
    if (!seen_ref.emplace(r.id, true).second) {
      throw InvalidInputError("score_corpus: duplicate reference id '" + r.id +
                              "'");
    }
    if (!hyp_by_id.count(r.id)) missing.push_back(r.id);
  }
  for (const HypRecord& h : hyps) {
    if (!seen_ref.count(h.id)) extra.push_back(h.id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "score_corpus: id mismatch;";
    if (!missing.empty()) {
      msg += " missing hypotheses for:";
      for (const std::string& id : missing) msg += " " + id;
      msg += ";";
    }
    if (!extra.empty()) {
      msg += " hypotheses without references:";
      for (const std::string& id : extra) msg += " " + id;
    }
    throw InvalidInputError(msg);
  }

  WerReport report;
  EditCounts pooled;
  std::map<OverlapBand, EditCounts> band_counts;
  for (const RefRecord& ref : refs) {
    const std::vector<Words> ref_segments = reference_segments(ref);
    OverlapBand band = OverlapBand::none;
    if (ref.ratio) band = bucket_assign(*ref.ratio);

    const SotSequence hyp_seq =
        SotSequence::from_text(hyp_by_id.at(ref.id)->sot_text, separator);
    const LenientParse parsed = deserialize_lenient(hyp_seq);
    if (parsed.warnings) {
      report.warnings += parsed.warnings;
      report.warning_messages.push_back(
          "utterance '" + ref.id + "': dropped " +
          std::to_string(parsed.warnings) + " empty hypothesis segment(s)");
    }
    EditCounts counts;
    try {
      counts = pi_wer(ref_segments, parsed.segments);
    } catch (const Error& e) {
      throw InvalidInputError("utterance '" + ref.id + "': " + e.what());
    }
    report.utterances.push_back({ref.id, band, counts});
    pooled += counts;
    if (band != OverlapBand::none) band_counts[band] += counts;
  }
  if (pooled.ref_words == 0) {
    throw InvalidInputError("score_corpus: corpus has no reference words");
  }
  report.pooled_wer = pooled.wer();
  for (const auto& [band, counts] : band_counts) {
    if (counts.ref_words > 0) report.band_wer[band] = counts.wer();
  }
  const bool all_bands = report.band_wer.count(OverlapBand::low) &&
                         report.band_wer.count(OverlapBand::mid) &&
                         report.band_wer.count(OverlapBand::high);
  if (all_bands) {
    report.oa_wer = oa_wer(report.band_wer);
  } else {
    for (OverlapBand band :
         {OverlapBand::low, OverlapBand::mid, OverlapBand::high}) {
      if (!report.band_wer.count(band)) {
        ++report.warnings;
        report.warning_messages.push_back("band '" + to_string(band) +
                                          "' has no utterances; OA-WER "
                                          "omitted");
      }
    }
  }
  return report;
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

std::vector<RefRecord> load_refs_jsonl(std::istream& is) {
  std::vector<RefRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no, "refs");
    try {
      RefRecord rec;
      rec.id = j.at("id").get<std::string>();
      for (const json& js : j.at("speakers")) {
        SpeakerUtterance u;
        u.words = js.at("words").get<Words>();
        u.start_time = js.at("start").get<double>();
        rec.speakers.push_back(std::move(u));
      }
      if (j.contains("ratio")) rec.ratio = j.at("ratio").get<double>();
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw InvalidInputError("refs: line " + std::to_string(line_no) + ": " +
                              e.what());
    }
  }
  return out;
}

std::vector<HypRecord> load_hyps_jsonl(std::istream& is) {
  std::vector<HypRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no, "hyps");
    try {
      out.push_back({j.at("id").get<std::string>(),
                     j.at("sot").get<std::string>()});
    } catch (const json::exception& e) {
      throw InvalidInputError("hyps: line " + std::to_string(line_no) + ": " +
                              e.what());
    }
  }
  return out;
}

void write_refs_jsonl(std::ostream& os, const std::vector<RefRecord>& refs) {
  for (const RefRecord& r : refs) {
    json speakers = json::array();
    for (const SpeakerUtterance& u : r.speakers) {
      speakers.push_back({{"words", u.words}, {"start", u.start_time}});
    }
    json j{{"id", r.id}, {"speakers", speakers}};
    if (r.ratio) j["ratio"] = *r.ratio;
    os << j.dump() << '\n';
  }
}

void write_hyps_jsonl(std::ostream& os, const std::vector<HypRecord>& hyps) {
  for (const HypRecord& h : hyps) {
    os << json{{"id", h.id}, {"sot", h.sot_text}}.dump() << '\n';
  }
}

void write_report_json(std::ostream& os, const WerReport& report) {
  json per_band = json::object();
  for (const auto& [band, wer] : report.band_wer) {
    per_band[to_string(band)] = wer * 100.0;
  }
  json utterances = json::array();
  for (const UtteranceScore& u : report.utterances) {
    utterances.push_back({{"id", u.id},
                          {"band", to_string(u.band)},
                          {"sub", u.counts.substitutions},
                          {"del", u.counts.deletions},
                          {"ins", u.counts.insertions},
                          {"ref_words", u.counts.ref_words}});
  }
  json j{{"pooled", report.pooled_wer * 100.0},
         {"per_band", per_band},
         {"oa_wer", report.oa_wer ? json(*report.oa_wer * 100.0) : json()},
         {"warnings", report.warnings},
         {"warning_messages", report.warning_messages},
         {"utterances", utterances}};
  os << j.dump(2) << '\n';
}

std::string format_report_table(const WerReport& report) {
  auto cell = [](std::optional<double> wer) {
    char buf[32];
    if (!wer) return std::string("     -");
    std::snprintf(buf, sizeof(buf), "%6.1f", round_percent(*wer * 100.0));
    return std::string(buf);
  };
  auto band_cell = [&](OverlapBand b) -> std::optional<double> {
    auto it = report.band_wer.find(b);
    if (it == report.band_wer.end()) return std::nullopt;
    return it->second;
  };
  std::ostringstream os;
  os << "        Overall    low    mid   high OA-WER\n";
  os << "WER(%) " << cell(report.pooled_wer) << cell(band_cell(OverlapBand::low))
     << cell(band_cell(OverlapBand::mid)) << cell(band_cell(OverlapBand::high))
     << cell(report.oa_wer) << "\n";
  if (report.warnings) {
    os << "warnings: " << report.warnings << "\n";
  }
  return os.str();
}

}  // namespace glad
