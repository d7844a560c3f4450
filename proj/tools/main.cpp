// glad: command-line front end for the GLAD MoLE routing kit.
//
// Subcommands: grad-check, route, score, mix, count-params.
// Exit codes: 0 success, 1 validation failure, 2 I/O error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glad/encoder.hpp"
#include "glad/error.hpp"
#include "glad/metrics.hpp"
#include "glad/mixsim.hpp"
#include "glad/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

std::ifstream open_input(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw glad::IoError("cannot read '" + path + "'");
  return is;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw glad::IoError("cannot write '" + path + "'");
  return os;
}

glad::EncoderConfig load_config(const std::optional<std::string>& path) {
  if (!path) return glad::EncoderConfig{};  // built-in desk-scale default
  std::ifstream is = open_input(*path);
  return glad::encoder_config_from_json(is);
}

struct GlobalFlags {
  std::uint64_t seed = 42;
  bool quiet = false;
};

int run_grad_check(const GlobalFlags& flags,
                   const std::optional<std::string>& config_path, double tol,
                   int trials, int seq_len) {
  const glad::EncoderConfig config = load_config(config_path);
  glad::Rng rng(flags.seed);
  std::map<std::string, double> worst;
  for (int trial = 0; trial < trials; ++trial) {
    const glad::GradCheckReport report = glad::encoder_grad_check(
        config, rng, tol, static_cast<std::size_t>(seq_len));
    for (const auto& t : report.tensors) {
      auto [it, inserted] = worst.emplace(t.name, t.rel_error);
      if (!inserted) it->second = std::max(it->second, t.rel_error);
    }
  }
  double max_err = 0.0;
  std::string max_name;
  for (const auto& [name, err] : worst) {
    if (!flags.quiet) {
      std::printf("%-28s %.3e\n", name.c_str(), err);
    }
    if (err >= max_err) {
      max_err = err;
      max_name = name;
    }
  }
  const bool ok = max_err <= tol;
  std::printf("%s worst %s = %.3e (tolerance %.1e, %d trial%s)\n",
              ok ? "PASS" : "FAIL", max_name.c_str(), max_err, tol, trials,
              trials == 1 ? "" : "s");
  return ok ? kExitOk : kExitValidation;
}

struct RouteArgs {
  std::string x_s, x_in, w_global, w_local, w_fusion;
  std::string emit = "fused";
  std::string out;
};

glad::Matrix read_matrix(const std::string& path, const char* flag) {
  if (path.empty()) {
    throw glad::InvalidInputError(std::string("route: --emit mode needs ") +
                                  flag);
  }
  std::ifstream is = open_input(path);
  return glad::read_tsv(is);
}

int run_route(const RouteArgs& args) {
  glad::RouterParams params;
  glad::Matrix result;
  if (args.emit == "global") {
    params.w_global = read_matrix(args.w_global, "--w-global");
    params.w_local = params.w_global;  // satisfy shared-shape validation
    params.w_fusion = glad::Matrix(params.w_global.rows(), 2);
    result = glad::global_route(read_matrix(args.x_s, "--x-s"), params).probs;
  } else if (args.emit == "local") {
    params.w_local = read_matrix(args.w_local, "--w-local");
    params.w_fusion = glad::Matrix(params.w_local.rows(), 2);
    result = glad::local_route(read_matrix(args.x_in, "--x-in"), params).probs;
  } else if (args.emit == "alpha") {
    params.w_fusion = read_matrix(args.w_fusion, "--w-fusion");
    params.w_local = glad::Matrix(params.w_fusion.rows(), 1);
    result =
        glad::fusion_weights(read_matrix(args.x_in, "--x-in"), params).alpha;
  } else if (args.emit == "fused" || args.emit == "static") {
    params.w_global = read_matrix(args.w_global, "--w-global");
    params.w_local = read_matrix(args.w_local, "--w-local");
    const glad::Matrix x_s = read_matrix(args.x_s, "--x-s");
    const glad::Matrix x_in = read_matrix(args.x_in, "--x-in");
    if (args.emit == "static") {
      params.w_fusion = glad::Matrix(params.w_local.rows(), 2);
      params.validate();
      result = glad::static_fuse(glad::global_route(x_s, params),
                                 glad::local_route(x_in, params));
    } else {
      params.w_fusion = read_matrix(args.w_fusion, "--w-fusion");
      params.validate();
      result = glad::fuse(glad::global_route(x_s, params),
                          glad::local_route(x_in, params),
                          glad::fusion_weights(x_in, params))
                   .probs;
    }
  } else {
    throw glad::InvalidInputError(
        "route: --emit must be fused|static|global|local|alpha");
  }
  if (args.out.empty()) {
    glad::write_tsv(std::cout, result);
  } else {
    std::ofstream os = open_output(args.out);
    glad::write_tsv(os, result);
  }
  return kExitOk;
}

int run_score(const GlobalFlags& flags, const std::string& refs_path,
              const std::string& hyps_path, const std::string& out_path,
              const std::string& separator) {
  std::ifstream refs_is = open_input(refs_path);
  std::ifstream hyps_is = open_input(hyps_path);
  const auto refs = glad::load_refs_jsonl(refs_is);
  const auto hyps = glad::load_hyps_jsonl(hyps_is);
  const glad::WerReport report = glad::score_corpus(refs, hyps, separator);
  if (!flags.quiet) {
    std::cout << glad::format_report_table(report);
    for (const std::string& msg : report.warning_messages) {
      std::cerr << "warning: " << msg << "\n";
    }
  }
  if (!out_path.empty()) {
    std::ofstream os = open_output(out_path);
    glad::write_report_json(os, report);
  }
  return kExitOk;
}

glad::BandHours parse_composition(const std::string& text) {
  glad::BandHours hours;
  if (text.empty()) return hours;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) {
      throw glad::InvalidInputError("mix: composition entry '" + item +
                                    "' is not band:hours");
    }
    const glad::OverlapBand band =
        glad::band_from_string(item.substr(0, colon));
    double value = 0.0;
    try {
      value = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw glad::InvalidInputError("mix: bad hours in '" + item + "'");
    }
    hours[band] = value;
  }
  return hours;
}

int run_mix(const GlobalFlags& flags, const std::string& corpus_path,
            const std::string& composition, double single_hours,
            const std::string& out_path) {
  std::ifstream is = open_input(corpus_path);
  const auto corpus = glad::load_corpus_jsonl(is);
  const glad::BandHours targets = parse_composition(composition);
  glad::Rng rng(flags.seed);
  const auto manifest =
      glad::build_manifest(corpus, targets, single_hours, rng);
  if (!out_path.empty()) {
    std::ofstream os = open_output(out_path);
    glad::write_manifest_jsonl(os, manifest);
  }
  if (!flags.quiet) {
    const glad::ManifestSummary s = glad::summarize_manifest(manifest);
    auto count = [&](glad::OverlapBand b) -> std::int64_t {
      auto it = s.utterance_counts.find(b);
      return it == s.utterance_counts.end() ? 0 : it->second;
    };
    auto hours = [&](glad::OverlapBand b) -> double {
      auto it = s.achieved_hours.find(b);
      return it == s.achieved_hours.end() ? 0.0 : it->second;
    };
    std::printf("%-10s %10s %10s %10s %10s %10s\n", "", "1mix", "2mix-low",
                "2mix-mid", "2mix-high", "Total");
    std::printf("%-10s %10lld %10lld %10lld %10lld %10lld\n", "Utt.",
                static_cast<long long>(count(glad::OverlapBand::none)),
                static_cast<long long>(count(glad::OverlapBand::low)),
                static_cast<long long>(count(glad::OverlapBand::mid)),
                static_cast<long long>(count(glad::OverlapBand::high)),
                static_cast<long long>(s.total_utterances));
    std::printf("%-10s %10.2f %10.2f %10.2f %10.2f %10.2f\n", "Dur.(hrs)",
                hours(glad::OverlapBand::none), hours(glad::OverlapBand::low),
                hours(glad::OverlapBand::mid), hours(glad::OverlapBand::high),
                s.total_hours);
  }
  return kExitOk;
}

int run_count_params(const std::optional<std::string>& config_path,
                     bool per_layer) {
  const glad::EncoderConfig config = load_config(config_path);
  if (per_layer) {
    for (const auto& [name, count] : glad::encoder_param_breakdown(config)) {
      std::printf("%-24s %12lld\n", name.c_str(),
                  static_cast<long long>(count));
    }
  }
  std::printf("total(%s) %ld\n", glad::to_string(config.placement).c_str(),
              static_cast<long>(glad::count_encoder_params(config)));

  // Containment across placements for the same dimensions.
  auto count_for = [&](glad::Placement p) {
    glad::EncoderConfig c = config;
    c.placement = p;
    if (p != glad::Placement::none && c.num_experts == 0) c.num_experts = 1;
    return glad::count_encoder_params(c);
  };
  const std::int64_t none = count_for(glad::Placement::none);
  const std::int64_t ffn = count_for(glad::Placement::ffn_only);
  const std::int64_t att = count_for(glad::Placement::attention_only);
  const std::int64_t both = count_for(glad::Placement::both);
  std::printf("placement counts: none=%lld ffn_only=%lld attention_only=%lld "
              "both=%lld\n",
              static_cast<long long>(none), static_cast<long long>(ffn),
              static_cast<long long>(att), static_cast<long long>(both));
  const bool ordered = none < ffn && ffn < both && none < att && att < both;
  std::printf("ordering none < ffn_only,attention_only < both: %s\n",
              ordered ? "OK" : "VIOLATED");
  return ordered ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GLAD mixture-of-LoRA-experts toolkit: gradient-checked "
               "global/local expert routing, SOT transcript codec, "
               "permutation-invariant and overlap-aware WER, and overlap "
               "mixture simulation"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--seed", flags.seed,
                 "PRNG seed (env GLAD_SEED overrides the default)")
      ->envname("GLAD_SEED")
      ->capture_default_str();
  app.add_flag("--quiet", flags.quiet, "suppress tables and per-item output");

  // grad-check
  auto* grad = app.add_subcommand(
      "grad-check", "compare analytic encoder gradients with central finite "
                    "differences");
  std::optional<std::string> grad_config;
  double grad_tol = 1e-6;
  int grad_trials = 10;
  int grad_seq_len = 4;
  grad->add_option("--config", grad_config,
                   "encoder config JSON (defaults to a small built-in "
                   "configuration)");
  grad->add_option("--tol", grad_tol, "relative-error tolerance")
      ->capture_default_str();
  grad->add_option("--trials", grad_trials, "independent random trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--seq-len", grad_seq_len, "frames per trial (max 8)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->footer(
      "Config JSON keys: num_blocks, d_h, num_heads, d_ffn, num_experts,\n"
      "lora_rank, lora_scale, placement (none|ffn_only|attention_only|both),\n"
      "fusion_mode (dynamic|static_sum|local_only).");

  // route
  auto* route = app.add_subcommand(
      "route", "run the global/local/fusion routers over TSV matrices");
  RouteArgs route_args;
  route->add_option("--x-s", route_args.x_s, "raw feature sequence TSV");
  route->add_option("--x-in", route_args.x_in, "layer input TSV");
  route->add_option("--w-global", route_args.w_global, "global router TSV");
  route->add_option("--w-local", route_args.w_local, "local router TSV");
  route->add_option("--w-fusion", route_args.w_fusion, "fusion router TSV");
  route->add_option("--emit", route_args.emit,
                    "fused|static|global|local|alpha")
      ->capture_default_str();
  route->add_option("--out", route_args.out, "output TSV (default stdout)");
  route->footer(
      "Matrix TSV: one row per line, tab-separated decimals, '.' decimal\n"
      "point, no header. Shapes: x-s/x-in are T x d, w-global/w-local are\n"
      "d x N, w-fusion is d x 2.");

  // score
  auto* score = app.add_subcommand(
      "score", "score SOT hypotheses with PI-WER and OA-WER");
  std::string score_refs, score_hyps, score_out;
  std::string score_separator = "$";
  score->add_option("--refs", score_refs, "reference JSONL")->required();
  score->add_option("--hyps", score_hyps, "hypothesis JSONL")->required();
  score->add_option("--out", score_out, "write the JSON report here");
  score->add_option("--separator", score_separator, "speaker-change token")
      ->capture_default_str();
  score->footer(
      "Refs JSONL: {\"id\", \"speakers\": [{\"words\": [...], \"start\": s}],"
      " \"ratio\": r?}\n"
      "per line; ratio in [0, 1] buckets the utterance into an overlap band.\n"
      "Hyps JSONL: {\"id\", \"sot\": \"worda wordb $ wordc ...\"}.\n"
      "Report JSON: {pooled, per_band {low, mid, high}, oa_wer, warnings,\n"
      "warning_messages, utterances[...]} with WERs in percent.");

  // mix
  auto* mix = app.add_subcommand(
      "mix", "build a mixture manifest with band-targeted overlap");
  std::string mix_corpus, mix_composition, mix_out;
  double mix_single = 0.0;
  mix->add_option("--corpus", mix_corpus, "utterance corpus JSONL")
      ->required();
  mix->add_option("--composition", mix_composition,
                  "2mix hour targets, e.g. low:181.5,mid:275.5,high:202.5");
  mix->add_option("--single", mix_single, "single-talker hours")
      ->capture_default_str();
  mix->add_option("--out", mix_out, "manifest JSONL output path");
  mix->footer(
      "Corpus JSONL: {\"id\", \"duration\", \"word_count\"} per line.\n"
      "Manifest JSONL: {\"id\", \"components\": [{\"utt\", \"offset\"}],\n"
      "\"ratio\", \"band\", \"total_duration\"} per line. Bands: low (0,0.2],\n"
      "mid (0.2,0.5], high (0.5,1].");

  // count-params
  auto* count = app.add_subcommand(
      "count-params", "parameter counts and placement-ordering check");
  std::optional<std::string> count_config;
  bool count_per_layer = false;
  count->add_option("--config", count_config,
                    "encoder config JSON (defaults to the built-in "
                    "configuration)");
  count->add_flag("--per-layer", count_per_layer, "per-component breakdown");
  count->footer("Takes the same config JSON as grad-check.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message and usage hint
    return kExitValidation;
  }

  try {
    if (grad->parsed()) {
      return run_grad_check(flags, grad_config, grad_tol, grad_trials,
                            grad_seq_len);
    }
    if (route->parsed()) return run_route(route_args);
    if (score->parsed()) {
      return run_score(flags, score_refs, score_hyps, score_out,
                       score_separator);
    }
    if (mix->parsed()) {
      return run_mix(flags, mix_corpus, mix_composition, mix_single, mix_out);
    }
    if (count->parsed()) return run_count_params(count_config, count_per_layer);
  } catch (const glad::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const glad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
