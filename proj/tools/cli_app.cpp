#include "cli_app.hpp"

#include "alti/ablation.hpp"
#include "alti/dataset.hpp"
#include "alti/harness.hpp"
#include "alti/render.hpp"
#include "alti/report.hpp"
#include "alti/synthetic.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>

namespace alti::cli {
namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::vector<std::string> bundles;
  std::string methods = "alti";
  std::string input;
  std::string dataset;
  std::string target = "cls";
  std::string bins = "0,5,10,20,50";
  std::string norm = "l1";
  std::string ln2 = "off";
  int ig_steps = 100;
  std::uint64_t seed = 0;
  std::string render = "json";
  std::string out;
  int jobs = 1;
  bool detail = false;
  std::size_t samples = 500;
  bool within_sentence = false;
  int max_removed = 10;
  std::string fixtures;
  double tolerance = 1e-4;
  int layers = 4;
  int hidden = 32;
  int heads = 4;
  int ffn = 64;
  std::size_t count = 200;
};

void add_bundle(CLI::App* cmd, Flags& f, bool many) {
  auto* opt = cmd->add_option("--bundle", f.bundles, many ? "Bundle directories (repeat or comma-separate)"
                                                          : "Bundle directory")
                  ->required();
  if (many) {
    opt->delimiter(',');
  } else {
    opt->expected(1);
  }
}

void add_text_source(CLI::App* cmd, Flags& f) {
  auto* in = cmd->add_option("--input", f.input, "A single input sentence");
  auto* ds = cmd->add_option("--dataset", f.dataset, "JSONL file with {text, label} lines");
  in->excludes(ds);
}

void add_method_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--method", f.methods, "Comma-separated methods")->capture_default_str();
  cmd->add_option("--target", f.target, "Classifier readout")->check(CLI::IsMember({"cls", "mask"}))->capture_default_str();
  cmd->add_option("--norm", f.norm, "Norm used by alti")->check(CLI::IsMember({"l1", "l2"}))->capture_default_str();
  cmd->add_option("--ln2", f.ln2, "Extend decompositions through LN2")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  cmd->add_option("--ig-steps", f.ig_steps, "Integrated-gradients steps")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for sampled quantities")->capture_default_str();
}

void add_out(CLI::App* cmd, Flags& f) { cmd->add_option("--out", f.out, "Write the report here instead of stdout"); }

void add_jobs(CLI::App* cmd, Flags& f) {
  cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

AttributionOptions attribution_options(const Flags& f) {
  AttributionOptions o;
  o.target = parse_target(f.target);
  o.alti_norm = parse_norm(f.norm);
  o.ln2 = f.ln2 == "on";
  o.ig_steps = f.ig_steps;
  o.seed = f.seed;
  return o;
}

std::vector<std::string> read_texts(const Flags& f) {
  if (!f.input.empty()) return {f.input};
  if (f.dataset.empty()) {
    throw UsageError("one of --input or --dataset is required");
  }
  std::vector<std::string> texts;
  for (auto& ex : load_dataset(f.dataset)) texts.push_back(std::move(ex.text));
  if (texts.empty()) {
    throw std::invalid_argument("dataset '" + f.dataset + "' is empty");
  }
  return texts;
}

std::vector<EncodedInput> tokenize_all(const std::vector<std::string>& texts, const ModelBundle& bundle) {
  std::vector<EncodedInput> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(tokenize(t, bundle));
  return out;
}

void emit(const Flags& f, const std::string& text, std::ostream& out) {
  if (f.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(f.out);
  if (!file) {
    throw std::runtime_error("cannot write '" + f.out + "'");
  }
  file << text;
}

void emit_json(const Flags& f, const json& j, std::ostream& out) { emit(f, j.dump(2) + "\n", out); }

std::vector<ModelBundle> load_bundles(const Flags& f) {
  std::vector<ModelBundle> out;
  for (const auto& dir : f.bundles) out.push_back(load_bundle(dir));
  return out;
}

std::vector<const ModelBundle*> pointers(const std::vector<ModelBundle>& bundles) {
  std::vector<const ModelBundle*> out;
  for (const auto& b : bundles) out.push_back(&b);
  return out;
}

void cmd_attribute(const Flags& f, std::ostream& out) {
  const ModelBundle bundle = load_bundle(f.bundles.front());
  const auto methods = parse_method_list(f.methods);
  const auto options = attribution_options(f);
  const auto inputs = tokenize_all(read_texts(f), bundle);

  json sentences = json::array();
  std::string rendered;
  if (f.render == "html") {
    rendered = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>saliency</title></head><body>\n";
  }
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const ForwardTrace trace = forward(bundle, inputs[s], options.target);
    json attributions = json::array();
    for (const Method m : methods) {
      AttributionOptions opt = options;
      opt.seed = options.seed + s;
      const AttributionVector attr = attribute(bundle, trace, m, opt);
      attributions.push_back(to_json(inputs[s], attr));
      if (f.render == "ansi") {
        rendered += attr.method + ": " + render_ansi(inputs[s], attr) + "\n";
      } else if (f.render == "html") {
        rendered += "<p><b>" + html_escape(attr.method) + "</b> " + render_html(inputs[s], attr) + "</p>\n";
      }
    }
    std::vector<double> probs(trace.class_probs.data(), trace.class_probs.data() + trace.class_probs.size());
    sentences.push_back({{"text", detokenize(inputs[s])},
                         {"predicted_class", trace.predicted_class},
                         {"class_probs", probs},
                         {"attributions", attributions}});
  }
  if (f.render == "json") {
    emit_json(f, make_report("attribute", {{"target", f.target}, {"sentences", sentences}}), out);
    return;
  }
  if (f.render == "html") rendered += "</body></html>\n";
  emit(f, rendered, out);
}

void cmd_evaluate(const Flags& f, std::ostream& out) {
  const ModelBundle bundle = load_bundle(f.bundles.front());
  const auto methods = parse_method_list(f.methods);
  const BinSet bins = BinSet::parse(f.bins);
  const auto inputs = tokenize_all(read_texts(f), bundle);
  const auto results = evaluate_dataset(bundle, inputs, methods, attribution_options(f), bins, f.jobs);

  json rows = json::array();
  for (const auto& r : results) {
    json row = to_json(r.report);
    row["method"] = r.name;
    if (f.detail) {
      json detail = json::array();
      for (const auto& s : r.detail) detail.push_back(to_json(s));
      row["sentences"] = detail;
    }
    rows.push_back(row);
  }
  emit_json(f, make_report("evaluate", {{"target", f.target}, {"bins", bins.percentages}, {"methods", rows}}), out);
}

void cmd_robustness(const Flags& f, std::ostream& out) {
  if (f.bundles.size() < 2) {
    throw UsageError("robustness needs at least two --bundle directories");
  }
  const auto bundles = load_bundles(f);
  const auto pairs =
      run_robustness(pointers(bundles), read_texts(f), parse_method_list(f.methods), attribution_options(f), f.jobs);
  json rows = json::array();
  for (const auto& p : pairs) rows.push_back(to_json(p));
  emit_json(f, make_report("robustness", {{"bundles", f.bundles}, {"pairs", rows}}), out);
}

void cmd_anisotropy(const Flags& f, std::ostream& out) {
  const ModelBundle bundle = load_bundle(f.bundles.front());
  const Target target = parse_target(f.target);
  const auto inputs = tokenize_all(read_texts(f), bundle);
  std::vector<ForwardTrace> traces(inputs.size());
  parallel_for(inputs.size(), f.jobs, [&](std::size_t s) { traces[s] = forward(bundle, inputs[s], target); });
  AnisotropyOptions opt;
  opt.samples = f.samples;
  opt.seed = f.seed;
  opt.within_sentence = f.within_sentence;
  const auto profile = anisotropy_profile(bundle, traces, opt);
  emit_json(f,
            make_report("anisotropy", {{"samples", f.samples},
                                       {"seed", f.seed},
                                       {"within_sentence", f.within_sentence},
                                       {"layers", to_json(profile)}}),
            out);
}

void cmd_ablation(const Flags& f, std::ostream& out) {
  const auto bundles = load_bundles(f);
  AblationOptions opt;
  opt.bins = BinSet::parse(f.bins);
  opt.max_removed = f.max_removed;
  opt.target = parse_target(f.target);
  const AblationReport report = run_ablation(pointers(bundles), read_texts(f), opt);
  emit_json(f, make_report("ablation", to_json(report)), out);
}

void cmd_make_fixture(const Flags& f, std::ostream& out) {
  if (f.out.empty()) throw UsageError("make-fixture needs --out DIR");
  const ModelBundle bundle = generate_fixture_bundle(fixture_config(f.layers, f.hidden, f.heads, f.ffn), f.seed);
  save_bundle(bundle, f.out);
  out << make_report("make-fixture", {{"bundle", f.out}, {"seed", f.seed}}).dump(2) << "\n";
}

void cmd_synth(const Flags& f, std::ostream& out) {
  if (f.out.empty() || f.dataset.empty()) throw UsageError("synth needs --out DIR and --dataset FILE");
  save_bundle(planted_keyword_bundle(f.seed), f.out);
  save_dataset(planted_keyword_dataset(f.count, f.seed), f.dataset);
  out << make_report("synth", {{"bundle", f.out}, {"dataset", f.dataset}, {"count", f.count}}).dump(2) << "\n";
}

bool cmd_parity(const Flags& f, std::ostream& out) {
  const ModelBundle bundle = load_bundle(f.bundles.front());
  const auto results = check_parity(bundle, load_reference_fixtures(f.fixtures));
  json rows = json::array();
  bool ok = true;
  for (const auto& r : results) {
    const bool pass = r.tokens_match && r.max_logit_error <= f.tolerance;
    ok = ok && pass;
    rows.push_back({{"text", r.text},
                    {"tokens_match", r.tokens_match},
                    {"max_logit_error", r.max_logit_error},
                    {"pass", pass}});
  }
  emit_json(f, make_report("parity", {{"tolerance", f.tolerance}, {"fixtures", rows}, {"pass", ok}}), out);
  return ok;
}

void install_stderr_logger() {
  static const bool installed = [] {
    auto logger = spdlog::stderr_color_mt("alti");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)installed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  install_stderr_logger();
  Flags f;
  CLI::App app{"Token attribution for transformer encoders"};
  app.require_subcommand(1);

  auto* attribute = app.add_subcommand("attribute", "Per-token attributions for each method");
  add_bundle(attribute, f, false);
  add_text_source(attribute, f);
  add_method_flags(attribute, f);
  attribute->add_option("--render", f.render, "Output format")
      ->check(CLI::IsMember({"json", "ansi", "html"}))
      ->capture_default_str();
  add_out(attribute, f);

  auto* evaluate = app.add_subcommand("evaluate", "Comprehensiveness and sufficiency per method");
  add_bundle(evaluate, f, false);
  add_text_source(evaluate, f);
  add_method_flags(evaluate, f);
  evaluate->add_option("--bins", f.bins, "Percentages removed/kept")->capture_default_str();
  evaluate->add_flag("--detail", f.detail, "Include per-sentence results");
  add_jobs(evaluate, f);
  add_out(evaluate, f);

  auto* robustness = app.add_subcommand("robustness", "Top-25% Jaccard and Spearman across bundles");
  add_bundle(robustness, f, true);
  add_text_source(robustness, f);
  add_method_flags(robustness, f);
  add_jobs(robustness, f);
  add_out(robustness, f);

  auto* anisotropy = app.add_subcommand("anisotropy", "Mean cosine of block outputs and transformed vectors");
  add_bundle(anisotropy, f, false);
  add_text_source(anisotropy, f);
  anisotropy->add_option("--target", f.target, "Classifier readout")->check(CLI::IsMember({"cls", "mask"}));
  anisotropy->add_option("--samples", f.samples, "Number of sampled pairs")->capture_default_str();
  anisotropy->add_option("--seed", f.seed, "Sampling seed")->capture_default_str();
  anisotropy->add_flag("--within-sentence", f.within_sentence, "Sample both vectors from one sentence");
  add_jobs(anisotropy, f);
  add_out(anisotropy, f);

  auto* ablation = app.add_subcommand("ablation", "Norm and LN2 ablations over one or more seeds");
  add_bundle(ablation, f, true);
  add_text_source(ablation, f);
  ablation->add_option("--target", f.target, "Classifier readout")->check(CLI::IsMember({"cls", "mask"}));
  ablation->add_option("--bins", f.bins, "Percentages removed/kept")->capture_default_str();
  ablation->add_option("--max-removed", f.max_removed, "Length of the probability-drop curves")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  add_out(ablation, f);

  auto* make_fixture = app.add_subcommand("make-fixture", "Write a random fixture bundle");
  make_fixture->add_option("--layers", f.layers)->capture_default_str();
  make_fixture->add_option("--hidden", f.hidden)->capture_default_str();
  make_fixture->add_option("--heads", f.heads)->capture_default_str();
  make_fixture->add_option("--ffn", f.ffn)->capture_default_str();
  make_fixture->add_option("--seed", f.seed)->capture_default_str();
  make_fixture->add_option("--out", f.out, "Bundle directory")->required();

  auto* synth = app.add_subcommand("synth", "Write the planted-keyword bundle and dataset");
  synth->add_option("--out", f.out, "Bundle directory")->required();
  synth->add_option("--dataset", f.dataset, "Dataset JSONL path")->required();
  synth->add_option("--count", f.count, "Number of sentences")->capture_default_str();
  synth->add_option("--seed", f.seed)->capture_default_str();

  auto* parity = app.add_subcommand("parity", "Compare core logits with exported reference fixtures");
  add_bundle(parity, f, false);
  parity->add_option("--fixtures", f.fixtures, "Fixtures JSON {text, token_ids, logits}")->required();
  parity->add_option("--tolerance", f.tolerance)->capture_default_str();
  add_out(parity, f);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*attribute) cmd_attribute(f, out);
    if (*evaluate) cmd_evaluate(f, out);
    if (*robustness) cmd_robustness(f, out);
    if (*anisotropy) cmd_anisotropy(f, out);
    if (*ablation) cmd_ablation(f, out);
    if (*make_fixture) cmd_make_fixture(f, out);
    if (*synth) cmd_synth(f, out);
    if (*parity && !cmd_parity(f, out)) {
      err << "error: parity check failed\n";
      return 1;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace alti::cli
