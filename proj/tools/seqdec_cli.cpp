// seqdec: synthetic model generation, LM training, decoding, sweeps and
// WER scoring over replay models.

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqdec/beam_search.hpp"
#include "seqdec/metrics.hpp"
#include "seqdec/ngram_lm.hpp"
#include "seqdec/replay_model.hpp"
#include "seqdec/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seqdec;

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

unsigned thread_cap(std::size_t work) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("SEQDEC_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return static_cast<unsigned>(std::min<std::size_t>(hw, work));
}

template <typename F>
void parallel_for(std::size_t n, F&& body) {
  const unsigned workers = thread_cap(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : threads) t.join();
}

struct ManifestEntry {
  std::string id;
  std::string file;
  std::string reference;
};

struct Manifest {
  fs::path dir;
  json raw;
  std::vector<ManifestEntry> entries;
};

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path);
  Manifest m;
  m.dir = fs::path(path).parent_path();
  is >> m.raw;
  for (const auto& rec : m.raw.at("models")) {
    m.entries.push_back({rec.at("id").get<std::string>(), rec.at("file").get<std::string>(),
                         rec.at("reference").get<std::string>()});
  }
  return m;
}

std::vector<std::vector<int>> read_corpus(const std::string& path, const Vocabulary& vocab) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open corpus: " + path);
  std::vector<std::vector<int>> corpus;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<int> seq = vocab.tokenize(line);
    seq.push_back(vocab.eos_index());
    corpus.push_back(std::move(seq));
  }
  if (corpus.empty()) throw std::runtime_error("empty corpus: " + path);
  return corpus;
}

// Options shared by decode and sweep; also the config-file surface.
struct DecodeOptions {
  std::string manifest_path;
  std::string lm_path;
  std::string out_path = "-";
  int beam_width = 10;
  int max_length = 200;
  double temperature = 1.0;
  double lm_weight = 0.0;
  double coverage_weight = 0.0;
  double coverage_threshold = 0.5;
  double length_bonus = 0.0;
  double eos_margin = 2.3;
  bool eos_gate = false;

  ScoreConfig score_config() const {
    ScoreConfig sc;
    sc.lm_weight = lm_weight;
    sc.coverage_weight = coverage_weight;
    sc.coverage_threshold = coverage_threshold;
    sc.length_bonus = length_bonus;
    sc.temperature = temperature;
    sc.eos_margin = eos_margin;
    sc.eos_gate_enabled = eos_gate;
    return sc;
  }

  json to_json() const {
    return json{{"models", manifest_path},
                {"lm", lm_path},
                {"beam_width", beam_width},
                {"max_length", max_length},
                {"temperature", temperature},
                {"lm_weight", lm_weight},
                {"coverage_weight", coverage_weight},
                {"coverage_threshold", coverage_threshold},
                {"length_bonus", length_bonus},
                {"eos_margin", eos_margin},
                {"eos_gate", eos_gate}};
  }
};

void add_decode_flags(CLI::App* app, DecodeOptions& opt) {
  // required, but may come from --config instead of the flag
  app->add_option("--models", opt.manifest_path, "manifest.json of the model set");
  app->add_option("--lm", opt.lm_path, "language model file (required when --lm-weight > 0)");
  app->add_option("--out", opt.out_path, "output CSV path, - for stdout");
  app->add_option("--beam-width", opt.beam_width);
  app->add_option("--max-length", opt.max_length);
  app->add_option("--temperature", opt.temperature);
  app->add_option("--lm-weight", opt.lm_weight);
  app->add_option("--coverage-weight", opt.coverage_weight);
  app->add_option("--coverage-threshold", opt.coverage_threshold);
  app->add_option("--length-bonus", opt.length_bonus);
  app->add_option("--eos-margin", opt.eos_margin);
  app->add_flag("--eos-gate", opt.eos_gate, "enable the EOS emission gate");
}

// --config names a JSON file whose keys mirror the long flags
// (underscored); explicit flags win.
void apply_config_file(int argc, char** argv, DecodeOptions& opt) {
  std::string path;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") path = argv[i + 1];
  if (path.empty()) return;
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  json cfg;
  is >> cfg;
  if (cfg.contains("models")) opt.manifest_path = cfg["models"].get<std::string>();
  if (cfg.contains("lm")) opt.lm_path = cfg["lm"].get<std::string>();
  if (cfg.contains("out")) opt.out_path = cfg["out"].get<std::string>();
  if (cfg.contains("beam_width")) opt.beam_width = cfg["beam_width"].get<int>();
  if (cfg.contains("max_length")) opt.max_length = cfg["max_length"].get<int>();
  if (cfg.contains("temperature")) opt.temperature = cfg["temperature"].get<double>();
  if (cfg.contains("lm_weight")) opt.lm_weight = cfg["lm_weight"].get<double>();
  if (cfg.contains("coverage_weight")) opt.coverage_weight = cfg["coverage_weight"].get<double>();
  if (cfg.contains("coverage_threshold"))
    opt.coverage_threshold = cfg["coverage_threshold"].get<double>();
  if (cfg.contains("length_bonus")) opt.length_bonus = cfg["length_bonus"].get<double>();
  if (cfg.contains("eos_margin")) opt.eos_margin = cfg["eos_margin"].get<double>();
  if (cfg.contains("eos_gate")) opt.eos_gate = cfg["eos_gate"].get<bool>();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os;
  if (path != "-") {
    os.open(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write output: " + path);
  }
  return os;
}

std::ostream& out_stream(std::ofstream& file, const std::string& path) {
  return path == "-" ? std::cout : static_cast<std::ostream&>(file);
}

struct UttResult {
  std::string transcript;
  Hypothesis best;
  double score = 0.0;
  ErrorBreakdown cer;
  ErrorBreakdown wer;
};

UttResult decode_one(const ManifestEntry& entry, const fs::path& dir, const CharNGramLM* lm,
                     const DecodeOptions& opt) {
  PrefixTableModel model = PrefixTableModel::load_file((dir / entry.file).string());
  BeamConfig cfg;
  cfg.beam_width = opt.beam_width;
  cfg.max_length = opt.max_length;
  cfg.score = opt.score_config();
  cfg.lm = lm;
  DecodeResult res = beam_search(model, cfg);
  UttResult r;
  r.best = res.best();
  r.score = res.found_finished() ? res.scores.front() : r.best.breakdown.total();
  r.transcript = model.vocab().detokenize(r.best.tokens);
  r.cer = char_errors(entry.reference, r.transcript);
  r.wer = word_errors(entry.reference, r.transcript);
  return r;
}

int cmd_gen(const std::string& out_dir, int count, std::uint64_t seed, SyntheticConfig base) {
  fs::create_directories(out_dir);
  json models = json::array();
  std::ofstream refs(fs::path(out_dir) / "refs.txt", std::ios::binary);
  std::string vocab_json;
  for (int i = 0; i < count; ++i) {
    SyntheticConfig cfg = base;
    cfg.seed = SplitMix64::mix(seed, static_cast<std::uint64_t>(i));
    PrefixTableModel model = generate_synthetic(cfg);
    char name[32];
    std::snprintf(name, sizeof(name), "utt_%03d", i);
    const std::string file = std::string(name) + ".jsonl";
    model.save_file((fs::path(out_dir) / file).string());
    const std::string ref = model.vocab().detokenize(model.reference());
    refs << ref << "\n";
    if (i == 0) vocab_json = model.vocab().to_json().dump();
    models.push_back({{"id", name},
                      {"file", file},
                      {"reference", ref},
                      {"truncation_trap", cfg.truncation_trap},
                      {"beam_trap", cfg.beam_trap}});
  }
  {
    std::ofstream vout(fs::path(out_dir) / "vocab.json", std::ios::binary);
    vout << vocab_json << "\n";
  }
  json manifest{{"version", 1},
                {"seed", seed},
                {"count", count},
                {"generator",
                 {{"vocab_size", base.vocab_size},
                  {"frame_count", base.frame_count},
                  {"transcript_length", base.transcript_length},
                  {"sharpness", base.sharpness},
                  {"distractor_count", base.distractor_count},
                  {"truncation_trap", base.truncation_trap},
                  {"beam_trap", base.beam_trap}}},
                {"models", models}};
  std::ofstream mout(fs::path(out_dir) / "manifest.json", std::ios::binary);
  mout << manifest.dump(2) << "\n";
  std::cout << "wrote " << count << " models to " << out_dir << "\n";
  return 0;
}

int cmd_decode(const DecodeOptions& opt) {
  if (opt.manifest_path.empty()) {
    std::cerr << "error: --models is required (flag or config file)\n";
    return 2;
  }
  if (opt.lm_weight > 0.0 && opt.lm_path.empty()) {
    std::cerr << "error: --lm-weight > 0 requires --lm <file>\n";
    return 2;
  }
  Manifest manifest = load_manifest(opt.manifest_path);
  std::optional<CharNGramLM> lm;
  if (!opt.lm_path.empty()) {
    std::ifstream is(opt.lm_path);
    if (!is) throw std::runtime_error("cannot open LM: " + opt.lm_path);
    json j;
    is >> j;
    lm = CharNGramLM::from_json(j);
  }

  std::vector<UttResult> results(manifest.entries.size());
  parallel_for(manifest.entries.size(), [&](std::size_t i) {
    results[i] = decode_one(manifest.entries[i], manifest.dir, lm ? &*lm : nullptr, opt);
  });

  std::ofstream file = open_out(opt.out_path);
  std::ostream& os = out_stream(file, opt.out_path);
  os << "utterance_id,transcript,model_logp,lm_logp,coverage,length,score,"
        "ref_len,S,D,I,cer,wer\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const UttResult& r = results[i];
    os << manifest.entries[i].id << "," << r.transcript << "," << fmt(r.best.breakdown.model)
       << "," << fmt(r.best.breakdown.lm) << "," << fmt(r.best.breakdown.coverage) << ","
       << fmt(r.best.breakdown.length) << "," << fmt(r.score) << "," << r.cer.reference_length
       << "," << r.cer.substitutions << "," << r.cer.deletions << "," << r.cer.insertions << ","
       << fmt(r.cer.rate()) << "," << fmt(r.wer.rate()) << "\n";
  }
  os << "# config " << opt.to_json().dump() << "\n";
  return 0;
}

int cmd_sweep(const DecodeOptions& base, const std::vector<double>& temperatures,
              const std::vector<int>& widths, const std::vector<std::string>& strategies) {
  if (base.manifest_path.empty()) {
    std::cerr << "error: --models is required (flag or config file)\n";
    return 2;
  }
  if (base.lm_weight > 0.0 && base.lm_path.empty()) {
    std::cerr << "error: --lm-weight > 0 requires --lm <file>\n";
    return 2;
  }
  Manifest manifest = load_manifest(base.manifest_path);
  std::optional<CharNGramLM> lm;
  if (!base.lm_path.empty()) {
    std::ifstream is(base.lm_path);
    if (!is) throw std::runtime_error("cannot open LM: " + base.lm_path);
    json j;
    is >> j;
    lm = CharNGramLM::from_json(j);
  }

  std::ofstream file = open_out(base.out_path);
  std::ostream& os = out_stream(file, base.out_path);
  os << "temperature,beam_width,strategy,utterance_id,ref_len,S,D,I,cer,wer\n";

  for (double t : temperatures) {
    for (int w : widths) {
      for (const std::string& strategy : strategies) {
        DecodeOptions opt = base;
        opt.temperature = t;
        opt.beam_width = w;
        if (strategy == "eos-gate") {
          opt.eos_gate = true;
          opt.coverage_weight = 0.0;
          opt.length_bonus = 0.0;
        } else if (strategy == "length-bonus") {
          opt.eos_gate = false;
          opt.coverage_weight = 0.0;
        } else if (strategy == "coverage") {
          opt.eos_gate = false;
          opt.length_bonus = 0.0;
        } else if (strategy != "none") {
          std::cerr << "error: unknown strategy " << strategy << "\n";
          return 2;
        }

        std::vector<UttResult> results(manifest.entries.size());
        parallel_for(manifest.entries.size(), [&](std::size_t i) {
          results[i] = decode_one(manifest.entries[i], manifest.dir, lm ? &*lm : nullptr, opt);
        });

        ErrorBreakdown agg;
        for (std::size_t i = 0; i < results.size(); ++i) {
          const ErrorBreakdown& b = results[i].cer;
          os << fmt(t) << "," << w << "," << strategy << "," << manifest.entries[i].id << ","
             << b.reference_length << "," << b.substitutions << "," << b.deletions << ","
             << b.insertions << "," << fmt(b.rate()) << "," << fmt(results[i].wer.rate())
             << "\n";
          agg.substitutions += b.substitutions;
          agg.deletions += b.deletions;
          agg.insertions += b.insertions;
          agg.reference_length += b.reference_length;
        }
        os << fmt(t) << "," << w << "," << strategy << ",ALL," << agg.reference_length << ","
           << agg.substitutions << "," << agg.deletions << "," << agg.insertions << ","
           << fmt(agg.rate()) << "," << fmt(agg.rate()) << "\n";
      }
    }
  }
  json footer = base.to_json();
  footer["temperatures"] = temperatures;
  footer["widths"] = widths;
  footer["strategies"] = strategies;
  os << "# config " << footer.dump() << "\n";
  return 0;
}

int cmd_score(const std::string& ref_path, const std::string& hyp_path,
              const std::string& out_path) {
  std::ifstream rf(ref_path), hf(hyp_path);
  if (!rf) throw std::runtime_error("cannot open reference file: " + ref_path);
  if (!hf) throw std::runtime_error("cannot open hypothesis file: " + hyp_path);
  std::ofstream file = open_out(out_path);
  std::ostream& os = out_stream(file, out_path);
  os << "utterance_id,ref_len,S,D,I,wer,cer\n";
  std::string ref, hyp;
  int idx = 0;
  ErrorBreakdown agg, agg_char;
  while (std::getline(rf, ref)) {
    if (!std::getline(hf, hyp)) throw std::runtime_error("hypothesis file ends early");
    ErrorBreakdown w = word_errors(ref, hyp);
    ErrorBreakdown c = char_errors(ref, hyp);
    char id[32];
    std::snprintf(id, sizeof(id), "utt_%03d", idx++);
    os << id << "," << w.reference_length << "," << w.substitutions << "," << w.deletions << ","
       << w.insertions << "," << fmt(w.rate()) << "," << fmt(c.rate()) << "\n";
    agg.substitutions += w.substitutions;
    agg.deletions += w.deletions;
    agg.insertions += w.insertions;
    agg.reference_length += w.reference_length;
    agg_char.substitutions += c.substitutions;
    agg_char.deletions += c.deletions;
    agg_char.insertions += c.insertions;
    agg_char.reference_length += c.reference_length;
  }
  os << "ALL," << agg.reference_length << "," << agg.substitutions << "," << agg.deletions << ","
     << agg.insertions << "," << fmt(agg.rate()) << "," << fmt(agg_char.rate()) << "\n";
  os << "# config {\"ref\":\"" << ref_path << "\",\"hyp\":\"" << hyp_path << "\"}\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decoding and loss toolkit for attention-based recognizers"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic replay models");
  std::string gen_out = "models";
  int gen_count = 10;
  std::uint64_t gen_seed = 0;
  SyntheticConfig gen_cfg;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--count", gen_count, "number of models");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--vocab-size", gen_cfg.vocab_size, "vocabulary size incl. EOS");
  gen->add_option("--frame-count", gen_cfg.frame_count, "frames (0: one per token)");
  gen->add_option("--transcript-length", gen_cfg.transcript_length);
  gen->add_option("--sharpness", gen_cfg.sharpness, "logit margin scale kappa");
  gen->add_option("--distractor-count", gen_cfg.distractor_count);
  gen->add_flag("--truncation-trap", gen_cfg.truncation_trap);
  gen->add_flag("--beam-trap", gen_cfg.beam_trap);

  // lm train / lm ppl
  auto* lm = app.add_subcommand("lm", "language model commands");
  lm->require_subcommand(1);
  auto* lm_train = lm->add_subcommand("train", "train a character n-gram LM");
  std::string lmt_corpus, lmt_vocab, lmt_out = "-";
  int lmt_order = 3;
  std::string lmt_smoothing = "add_k";
  double lmt_k = 1.0, lmt_alpha = 0.4;
  lm_train->add_option("--corpus", lmt_corpus, "transcript file, one per line")->required();
  lm_train->add_option("--vocab", lmt_vocab, "vocab.json (default: WSJ character set)");
  lm_train->add_option("--order", lmt_order);
  lm_train->add_option("--smoothing", lmt_smoothing, "add_k or stupid_backoff");
  lm_train->add_option("--k", lmt_k);
  lm_train->add_option("--alpha", lmt_alpha);
  lm_train->add_option("--out", lmt_out, "output LM JSON path");

  auto* lm_ppl = lm->add_subcommand("ppl", "per-character perplexity of a corpus");
  std::string lmp_lm, lmp_corpus;
  lm_ppl->add_option("--lm", lmp_lm)->required();
  lm_ppl->add_option("--corpus", lmp_corpus)->required();

  // decode
  auto* decode = app.add_subcommand("decode", "beam-search decode a model set");
  DecodeOptions dec_opt;
  std::string dec_config;
  add_decode_flags(decode, dec_opt);
  decode->add_option("--config", dec_config, "JSON config file; flags win");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "grid sweep over temperature/width/strategy");
  DecodeOptions sweep_opt;
  std::string sweep_config;
  std::vector<double> sweep_temps{1.0};
  std::vector<int> sweep_widths{10};
  std::vector<std::string> sweep_strategies{"none"};
  add_decode_flags(sweep, sweep_opt);
  sweep->add_option("--config", sweep_config, "JSON config file; flags win");
  sweep->add_option("--temperatures", sweep_temps)->delimiter(',');
  sweep->add_option("--widths", sweep_widths)->delimiter(',');
  sweep->add_option("--strategies", sweep_strategies)->delimiter(',');

  // score
  auto* score = app.add_subcommand("score", "WER/CER report for ref/hyp text files");
  std::string score_ref, score_hyp, score_out = "-";
  score->add_option("--ref", score_ref)->required();
  score->add_option("--hyp", score_hyp)->required();
  score->add_option("--out", score_out);

  try {
    // config file first so explicit flags override it
    bool is_decode = false, is_sweep = false;
    for (int i = 1; i < argc; ++i) {
      if (std::string(argv[i]) == "decode") is_decode = true;
      if (std::string(argv[i]) == "sweep") is_sweep = true;
      break;
    }
    if (is_decode) apply_config_file(argc, argv, dec_opt);
    if (is_sweep) apply_config_file(argc, argv, sweep_opt);

    app.parse(argc, argv);

    if (gen->parsed()) return cmd_gen(gen_out, gen_count, gen_seed, gen_cfg);
    if (lm_train->parsed()) {
      Vocabulary vocab = lmt_vocab.empty()
                             ? Vocabulary::wsj_chars()
                             : [&] {
                                 std::ifstream is(lmt_vocab);
                                 if (!is) throw std::runtime_error("cannot open vocab: " + lmt_vocab);
                                 json j;
                                 is >> j;
                                 return Vocabulary::from_json(j);
                               }();
      auto corpus = read_corpus(lmt_corpus, vocab);
      CharNGramLM model = CharNGramLM::train(corpus, vocab, lmt_order,
                                             lm_smoothing_from_string(lmt_smoothing), lmt_k,
                                             lmt_alpha);
      std::ofstream file = open_out(lmt_out);
      out_stream(file, lmt_out) << model.to_json().dump() << "\n";
      return 0;
    }
    if (lm_ppl->parsed()) {
      std::ifstream is(lmp_lm);
      if (!is) throw std::runtime_error("cannot open LM: " + lmp_lm);
      json j;
      is >> j;
      CharNGramLM model = CharNGramLM::from_json(j);
      auto corpus = read_corpus(lmp_corpus, model.vocab());
      std::cout << fmt(model.perplexity(corpus)) << "\n";
      return 0;
    }
    if (decode->parsed()) return cmd_decode(dec_opt);
    if (sweep->parsed()) return cmd_sweep(sweep_opt, sweep_temps, sweep_widths, sweep_strategies);
    if (score->parsed()) return cmd_score(score_ref, score_hyp, score_out);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
