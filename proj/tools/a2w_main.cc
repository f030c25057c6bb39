// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors
//
// a2w: command-line driver for corpus generation, training, decoding,
// attention analysis and embedding inspection.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "a2w/analysis.h"
#include "a2w/binary_io.h"
#include "a2w/corpus.h"
#include "a2w/decoding.h"
#include "a2w/embeddings.h"
#include "a2w/errors.h"
#include "a2w/run_config.h"
#include "a2w/training.h"

namespace fs = std::filesystem;
using namespace a2w;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value configuration file");
  cmd->add_option("--set", c.sets, "override one key (key=value); repeatable");
}

// Defaults, then the config file, then --set, then the subcommand's own flags.
RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config_file.empty()) cfg.load_file(c.config_file);
  for (const auto& s : c.sets) cfg.set_assignment(s);
  return cfg;
}

void log_config(const std::string& command, const RunConfig& cfg) {
  std::cerr << "# a2w " << command << " resolved config\n" << cfg.resolved();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

void check_split(const std::string& split) {
  if (split != "train" && split != "val" && split != "test") {
    fail(ErrorKind::kUsage, "--split must be train, val or test, got '" + split + "'");
  }
}

// ---------------------------------------------------------------------------

void run_gen_corpus(RunConfig cfg, const fs::path& out, std::optional<std::uint64_t> seed,
                    std::optional<int> vocab_size) {
  if (seed) cfg.corpus_seed = *seed;
  if (vocab_size) cfg.corpus.vocab_size = *vocab_size;
  log_config("gen-corpus", cfg);
  cfg.corpus.validate();
  Rng rng = Rng::derive(cfg.corpus_seed, "corpus");
  const Corpus corpus = generate_corpus(cfg.corpus, rng);
  ensure_dir(out);
  write_corpus(out, corpus);
  write_file_atomic(out / "config.txt", cfg.resolved());
  std::cout << "wrote " << corpus.train.size() << " train, " << corpus.val.size() << " val, "
            << corpus.test.size() << " test utterances to " << out.string() << "\n";
}

void run_train(RunConfig cfg, const fs::path& corpus_dir, const fs::path& out,
               std::optional<int> epochs, bool resume) {
  if (epochs) cfg.train.epochs = *epochs;
  const Vocabulary vocab = read_vocabulary(corpus_dir / "vocab.txt");
  const auto train_set = read_split(corpus_dir, "train", &vocab);
  const auto val_set = read_split(corpus_dir, "val", &vocab);
  if (train_set.empty()) fail(ErrorKind::kData, "training split is empty");
  cfg.model.vocab_size = vocab.size();
  cfg.model.feature_dim = static_cast<int>(train_set.front().features.cols());
  log_config("train", cfg);
  std::cerr << "model.feature_dim = " << cfg.model.feature_dim << " (from corpus)\n"
            << "model.vocab_size = " << cfg.model.vocab_size << " (from corpus)\n";

  ensure_dir(out);
  Checkpoint start;
  const fs::path last = out / "last.a2wc";
  if (resume && fs::exists(last)) {
    start = load_checkpoint(last);
    if (start.model != cfg.model) {
      fail(ErrorKind::kConfig, "checkpoint " + last.string() + " was trained with a different model config");
    }
    start.train.epochs = cfg.train.epochs;
    std::cerr << "resuming from " << last.string() << " after epoch " << start.epoch << "\n";
  } else {
    start = initial_checkpoint(cfg.model, cfg.train);
    std::error_code ec;
    fs::remove(out / "metrics.tsv", ec);
  }
  write_file_atomic(out / "config.txt", cfg.resolved());
  TrainOptions options;
  options.out_dir = out;
  options.log = &std::cerr;
  const TrainResult result = train(train_set, val_set, vocab, std::move(start), options);
  if (!result.metrics.empty()) {
    const auto& m = result.metrics.back();
    std::cout << "epoch " << m.epoch << " train_nll " << format_double(m.train_nll) << " val_wer "
              << format_double(m.val_wer) << "\n";
  }
}

void run_decode(RunConfig cfg, const fs::path& corpus_dir, const fs::path& ckpt_path,
                const std::string& split, std::optional<int> beam, const fs::path& out) {
  check_split(split);
  if (beam) cfg.beam = *beam;
  if (cfg.beam < 1) fail(ErrorKind::kUsage, "--beam must be >= 1");
  log_config("decode", cfg);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Vocabulary vocab = read_vocabulary(corpus_dir / "vocab.txt");
  if (vocab.size() != ckpt.model.vocab_size) {
    fail(ErrorKind::kData, "corpus vocabulary does not match the checkpoint");
  }
  const auto utts = read_split(corpus_dir, split, &vocab);
  ensure_dir(out / "traces");
  std::vector<DecodeResult> results;
  std::vector<std::pair<std::string, std::vector<std::string>>> refs, hyps;
  std::vector<std::vector<std::string>> ref_lists, hyp_lists;
  const auto max_len = static_cast<std::size_t>(std::max(cfg.max_len, 0));
  for (const auto& u : utts) {
    DecodeResult r = cfg.beam == 1 ? greedy_decode(u, ckpt.params, ckpt.model, vocab, max_len)
                                   : beam_decode(u, ckpt.params, ckpt.model, vocab, cfg.beam, max_len);
    write_trace(out / "traces" / (u.id + ".a2wa"), u.id, r.trace);
    refs.emplace_back(u.id, u.words);
    hyps.emplace_back(u.id, r.hypothesis);
    ref_lists.push_back(u.words);
    hyp_lists.push_back(r.hypothesis);
    results.push_back(std::move(r));
  }
  write_transcripts(out / "hyp.txt", hyps);
  write_transcripts(out / "ref.txt", refs);
  write_file_atomic(out / "split.txt", split + "\n");
  write_file_atomic(out / "config.txt", cfg.resolved());
  const double w = utts.empty() ? 0.0 : corpus_wer(ref_lists, hyp_lists);
  write_file_atomic(out / "wer.txt", format_double(w) + "\n");
  std::cout << "split " << split << " utterances " << utts.size() << " WER " << format_double(w) << "\n";
}

void run_analyze(RunConfig cfg, const std::vector<std::string>& decode_dirs,
                 const fs::path& alignments_path, bool zero_wer_only, bool drop_last,
                 const fs::path& out) {
  log_config("analyze-attn", cfg);
  const AlignmentMap alignments = read_alignments(alignments_path);
  ensure_dir(out);
  std::vector<UtteranceErrors> errors;
  std::vector<BoundaryPrediction> predictions;
  std::map<std::string, double> zero_fraction;
  for (const auto& dir_name : decode_dirs) {
    const fs::path dir = dir_name;
    const auto split_lines = read_lines(dir / "split.txt");
    if (split_lines.size() != 1) fail(ErrorKind::kFormat, (dir / "split.txt").string() + ": expected one line");
    const std::string split = split_lines[0];
    const TranscriptMap hyps = read_transcripts(dir / "hyp.txt");
    const TranscriptMap refs = read_transcripts(dir / "ref.txt");
    const ZeroWerSelection sel = select_zero_wer(hyps, refs);
    zero_fraction[split] = sel.fraction;
    std::set<std::string> chosen(sel.utt_ids.begin(), sel.utt_ids.end());
    for (const auto& [id, hyp] : hyps) {
      auto al = alignments.find(id);
      if (al == alignments.end()) fail(ErrorKind::kData, "no alignment for " + id);
      const bool perfect = chosen.count(id) > 0;
      if (zero_wer_only ? !perfect : hyp.size() != al->second.size()) continue;
      if (hyp.empty()) continue;
      const auto [trace_id, trace] = read_trace(dir / "traces" / (id + ".a2wa"));
      if (trace_id != id) fail(ErrorKind::kData, "trace for " + id + " names " + trace_id);
      BoundaryPrediction p = predict_boundaries(trace, hyp.size(), hyp, cfg.frame_mapping);
      p.utt_id = id;
      // Substituted words are compared by position only.
      BoundaryPrediction positional = p;
      if (!perfect) {
        for (auto& w : positional.words) w.word.clear();
      }
      errors.push_back({id, split, boundary_errors(positional, al->second, cfg.compare)});
      predictions.push_back(std::move(p));
    }
  }
  write_boundaries(out / "boundaries.txt", predictions);
  write_file_atomic(out / "config.txt", cfg.resolved());
  if (errors.empty()) {
    std::cout << "no 0-WER utterances; nothing to analyze\n";
    return;
  }
  FrameErrorReport report = aggregate_report(errors);
  for (auto& [split, r] : report.splits) r.zero_wer_fraction = zero_fraction[split];
  const std::string table = format_report_table(report);
  write_file_atomic(out / "report.txt", table);
  write_file_atomic(out / "report.tsv", format_report_kv(report));
  std::cout << table;
  for (const auto& [split, r] : report.splits) {
    const ErrorStats& s = drop_last ? r.without_last : r.all_words;
    std::cout << split << (drop_last ? " without last word" : " all words") << ": mean "
              << format_double(s.mean) << " std " << format_double(s.std) << " over " << s.words
              << " words, " << r.utterances << " utterances, 0-WER fraction "
              << format_double(r.zero_wer_fraction) << "\n";
  }
}

void run_embed(RunConfig cfg, const fs::path& corpus_dir, const fs::path& ckpt_path,
               const std::vector<std::string>& splits, const fs::path& out) {
  log_config("embed", cfg);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Vocabulary vocab = read_vocabulary(corpus_dir / "vocab.txt");
  if (vocab.size() != ckpt.model.vocab_size) {
    fail(ErrorKind::kData, "corpus vocabulary does not match the checkpoint");
  }
  const auto max_len = static_cast<std::size_t>(std::max(cfg.max_len, 0));
  std::vector<SpeechWordVector> vectors;
  for (const auto& split : splits) {
    check_split(split);
    for (const auto& u : read_split(corpus_dir, split, &vocab)) {
      const EncoderStates enc = encode(u.features, ckpt.params, ckpt.model);
      const DecodeResult r = greedy_decode(u, enc, ckpt.params, ckpt.model, vocab, max_len);
      auto v = extract_embeddings(r, enc, cfg.include_eos);
      vectors.insert(vectors.end(), v.begin(), v.end());
    }
  }
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_embeddings(out, vectors);
  std::cout << "wrote " << vectors.size() << " embeddings to " << out.string() << "\n";
}

void run_nn(RunConfig cfg, const fs::path& emb_path, std::optional<int> k,
            const std::string& word, const fs::path& out) {
  if (k) cfg.nn_k = *k;
  if (cfg.nn_k < 1) fail(ErrorKind::kUsage, "--k must be >= 1");
  log_config("nn", cfg);
  const auto vectors = read_embeddings(emb_path);
  std::vector<SpeechWordVector> queries;
  std::vector<std::vector<Neighbor>> results;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!word.empty() && vectors[i].word != word) continue;
    queries.push_back(vectors[i]);
    results.push_back(nearest_neighbors_of(i, vectors, static_cast<std::size_t>(cfg.nn_k), cfg.metric));
  }
  if (!word.empty() && queries.empty()) fail(ErrorKind::kData, "no embeddings for word '" + word + "'");
  const std::string report = format_nn_report(queries, results);
  if (out.empty()) {
    std::cout << report;
  } else {
    write_file_atomic(out, report);
    std::cout << "wrote neighbours of " << queries.size() << " tokens to " << out.string() << "\n";
  }
}

void run_project(RunConfig cfg, const fs::path& emb_path, std::optional<int> sample,
                 const std::string& method, const fs::path& out) {
  if (sample) cfg.sample = *sample;
  if (!method.empty()) cfg.set("project.method", method);
  if (cfg.sample < 1) fail(ErrorKind::kUsage, "--sample must be >= 1");
  log_config("project", cfg);
  const auto all = read_embeddings(emb_path);
  std::vector<SpeechWordVector> chosen;
  for (std::size_t i : sample_indices(all.size(), static_cast<std::size_t>(cfg.sample), cfg.sample_seed)) {
    chosen.push_back(all[i]);
  }
  const Tensor x = stack_vectors(chosen);
  Tensor y;
  if (cfg.projection == "pca") {
    const PcaResult r = pca_project(x, 2);
    y = r.projection;
    std::cerr << "explained variance " << format_double(r.explained_ratio[0]) << " "
              << format_double(r.explained_ratio[1]) << "\n";
  } else {
    const TsneResult r = tsne_project(x, cfg.tsne);
    y = r.y;
    std::cerr << "t-SNE KL " << format_double(r.kl.front()) << " -> " << format_double(r.kl.back()) << "\n";
  }
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_projection(out, chosen, y);
  std::cout << "wrote " << chosen.size() << " projected points to " << out.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"a2w: acoustic-to-word attention model laboratory"};
  app.require_subcommand(1);

  Common common;

  std::string out, corpus, ckpt, split = "test", alignments, embeddings, word, method;
  std::optional<std::uint64_t> seed;
  std::optional<int> vocab_size, epochs, beam, k, sample;
  std::vector<std::string> decode_dirs, splits{"train", "val", "test"};
  bool resume = false, zero_wer_only = false, drop_last = false;

  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus directory");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--seed", seed, "corpus seed (corpus.seed)");
  gen->add_option("--vocab-size", vocab_size, "number of words (corpus.vocab_size)");
  add_common(gen, common);

  auto* tr = app.add_subcommand("train", "Train a model; writes last.a2wc and metrics.tsv");
  tr->add_option("--corpus", corpus, "corpus directory")->required();
  tr->add_option("--out", out, "run directory")->required();
  tr->add_option("--epochs", epochs, "total epochs (train.epochs)");
  tr->add_flag("--resume", resume, "continue from <out>/last.a2wc if present");
  add_common(tr, common);

  auto* dec = app.add_subcommand("decode", "Decode a split; writes hypotheses and attention traces");
  dec->add_option("--corpus", corpus, "corpus directory")->required();
  dec->add_option("--ckpt", ckpt, "checkpoint file")->required();
  dec->add_option("--split", split, "train, val or test")->capture_default_str();
  dec->add_option("--beam", beam, "beam width (decode.beam, default 1)");
  dec->add_option("--out", out, "output directory")->required();
  add_common(dec, common);

  auto* an = app.add_subcommand("analyze-attn", "Word boundaries from attention and frame-error report");
  an->add_option("--decodes", decode_dirs, "decode output directory; repeatable")->required();
  an->add_option("--alignments", alignments, "alignments.txt of the corpus")->required();
  an->add_flag("--zero-wer-only", zero_wer_only,
               "use only utterances decoded without errors (otherwise those with matching length)");
  an->add_flag("--drop-last-word", drop_last, "summarize statistics without each final word");
  an->add_option("--out", out, "output directory")->required();
  add_common(an, common);

  auto* em = app.add_subcommand("embed", "Extract speech-word-vectors");
  em->add_option("--corpus", corpus, "corpus directory")->required();
  em->add_option("--ckpt", ckpt, "checkpoint file")->required();
  em->add_option("--split", splits, "splits to embed; repeatable")->capture_default_str();
  em->add_option("--out", out, "embedding file")->required();
  add_common(em, common);

  auto* nn = app.add_subcommand("nn", "Nearest neighbours of embedding tokens");
  nn->add_option("--embeddings", embeddings, "embedding file")->required();
  nn->add_option("--k", k, "neighbours per query (nn.k, default 10)");
  nn->add_option("--word", word, "only query tokens of this word");
  nn->add_option("--out", out, "report file (default: stdout)");
  add_common(nn, common);

  auto* pr = app.add_subcommand("project", "2-D projection of a sample of embeddings");
  pr->add_option("--embeddings", embeddings, "embedding file")->required();
  pr->add_option("--sample", sample, "points to sample (project.sample, default 300)");
  pr->add_option("--method", method, "tsne or pca (project.method)");
  pr->add_option("--out", out, "TSV output")->required();
  add_common(pr, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code_for(ErrorKind::kUsage);
  }

  try {
    const RunConfig cfg = resolve(common);
    if (*gen) run_gen_corpus(cfg, out, seed, vocab_size);
    else if (*tr) run_train(cfg, corpus, out, epochs, resume);
    else if (*dec) run_decode(cfg, corpus, ckpt, split, beam, out);
    else if (*an) run_analyze(cfg, decode_dirs, alignments, zero_wer_only, drop_last, out);
    else if (*em) run_embed(cfg, corpus, ckpt, splits, out);
    else if (*nn) run_nn(cfg, embeddings, k, word, out);
    else if (*pr) run_project(cfg, embeddings, sample, method, out);
  } catch (const Error& e) {
    std::cerr << "a2w: " << error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "a2w: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
