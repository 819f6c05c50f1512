//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "smidiff/checkpoint.hpp"
#include "smidiff/config.hpp"
#include "smidiff/dataset.hpp"
#include "smidiff/errors.hpp"
#include "smidiff/generator.hpp"
#include "smidiff/metrics.hpp"

namespace smidiff {

namespace {

// Positional inputs, or stdin lines when none are given.
std::vector<std::string> inputs_or_stdin(const std::vector<std::string> &given,
                                         std::istream &in) {
  if (!given.empty())
    return given;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (!line.empty())
      lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> read_lines(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw FileError("cannot open '" + path + "'");
  return inputs_or_stdin({}, in);
}

bool same_name(const std::string &a, const std::string &b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(),
                    [](unsigned char x, unsigned char y) {
                      return std::tolower(x) == std::tolower(y);
                    });
}

struct Named {
  std::string id;
  std::string text;
};

// A file with a header naming `column` (any case) is read as a dataset;
// anything else is one entry per line, numbered from 1.
std::vector<Named> read_column_file(const std::string &path,
                                    const std::string &column,
                                    const std::string &id_column) {
  auto lines = read_lines(path);
  std::vector<Named> out;
  if (lines.empty())
    return out;
  std::vector<std::string> header;
  {
    std::stringstream ss(lines.front());
    std::string cell;
    while (std::getline(ss, cell, '\t'))
      header.push_back(cell);
  }
  auto find_column = [&](const std::string &name) {
    return std::find_if(header.begin(), header.end(),
                        [&](const std::string &h) { return same_name(h, name); });
  };
  auto col = find_column(column);
  if (header.size() > 1 && col != header.end()) {
    auto idc = find_column(id_column);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      std::vector<std::string> cells;
      std::stringstream ss(lines[i]);
      std::string cell;
      while (std::getline(ss, cell, '\t'))
        cells.push_back(cell);
      auto at = [&](auto it) {
        auto k = static_cast<std::size_t>(it - header.begin());
        return k < cells.size() ? cells[k] : std::string();
      };
      out.push_back({ idc != header.end() ? at(idc) : std::to_string(i),
                      at(col) });
    }
    return out;
  }
  for (std::size_t i = 0; i < lines.size(); ++i)
    out.push_back({ std::to_string(i + 1), lines[i] });
  return out;
}

std::ostream &open_out(const std::string &path, std::ofstream &file,
                       std::ostream &fallback) {
  if (path.empty() || path == "-")
    return fallback;
  file.open(path);
  if (!file)
    throw FileError("cannot write '" + path + "'");
  return file;
}

// Vocabulary for corrupt: the inputs' tokens plus the ring digits and
// parentheses the operator inserts.
Vocabulary corrupt_vocab(const std::vector<std::string> &smiles) {
  Vocabulary v = build_vocab(smiles);
  for (const char *t: { "(", ")", "1", "2", "3", "4", "5", "6", "7", "8", "9" })
    v.add(t);
  return v;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::istream &in,
            std::ostream &out, std::ostream &err) {
  CLI::App app{ "Text-conditioned SMILES embedding diffusion" };
  app.require_subcommand(1);
  app.name(args.empty() ? "smidiff" : args.front());

  // tokenize --------------------------------------------------------------
  auto *tok = app.add_subcommand("tokenize", "Split SMILES into tokens");
  std::vector<std::string> tok_inputs;
  std::string tok_vocab;
  int tok_n = 256;
  bool tok_ids = false;
  tok->add_option("smiles", tok_inputs, "SMILES strings (default: stdin)");
  tok->add_option("--vocab", tok_vocab, "Vocabulary file for --ids");
  tok->add_option("-n,--length", tok_n, "Padded sequence length")
      ->check(CLI::Range(3, 1 << 20));
  tok->add_flag("--ids", tok_ids, "Print padded ids instead of tokens");

  // lint ------------------------------------------------------------------
  auto *lint = app.add_subcommand("lint", "Validate SMILES and print diagnostics");
  std::vector<std::string> lint_inputs;
  lint->add_option("smiles", lint_inputs, "SMILES strings (default: stdin)");

  // corrupt ---------------------------------------------------------------
  auto *cor = app.add_subcommand("corrupt", "Apply structural corruption");
  std::vector<std::string> cor_inputs;
  double cor_p = 0.4;
  int cor_edits = 3;
  std::uint64_t cor_seed = 0;
  int cor_n = 256;
  cor->add_option("smiles", cor_inputs, "SMILES strings (default: stdin)");
  cor->add_option("--p", cor_p, "Probability of corrupting a molecule")
      ->check(CLI::Range(0.0, 1.0));
  cor->add_option("--max-edits", cor_edits, "Largest number of edits")
      ->check(CLI::PositiveNumber);
  cor->add_option("--seed", cor_seed, "Random seed");
  cor->add_option("-n,--length", cor_n, "Padded sequence length")
      ->check(CLI::Range(3, 1 << 20));

  // make-synth ------------------------------------------------------------
  auto *syn = app.add_subcommand("make-synth", "Write a synthetic dataset");
  std::size_t syn_count = 32;
  std::uint64_t syn_seed = 0;
  std::string syn_out;
  int syn_len = 32;
  syn->add_option("--count", syn_count, "Number of records")
      ->check(CLI::PositiveNumber);
  syn->add_option("--seed", syn_seed, "Random seed");
  syn->add_option("--out", syn_out, "Output TSV (default: stdout)");
  syn->add_option("--max-len", syn_len, "Token budget including [SOS]/[EOS]")
      ->check(CLI::Range(3, 1 << 20));

  // train -----------------------------------------------------------------
  auto *tr = app.add_subcommand("train", "Train a denoiser");
  std::string tr_phase, tr_config, tr_data, tr_out, tr_metrics, tr_format,
      tr_save_config;
  std::optional<std::int64_t> tr_steps;
  std::optional<double> tr_lr;
  std::optional<int> tr_batch, tr_warmup;
  std::optional<std::uint64_t> tr_seed;
  bool tr_joint = false;
  tr->add_option("--phase", tr_phase, "one or two")
      ->check(CLI::IsMember({ "one", "two", "1", "2" }));
  tr->add_option("--config", tr_config, "JSON configuration file");
  tr->add_option("--data", tr_data, "Training TSV")->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--metrics", tr_metrics, "Metrics CSV path");
  tr->add_option("--format", tr_format, "Column mapping, e.g. smiles=SMI");
  tr->add_option("--steps", tr_steps, "Optimizer steps");
  tr->add_option("--lr", tr_lr, "Learning rate");
  tr->add_option("--batch", tr_batch, "Batch size");
  tr->add_option("--warmup", tr_warmup, "Warmup steps");
  tr->add_option("--seed", tr_seed, "Random seed");
  tr->add_flag("--joint", tr_joint, "One model for both phases");
  tr->add_option("--save-config", tr_save_config,
                 "Write the effective configuration here");

  // generate --------------------------------------------------------------
  auto *gen = app.add_subcommand("generate", "Generate SMILES from descriptions");
  std::string gen_m1, gen_m2, gen_desc_file, gen_out, gen_config;
  std::vector<std::string> gen_desc;
  std::optional<int> gen_s1, gen_s2, gen_b, gen_rounds;
  std::optional<std::uint64_t> gen_seed;
  bool gen_no_correct = false, gen_clamp = false;
  gen->add_option("--model-phase1", gen_m1, "Phase-one checkpoint")->required();
  gen->add_option("--model-phase2", gen_m2, "Phase-two checkpoint");
  gen->add_option("--desc", gen_desc, "Description (repeatable)");
  gen->add_option("--desc-file", gen_desc_file,
                  "Dataset TSV or one description per line");
  gen->add_option("--out", gen_out, "Output TSV (default: stdout)");
  gen->add_option("--config", gen_config, "JSON configuration file");
  gen->add_option("--steps1", gen_s1, "Phase-one sampling steps");
  gen->add_option("--steps2", gen_s2, "Phase-two sampling steps");
  gen->add_option("--renoise", gen_b, "Phase-two re-noise step B");
  gen->add_option("--max-rounds", gen_rounds, "Correction rounds");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_flag("--no-correct", gen_no_correct, "Phase one only");
  gen->add_flag("--clamp", gen_clamp, "Clamp predictions to embeddings");

  // evaluate --------------------------------------------------------------
  auto *ev = app.add_subcommand("evaluate", "Score generated SMILES");
  std::string ev_hyp, ev_ref, ev_out;
  bool ev_char = false;
  ev->add_option("--hyp", ev_hyp, "generate output TSV or SMILES lines")
      ->required();
  ev->add_option("--ref", ev_ref, "Dataset TSV or SMILES lines")->required();
  ev->add_option("--out", ev_out, "JSON report path");
  ev->add_flag("--char-bleu", ev_char, "Character-level BLEU");

  // dump-schedule ---------------------------------------------------------
  auto *ds = app.add_subcommand("dump-schedule", "Print the noise schedule");
  int ds_t = 2000, ds_steps = 0;
  std::string ds_kind = "sqrt", ds_out;
  ds->add_option("--T", ds_t, "Diffusion steps")->check(CLI::Range(2, 1 << 24));
  ds->add_option("--kind", ds_kind, "sqrt or linear")
      ->check(CLI::IsMember({ "sqrt", "linear" }));
  ds->add_option("--respace", ds_steps, "Respaced step count (0 = none)");
  ds->add_option("--out", ds_out, "CSV path (default: stdout)");

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1),
                                args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << "\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (*tok) {
      Vocabulary vocab;
      if (tok_ids)
        vocab = tok_vocab.empty() ? Vocabulary() : Vocabulary::load(tok_vocab);
      auto inputs = inputs_or_stdin(tok_inputs, in);
      if (tok_ids && tok_vocab.empty())
        vocab = build_vocab(inputs);
      for (const auto &s: inputs) {
        if (tok_ids) {
          auto seq = tokenize(s, vocab, tok_n);
          for (int i = 0; i < seq.length(); ++i)
            out << (i ? " " : "") << seq.ids()[i];
        } else {
          auto tokens = split_tokens(s);
          if (static_cast<int>(tokens.size()) + 2 > tok_n)
            throw LengthError("'" + s + "' needs " + std::to_string(tokens.size() + 2)
                              + " positions, n = " + std::to_string(tok_n));
          out << "[SOS]";
          for (const auto &t: tokens)
            out << ' ' << t;
          out << " [EOS]";
        }
        out << '\n';
      }
      return kExitOk;
    }

    if (*lint) {
      bool all_valid = true;
      for (const auto &s: inputs_or_stdin(lint_inputs, in)) {
        auto report = validate_smiles(s);
        if (report.valid) {
          out << s << "\tvalid\n";
        } else {
          all_valid = false;
          out << s << "\tinvalid\n" << report.render();
        }
      }
      return all_valid ? kExitOk : kExitData;
    }

    if (*cor) {
      auto inputs = inputs_or_stdin(cor_inputs, in);
      Vocabulary vocab = corrupt_vocab(inputs);
      CorruptParams params;
      params.apply_probability = cor_p;
      params.max_edits = cor_edits;
      Rng rng(cor_seed);
      for (const auto &s: inputs) {
        auto seq = tokenize(s, vocab, cor_n);
        out << detokenize(corrupt(seq, vocab, params, rng), vocab) << '\n';
      }
      return kExitOk;
    }

    if (*syn) {
      auto records = synth_dataset(syn_count, syn_seed, syn_len);
      std::ofstream file;
      write_dataset(open_out(syn_out, file, out), records);
      return kExitOk;
    }

    if (*tr) {
      RunConfig cfg = tr_config.empty() ? RunConfig{}
                                        : load_run_config(tr_config);
      if (!tr_phase.empty())
        cfg.train.phase = train_phase_from_string(tr_phase);
      if (tr_steps)
        cfg.train.max_steps = *tr_steps;
      if (tr_lr)
        cfg.train.adam.lr = *tr_lr;
      if (tr_batch)
        cfg.train.batch_size = *tr_batch;
      if (tr_warmup)
        cfg.train.adam.warmup_steps = *tr_warmup;
      if (tr_seed)
        cfg.train.seed = *tr_seed;
      if (tr_joint)
        cfg.train.joint = true;
      cfg.train.check();

      auto ingest = ingest_dataset(tr_data, std::nullopt, cfg.model.n,
                                   tr_format.empty()
                                       ? ColumnFormat{}
                                       : ColumnFormat::parse(tr_format));
      err << "ingested " << ingest.records.size() << " of " << ingest.total
          << " records (" << ingest.dropped << " dropped)\n";
      if (ingest.records.empty())
        throw DataError("no usable records in '" + tr_data + "'");
      std::vector<std::string> descs;
      for (const auto &r: ingest.records)
        descs.push_back(r.description);
      TextVocabulary text_vocab = build_text_vocab(descs);
      cfg.model.vocab_size = ingest.vocab.size();
      cfg.model.text_vocab_size = text_vocab.size();
      cfg.model.max_timestep = std::max(cfg.model.max_timestep,
                                        cfg.train.total_steps);
      if (!tr_save_config.empty())
        save_run_config(cfg, tr_save_config);

      auto examples = prepare_examples(ingest.records, ingest.vocab, text_vocab,
                                       cfg.model.n, cfg.model.max_text_len);
      ModelBundle bundle;
      bundle.config = cfg.model;
      bundle.train = cfg.train;
      bundle.vocab = ingest.vocab;
      bundle.text_vocab = text_vocab;
      bundle.phase = cfg.train.joint ? "joint"
                                     : std::string(to_string(cfg.train.phase));
      bundle.model = std::make_shared<Denoiser<float>>(
          cfg.model, Rng::splitmix(cfg.train.seed));

      std::ofstream metrics;
      if (!tr_metrics.empty()) {
        metrics.open(tr_metrics);
        if (!metrics)
          throw FileError("cannot write '" + tr_metrics + "'");
      }
      auto hook = [&](std::int64_t step) {
        bundle.step = step;
        const bool final_step = step == cfg.train.max_steps;
        save_checkpoint(bundle, final_step
                                    ? tr_out
                                    : tr_out + ".step" + std::to_string(step));
      };
      auto report = train_loop(*bundle.model, examples, ingest.vocab,
                               cfg.train, tr_metrics.empty() ? nullptr : &metrics,
                               hook);
      if (!report.steps.empty())
        err << "final loss " << report.steps.back().loss << " after "
            << report.steps.size() << " steps\n";
      return kExitOk;
    }

    if (*gen) {
      RunConfig cfg = gen_config.empty() ? RunConfig{}
                                         : load_run_config(gen_config);
      SamplerConfig sc = cfg.sampler;
      if (gen_s1)
        sc.steps1 = *gen_s1;
      if (gen_s2)
        sc.steps2 = *gen_s2;
      if (gen_b)
        sc.renoise = *gen_b;
      if (gen_rounds)
        sc.max_rounds = *gen_rounds;
      if (gen_seed)
        sc.seed = *gen_seed;
      if (gen_clamp)
        sc.clamp = true;
      if (gen_no_correct)
        sc.max_rounds = 0;

      ModelBundle m1 = load_checkpoint(gen_m1);
      std::optional<ModelBundle> m2;
      if (!gen_m2.empty())
        m2 = load_checkpoint(gen_m2);
      const Denoiser<float> *f2 = nullptr;
      if (m2)
        f2 = m2->model.get();
      else if (m1.phase == "joint")
        f2 = m1.model.get();
      if (m2 && !(m2->vocab == m1.vocab))
        throw DataError("phase-two checkpoint uses a different vocabulary");

      std::vector<Named> descs;
      for (std::size_t i = 0; i < gen_desc.size(); ++i)
        descs.push_back({ std::to_string(i + 1), gen_desc[i] });
      if (!gen_desc_file.empty())
        for (auto &d: read_column_file(gen_desc_file, "description", "CID"))
          descs.push_back(std::move(d));
      if (descs.empty())
        throw CLI::RequiredError("--desc or --desc-file");

      SamplerContext ctx;
      ctx.vocab = &m1.vocab;
      ctx.text_vocab = &m1.text_vocab;
      ctx.schedule = build_schedule(m1.train.total_steps, m1.train.schedule);
      ctx.tau = m2 ? m2->train.tau : m1.train.tau;
      std::vector<std::string> texts;
      for (const auto &d: descs)
        texts.push_back(d.text);
      auto results = generate_batch(m1.model.get(), f2, texts, ctx, sc);

      // Share of phase-one failures that are pairing errors (ring closures
      // or parentheses), the kind phase two targets.
      std::size_t p1_invalid = 0, pairing = 0, valid = 0;
      for (const auto &r: results) {
        valid += r.valid;
        auto report = validate_smiles(r.phase1_smiles);
        if (report.valid)
          continue;
        ++p1_invalid;
        pairing += report.has(DiagnosticKind::kUnclosedRing)
                   || report.has(DiagnosticKind::kUnmatchedParenthesis);
      }
      err << "phase one: " << p1_invalid << " of " << results.size()
          << " invalid (" << pairing << " with pairing errors); final: "
          << valid << " valid\n";

      std::ofstream file;
      std::ostream &os = open_out(gen_out, file, out);
      os << "cid\tdescription\tsmiles\tvalid\tcorrected\tphase1_smiles\n";
      for (std::size_t i = 0; i < results.size(); ++i)
        os << descs[i].id << '\t' << descs[i].text << '\t'
           << results[i].smiles << '\t' << (results[i].valid ? 1 : 0) << '\t'
           << (results[i].corrected ? 1 : 0) << '\t'
           << results[i].phase1_smiles << '\n';
      return kExitOk;
    }

    if (*ev) {
      auto hyps = read_column_file(ev_hyp, "smiles", "cid");
      auto refs = read_column_file(ev_ref, "SMILES", "CID");
      std::vector<EvalItem> items;
      for (const auto &h: hyps)
        items.push_back({ h.text, validate_smiles(h.text).valid });
      std::vector<std::string> ref_smiles;
      for (const auto &r: refs)
        ref_smiles.push_back(r.text);
      auto report = evaluate(items, ref_smiles,
                             ev_char ? BleuUnit::kCharacter : BleuUnit::kToken);
      out << report.to_table();
      if (!ev_out.empty()) {
        std::ofstream file(ev_out);
        if (!file)
          throw FileError("cannot write '" + ev_out + "'");
        file << report.to_json() << '\n';
      }
      return kExitOk;
    }

    if (*ds) {
      auto sched = build_schedule(ds_t, schedule_kind_from_string(ds_kind));
      if (ds_steps > 0)
        sched = respace(sched, ds_steps);
      std::ofstream file;
      write_schedule_csv(open_out(ds_out, file, out), sched);
      return kExitOk;
    }
  } catch (const CLI::Error &e) {
    err << "error: " << e.what() << "\n";
    auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  } catch (const InvalidArgument &e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace smidiff
