//
// SPDX-License-Identifier: Apache-2.0
//

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "smidiff/checkpoint.hpp"
#include "smidiff/cli.hpp"
#include "smidiff/dataset.hpp"
#include "smidiff/diffusion.hpp"
#include "smidiff/errors.hpp"
#include "smidiff/generator.hpp"
#include "smidiff/metrics.hpp"
#include "smidiff/smiles_graph.hpp"
#include "smidiff/smiles_tok.hpp"

namespace py = pybind11;
using namespace smidiff;

namespace {

py::dict report_dict(const ValidityReport &r) {
  py::list diags;
  for (const auto &d: r.diagnostics)
    diags.append(py::make_tuple(std::string(to_string(d.kind)), d.position,
                                d.message));
  py::dict out;
  out["valid"] = r.valid;
  out["diagnostics"] = diags;
  return out;
}

py::dict eval_dict(const EvalReport &r) {
  py::dict out;
  out["bleu"] = r.bleu;
  out["exact"] = r.exact;
  out["levenshtein"] = r.levenshtein;
  out["validity"] = r.validity;
  out["morgan_fts"] = r.fts_defined ? py::cast(r.morgan_fts) : py::none();
  out["total"] = r.total;
  return out;
}

std::optional<Fingerprint> fingerprint_of(const std::string &smiles) {
  auto g = molecule_from_smiles(smiles);
  if (!g)
    return std::nullopt;
  return morgan_fingerprint(*g);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Text-conditioned SMILES embedding diffusion (native core)";

  py::register_exception<Error>(m, "SmidiffError", PyExc_ValueError);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<>())
      .def(py::init<std::vector<std::string>>(), py::arg("tokens"))
      .def("id", &Vocabulary::id)
      .def("token", &Vocabulary::token)
      .def_property_readonly("tokens", &Vocabulary::tokens)
      .def("__len__", &Vocabulary::size)
      .def("__contains__", &Vocabulary::contains);

  m.def("split_tokens", &split_tokens, py::arg("smiles"),
        "Maximal-munch SMILES tokens.");
  m.def("build_vocab",
        [](const std::vector<std::string> &corpus) { return build_vocab(corpus); },
        py::arg("corpus"));
  m.def(
      "encode",
      [](const std::string &smiles, const Vocabulary &vocab, int n) {
        return tokenize(smiles, vocab, n).ids();
      },
      py::arg("smiles"), py::arg("vocab"), py::arg("n"),
      "Padded id sequence: [SOS] tokens [EOS] [PAD]...");
  m.def(
      "decode",
      [](const std::vector<TokenId> &ids, const Vocabulary &vocab) {
        return detokenize(std::span<const TokenId>(ids), vocab);
      },
      py::arg("ids"), py::arg("vocab"));

  m.def(
      "validate", [](const std::string &s) { return report_dict(validate_smiles(s)); },
      py::arg("smiles"));
  m.def(
      "corrupt",
      [](const std::string &smiles, double p, int max_edits, std::uint64_t seed,
         int n) {
        Vocabulary vocab = build_vocab(std::vector<std::string>{ smiles });
        CorruptParams params{ p, max_edits, seed };
        Rng rng(seed);
        return detokenize(corrupt(tokenize(smiles, vocab, n), vocab, params, rng),
                          vocab);
      },
      py::arg("smiles"), py::arg("p") = 0.4, py::arg("max_edits") = 3,
      py::arg("seed") = 0, py::arg("n") = 256);
  m.def(
      "tanimoto",
      [](const std::string &a, const std::string &b) -> std::optional<double> {
        auto fa = fingerprint_of(a), fb = fingerprint_of(b);
        if (!fa || !fb)
          return std::nullopt;
        return smidiff::tanimoto(*fa, *fb);
      },
      py::arg("a"), py::arg("b"),
      "Morgan (radius 2, 2048 bits) Tanimoto similarity; None if either is invalid.");

  m.def(
      "schedule",
      [](int T, const std::string &kind) {
        auto s = build_schedule(
            T, kind == "linear" ? ScheduleKind::kLinear : ScheduleKind::kSqrt);
        py::dict out;
        out["t"] = s.timesteps;
        out["beta"] = s.beta;
        out["alpha_bar"] = s.alpha_bar;
        return out;
      },
      py::arg("T") = 2000, py::arg("kind") = "sqrt");
  m.def(
      "posterior_coefficients",
      [](int T, int t) {
        auto c = posterior_coefficients(build_schedule(T), t);
        return py::make_tuple(c.c0, c.ct, c.variance);
      },
      py::arg("T"), py::arg("t"), "(c0, ct, variance) of the reverse step.");

  m.def(
      "bleu",
      [](const std::vector<std::string> &hyps,
         const std::vector<std::string> &refs) {
        std::vector<std::vector<std::string>> h, r;
        for (const auto &s: hyps)
          h.push_back(bleu_units(s, BleuUnit::kToken));
        for (const auto &s: refs)
          r.push_back(bleu_units(s, BleuUnit::kToken));
        return smidiff::bleu(h, r);
      },
      py::arg("hypotheses"), py::arg("references"));
  m.def(
      "levenshtein",
      [](const std::string &a, const std::string &b) { return smidiff::levenshtein(a, b); },
      py::arg("a"), py::arg("b"));
  m.def(
      "evaluate",
      [](const std::vector<std::string> &hyps,
         const std::vector<std::string> &refs) {
        std::vector<EvalItem> items;
        for (const auto &h: hyps)
          items.push_back({ h, validate_smiles(h).valid });
        return eval_dict(smidiff::evaluate(items, refs));
      },
      py::arg("hypotheses"), py::arg("references"));

  m.def(
      "synth_dataset",
      [](std::size_t count, std::uint64_t seed, int max_len) {
        std::vector<std::tuple<std::string, std::string, std::string>> out;
        for (auto &r: smidiff::synth_dataset(count, seed, max_len))
          out.emplace_back(r.cid, r.smiles, r.description);
        return out;
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("max_len") = 32,
      "List of (cid, smiles, description).");

  m.def(
      "generate",
      [](const std::string &phase1, const std::optional<std::string> &phase2,
         const std::vector<std::string> &descriptions, int steps1, int steps2,
         int max_rounds, std::uint64_t seed) {
        ModelBundle m1 = load_checkpoint(phase1);
        std::optional<ModelBundle> m2;
        if (phase2)
          m2 = load_checkpoint(*phase2);
        SamplerContext ctx;
        ctx.vocab = &m1.vocab;
        ctx.text_vocab = &m1.text_vocab;
        ctx.schedule = build_schedule(m1.train.total_steps, m1.train.schedule);
        ctx.tau = m2 ? m2->train.tau : m1.train.tau;
        SamplerConfig cfg;
        cfg.steps1 = steps1;
        cfg.steps2 = steps2;
        cfg.renoise = std::min(cfg.renoise, ctx.tau);
        cfg.max_rounds = max_rounds;
        cfg.seed = seed;
        std::vector<GenerationResult> results;
        {
          py::gil_scoped_release release;
          results = generate_batch(m1.model.get(),
                                   m2 ? m2->model.get() : nullptr,
                                   descriptions, ctx, cfg);
        }
        py::list out;
        for (const auto &r: results) {
          py::dict d;
          d["smiles"] = r.smiles;
          d["valid"] = r.valid;
          d["corrected"] = r.corrected;
          d["phase1_smiles"] = r.phase1_smiles;
          out.append(d);
        }
        return out;
      },
      py::arg("phase1"), py::arg("phase2") = py::none(),
      py::arg("descriptions"), py::arg("steps1") = 200, py::arg("steps2") = 20,
      py::arg("max_rounds") = 1, py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string> &args, const std::string &stdin_text) {
        std::vector<std::string> full = { "smidiff" };
        full.insert(full.end(), args.begin(), args.end());
        std::istringstream in(stdin_text);
        std::ostringstream out, err;
        int code = smidiff::run_cli(full, in, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), py::arg("stdin") = "",
      "Runs a CLI subcommand in-process; returns (exit_code, stdout, stderr).");
}
