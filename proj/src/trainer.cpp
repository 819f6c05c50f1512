//
// SPDX-License-Identifier: Apache-2.0
//

#include "smidiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "smidiff/errors.hpp"

namespace smidiff {

std::string_view to_string(TrainPhase phase) {
  return phase == TrainPhase::kOne ? "one" : "two";
}

TrainPhase train_phase_from_string(std::string_view name) {
  if (name == "one" || name == "1")
    return TrainPhase::kOne;
  if (name == "two" || name == "2")
    return TrainPhase::kTwo;
  throw InvalidArgument("unknown phase '" + std::string(name)
                        + "', expected one or two");
}

void TrainConfig::check() const {
  if (total_steps < 2)
    throw InvalidArgument("T must be at least 2");
  if (tau <= 0 || tau >= total_steps)
    throw InvalidArgument("tau must satisfy 0 < tau < T");
  if (!(adam.lr > 0.0))
    throw InvalidArgument("learning rate must be positive");
  if (batch_size < 1)
    throw InvalidArgument("batch size must be positive");
  if (max_steps < 0)
    throw InvalidArgument("max_steps must be non-negative");
  if (!(sigma0 >= 0.0))
    throw InvalidArgument("sigma0 must be non-negative");
  if (corruption.apply_probability < 0.0 || corruption.apply_probability > 1.0)
    throw InvalidArgument("corruption probability must lie in [0, 1]");
  if (corruption.max_edits < 1)
    throw InvalidArgument("max_edits must be positive");
  if (log_every < 1)
    throw InvalidArgument("log_every must be positive");
}

std::vector<TrainExample> prepare_examples(
    std::span<const DatasetRecord> records, const Vocabulary &vocab,
    const TextVocabulary &text_vocab, int n, int max_text_len) {
  std::vector<TrainExample> out;
  out.reserve(records.size());
  for (const auto &r: records) {
    try {
      TrainExample ex{ tokenize(r.smiles, vocab, n),
                       text_vocab.encode(r.description, max_text_len) };
      out.push_back(std::move(ex));
    } catch (const Error &e) {
      throw DataError("record " + r.cid + ": " + e.what());
    }
  }
  return out;
}

namespace {

// Per-example draws, made in the same order for both objectives so that the
// corruption stream never shifts the noise stream.
struct ExampleDraw {
  int t;
  Rng noise;
  Rng corrupt;
};

// Emb(seq) + sigma0 * eps, with eps supplied so that a clean and a
// corrupted copy of the same example share their perturbation.
template <class S>
void embed_rows(const Tensor<S> &table, const TokenSequence &seq,
                double sigma0, const std::vector<double> &eps, S *out) {
  const auto d = table.dim(1);
  auto data = table.data();
  for (int i = 0; i < seq.length(); ++i) {
    const S *row = data.data() + static_cast<std::int64_t>(seq.ids()[i]) * d;
    for (std::int64_t k = 0; k < d; ++k)
      out[i * d + k] = row[k] + static_cast<S>(sigma0 * eps[i * d + k]);
  }
}

template <class S>
void diffuse(S *x, std::size_t count, double alpha_bar, Rng &rng) {
  const double a = std::sqrt(alpha_bar), b = std::sqrt(1.0 - alpha_bar);
  for (std::size_t k = 0; k < count; ++k)
    x[k] = static_cast<S>(a * x[k] + b * rng.normal());
}

}  // namespace

template <class S>
LossTerms<S> compute_loss(const Denoiser<S> &model,
                          std::span<const TrainExample> batch,
                          const NoiseSchedule &sched, const TrainConfig &cfg,
                          TrainPhase phase, const Vocabulary &vocab, Rng &rng,
                          std::span<const int> forced_t) {
  if (batch.empty())
    throw InvalidArgument("loss over an empty batch");
  if (!forced_t.empty() && forced_t.size() != batch.size())
    throw SizeMismatch("forced timesteps must match the batch size");
  if (sched.steps() != cfg.total_steps)
    throw InvalidArgument("schedule length differs from T");

  const auto &mc = model.config();
  const std::int64_t n = mc.n, d = mc.d;
  const std::size_t row = static_cast<std::size_t>(n * d);
  const auto bsz = static_cast<std::int64_t>(batch.size());
  const Tensor<S> &table = model.embedding_table();

  std::vector<ExampleDraw> draws;
  draws.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].sequence.length() != n)
      throw ShapeMismatch("sequence length "
                          + std::to_string(batch[i].sequence.length())
                          + " differs from model n " + std::to_string(n));
    int t = forced_t.empty()
                ? static_cast<int>(rng.uniform_int(0, cfg.total_steps))
                : forced_t[i];
    if (t < 0 || t > cfg.total_steps)
      throw StepOutOfRange("timestep " + std::to_string(t));
    Rng noise(rng.next_u64());
    Rng corrupt_rng(rng.next_u64());
    draws.push_back({ t, std::move(noise), std::move(corrupt_rng) });
  }

  LossTerms<S> out;
  out.per_example.assign(batch.size(), 0.0);
  for (const auto &dr: draws) {
    out.timesteps.push_back(dr.t);
    if (dr.t == 0)
      out.branches.push_back(LossBranch::kRounding);
    else if (phase == TrainPhase::kTwo && dr.t < cfg.tau)
      out.branches.push_back(LossBranch::kCorrected);
    else
      out.branches.push_back(LossBranch::kDenoise);
  }

  std::vector<Tensor<S>> parts;
  auto group = [&](LossBranch branch) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < batch.size(); ++i)
      if (out.branches[i] == branch)
        idx.push_back(i);
    return idx;
  };

  // Rounding: x0 = Emb(M) + sigma0 eps, gradient reaches Emb through both
  // the sample and the distance logits.
  if (auto idx = group(LossBranch::kRounding); !idx.empty()) {
    const auto g = static_cast<std::int64_t>(idx.size());
    std::vector<std::int32_t> ids;
    std::vector<S> noise(g * row);
    for (std::int64_t j = 0; j < g; ++j) {
      const auto &ex = batch[idx[j]];
      ids.insert(ids.end(), ex.sequence.ids().begin(), ex.sequence.ids().end());
      for (std::size_t k = 0; k < row; ++k)
        noise[j * row + k] =
            static_cast<S>(cfg.sigma0 * draws[idx[j]].noise.normal());
    }
    Tensor<S> x0 = add(embedding(table, ids, { g, n }),
                       Tensor<S>::from_data({ g, n, d }, std::move(noise)));
    Tensor<S> logits = neg_sq_distance(x0, table);
    // Per-example values for logging, from the same logits.
    auto ld = logits.data();
    const std::int64_t v = table.dim(0);
    for (std::int64_t j = 0; j < g; ++j) {
      double nll = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const S *r = ld.data() + (j * n + i) * v;
        double mx = *std::max_element(r, r + v), z = 0.0;
        for (std::int64_t c = 0; c < v; ++c)
          z += std::exp(r[c] - mx);
        nll += mx + std::log(z) - r[ids[j * n + i]];
      }
      out.per_example[idx[j]] = nll;
    }
    parts.push_back(cross_entropy(logits, ids, Reduction::kSum));
  }

  // Denoising branches. The regression target is a constant copy of x0:
  // Emb learns only through the rounding term, so the MSE cannot shrink the
  // embedding space to reach a trivial optimum.
  for (LossBranch branch: { LossBranch::kDenoise, LossBranch::kCorrected }) {
    auto idx = group(branch);
    if (idx.empty())
      continue;
    const auto g = static_cast<std::int64_t>(idx.size());
    std::vector<S> target(g * row), input(g * row);
    std::vector<int> steps;
    std::vector<std::vector<std::int32_t>> words;
    for (std::int64_t j = 0; j < g; ++j) {
      auto &dr = draws[idx[j]];
      const auto &ex = batch[idx[j]];
      S *tgt = target.data() + j * row;
      S *in = input.data() + j * row;
      std::vector<double> eps(row);
      for (auto &e: eps)
        e = dr.noise.normal();
      embed_rows(table, ex.sequence, cfg.sigma0, eps, tgt);
      if (branch == LossBranch::kCorrected) {
        TokenSequence noisy =
            corrupt(ex.sequence, vocab, cfg.corruption, dr.corrupt);
        embed_rows(table, noisy, cfg.sigma0, eps, in);
      } else {
        std::copy(tgt, tgt + row, in);
      }
      diffuse(in, row, sched.alpha_bar[dr.t], dr.noise);
      steps.push_back(dr.t);
      words.push_back(ex.words);
    }
    Tensor<S> xt = Tensor<S>::from_data({ g, n, d }, std::move(input));
    Tensor<S> x0 = Tensor<S>::from_data({ g, n, d }, std::move(target));
    Tensor<S> pred;
    if (branch == LossBranch::kDenoise) {
      TextBatch<S> text = model.encode_text(words);
      pred = model.predict(xt, steps, &text);
    } else {
      pred = model.predict(xt, steps, nullptr);
    }
    auto pd = pred.data(), td = x0.data();
    for (std::int64_t j = 0; j < g; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < row; ++k) {
        double diff = static_cast<double>(pd[j * row + k]) - td[j * row + k];
        acc += diff * diff;
      }
      out.per_example[idx[j]] = acc;
    }
    parts.push_back(mse_loss(pred, x0, Reduction::kSum));
  }

  Tensor<S> total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i)
    total = add(total, parts[i]);
  out.loss = scale(total, static_cast<S>(1.0 / static_cast<double>(bsz)));
  return out;
}

template LossTerms<float> compute_loss(const Denoiser<float> &,
                                       std::span<const TrainExample>,
                                       const NoiseSchedule &,
                                       const TrainConfig &, TrainPhase,
                                       const Vocabulary &, Rng &,
                                       std::span<const int>);
template LossTerms<double> compute_loss(const Denoiser<double> &,
                                        std::span<const TrainExample>,
                                        const NoiseSchedule &,
                                        const TrainConfig &, TrainPhase,
                                        const Vocabulary &, Rng &,
                                        std::span<const int>);

// ---------------------------------------------------------------------------

namespace {

double mean_of(const std::vector<TrainStepLog> &rows, std::size_t begin,
               std::size_t end, bool corrected) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = begin; i < end; ++i) {
    if (corrected) {
      if (rows[i].corrected_count == 0)
        continue;
      acc += rows[i].corrected;
    } else {
      acc += rows[i].loss;
    }
    ++count;
  }
  return count ? acc / static_cast<double>(count) : std::nan("");
}

// Index range over the first/last `window` steps that carry the value.
std::pair<std::size_t, std::size_t> span_with(
    const std::vector<TrainStepLog> &rows, std::size_t window, bool corrected,
    bool from_end) {
  std::size_t seen = 0;
  if (!from_end) {
    std::size_t i = 0;
    for (; i < rows.size() && seen < window; ++i)
      seen += corrected ? rows[i].corrected_count > 0 : 1;
    return { 0, i };
  }
  std::size_t i = rows.size();
  for (; i > 0 && seen < window; --i)
    seen += corrected ? rows[i - 1].corrected_count > 0 : 1;
  return { i, rows.size() };
}

}  // namespace

double TrainReport::head_loss(std::size_t window) const {
  auto [b, e] = span_with(steps, window, false, false);
  return mean_of(steps, b, e, false);
}

double TrainReport::tail_loss(std::size_t window) const {
  auto [b, e] = span_with(steps, window, false, true);
  return mean_of(steps, b, e, false);
}

double TrainReport::head_corrected(std::size_t window) const {
  auto [b, e] = span_with(steps, window, true, false);
  return mean_of(steps, b, e, true);
}

double TrainReport::tail_corrected(std::size_t window) const {
  auto [b, e] = span_with(steps, window, true, true);
  return mean_of(steps, b, e, true);
}

void write_metrics_header(std::ostream &os) {
  os << "step,loss,branch_mse,branch_nll,lr\n";
}

void write_metrics_row(std::ostream &os, const TrainStepLog &row) {
  // branch_mse pools both MSE branches; absent branches leave the field
  // empty.
  const int mse_count = row.denoise_count + row.corrected_count;
  os << row.step << ',' << row.loss << ',';
  if (mse_count > 0)
    os << (row.denoise * row.denoise_count
           + row.corrected * row.corrected_count)
              / mse_count;
  os << ',';
  if (row.rounding_count > 0)
    os << row.rounding;
  os << ',' << row.lr << '\n';
}

TrainReport train_loop(Denoiser<float> &model,
                       std::span<const TrainExample> data,
                       const Vocabulary &vocab, const TrainConfig &cfg,
                       std::ostream *metrics,
                       const CheckpointHook &checkpoint) {
  cfg.check();
  if (data.empty())
    throw DataError("training set is empty");
  if (model.config().max_timestep < cfg.total_steps)
    throw InvalidArgument("model step embedding covers fewer than T steps");
  const TrainPhase phase = cfg.joint ? TrainPhase::kTwo : cfg.phase;
  const NoiseSchedule sched = build_schedule(cfg.total_steps, cfg.schedule);

  std::vector<Tensor<float>> trainable;
  for (auto &p: model.parameters()) {
    bool frozen = model.config().freeze_text_encoder
                  && (p.name == "text.word_emb" || p.name == "text.pos_emb");
    if (!frozen)
      trainable.push_back(p.tensor);
  }
  AdamState<float> opt = make_adam_state<float>(trainable, cfg.adam);

  Rng rng(cfg.seed);
  Rng order_rng = rng.fork(1);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  TrainReport report;
  report.steps.reserve(cfg.max_steps);
  if (metrics)
    write_metrics_header(*metrics);

  std::vector<TrainExample> batch;
  for (std::int64_t step = 1; step <= cfg.max_steps; ++step) {
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1],
                    order[order_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
        cursor = 0;
      }
      batch.push_back(data[order[cursor++]]);
    }

    for (auto &p: model.parameters())
      p.tensor.zero_grad();
    LossTerms<float> terms =
        compute_loss<float>(model, batch, sched, cfg, phase, vocab, rng);
    terms.loss.backward();
    adam_step<float>(trainable, opt);

    TrainStepLog row;
    row.step = step;
    row.loss = terms.loss.item();
    row.lr = warmup_lr(cfg.adam, step);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double v = terms.per_example[i];
      switch (terms.branches[i]) {
        case LossBranch::kRounding:
          row.rounding += v;
          ++row.rounding_count;
          break;
        case LossBranch::kDenoise:
          row.denoise += v;
          ++row.denoise_count;
          break;
        case LossBranch::kCorrected:
          row.corrected += v;
          ++row.corrected_count;
          break;
      }
    }
    if (row.rounding_count)
      row.rounding /= row.rounding_count;
    if (row.denoise_count)
      row.denoise /= row.denoise_count;
    if (row.corrected_count)
      row.corrected /= row.corrected_count;
    if (!std::isfinite(row.loss))
      throw DataError("non-finite loss at step " + std::to_string(step));
    report.steps.push_back(row);

    if (metrics && (step % cfg.log_every == 0 || step == cfg.max_steps))
      write_metrics_row(*metrics, row);
    if (checkpoint && cfg.checkpoint_every > 0
        && step % cfg.checkpoint_every == 0 && step != cfg.max_steps)
      checkpoint(step);
  }
  if (checkpoint)
    checkpoint(cfg.max_steps);
  return report;
}

}  // namespace smidiff
