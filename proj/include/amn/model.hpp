#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "amn/batch.hpp"
#include "amn/gru.hpp"

namespace amn {

// Architecture sizes. One size e serves every embedding and hidden state;
// encoder, memory and decoder stacks share one depth.
struct ModelConfig {
  std::size_t size = 32;
  std::size_t depth = 1;
  std::size_t memories = 1;
  double dropout = 0.0;
  std::size_t vocab_size = 0;
  std::size_t max_sentence_len = 0;
  std::size_t max_question_len = 0;
  std::size_t max_story_len = 0;
  std::size_t max_answer_len = 1;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Additive attention: u_i = v^T tanh(W1 h_i + W2 q), followed by the output
// projection W_proj over [context | state]. Row-vector convention, so the
// products are h W1, q W2, and [d | h] W_proj with W_proj of shape 2e x e.
template <typename T>
struct AttentionParams {
  Tensor<T> w1;
  Tensor<T> w2;
  Tensor<T> v;
  Tensor<T> w_proj;

  AttentionParams() = default;
  explicit AttentionParams(std::size_t e) : w1(e, e), w2(e, e), v(e, 1), w_proj(2 * e, e) {}
};

template <typename T>
struct ModelParams {
  Tensor<T> embedding;  // |V| x e, shared by question, story and answer tokens
  StackSpec<T> encoder;  // question encoder and word-level story encoder (tied)
  StackSpec<T> sentence_fwd;
  StackSpec<T> sentence_bwd;
  StackSpec<T> memory_cell;
  StackSpec<T> decoder;
  AttentionParams<T> memory_attention;
  AttentionParams<T> decoder_attention;
  Tensor<T> output_w;  // e x |V|
  Tensor<T> output_b;  // 1 x |V|

  // All-zero arrays shaped for `config`.
  static ModelParams zeros(const ModelConfig& config) {
    config.validate();
    const std::size_t e = config.size, L = config.depth, V = config.vocab_size;
    ModelParams p;
    p.embedding = Tensor<T>(V, e);
    p.encoder = StackSpec<T>(L, e, e);
    p.sentence_fwd = StackSpec<T>(L, e, e);
    p.sentence_bwd = StackSpec<T>(L, e, e);
    p.memory_cell = StackSpec<T>(L, e, e);
    p.decoder = StackSpec<T>(L, e, e);
    p.memory_attention = AttentionParams<T>(e);
    p.decoder_attention = AttentionParams<T>(e);
    p.output_w = Tensor<T>(e, V);
    p.output_b = Tensor<T>(1, V);
    return p;
  }

  // Glorot-uniform matrices, embedding uniform in [-1, 1], biases zero.
  static ModelParams random(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p = zeros(config);
    Rng rng(seed);
    p.visit([&](const std::string& name, Tensor<T>& t) {
      if (is_bias(name)) return;
      const double a = name == "embedding" ? 1.0 : std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      for (auto& x : t.values()) x = static_cast<T>(-a + 2 * a * uniform01(rng));
    });
    return p;
  }

  static bool is_bias(const std::string& name) {
    return name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
  }

  // Calls f(name, tensor) for every array, in a fixed order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::vector<std::pair<std::string, Tensor<T>*>> named() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    visit([&](const std::string& n, Tensor<T>& t) { out.emplace_back(n, &t); });
    return out;
  }

  std::size_t count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
    return n;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.embedding = embedding.template cast<U>();
    auto stack = [](const StackSpec<T>& s) {
      StackSpec<U> r;
      for (const auto& l : s.layers) {
        GruParams<U> g;
        g.w_x = l.w_x.template cast<U>();
        g.u_zr = l.u_zr.template cast<U>();
        g.u_h = l.u_h.template cast<U>();
        g.b = l.b.template cast<U>();
        r.layers.push_back(std::move(g));
      }
      return r;
    };
    auto att = [](const AttentionParams<T>& a) {
      AttentionParams<U> r;
      r.w1 = a.w1.template cast<U>();
      r.w2 = a.w2.template cast<U>();
      r.v = a.v.template cast<U>();
      r.w_proj = a.w_proj.template cast<U>();
      return r;
    };
    out.encoder = stack(encoder);
    out.sentence_fwd = stack(sentence_fwd);
    out.sentence_bwd = stack(sentence_bwd);
    out.memory_cell = stack(memory_cell);
    out.decoder = stack(decoder);
    out.memory_attention = att(memory_attention);
    out.decoder_attention = att(decoder_attention);
    out.output_w = output_w.template cast<U>();
    out.output_b = output_b.template cast<U>();
    return out;
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f("embedding", self.embedding);
    auto stack = [&](const std::string& prefix, auto& s) {
      for (std::size_t l = 0; l < s.layers.size(); ++l) {
        const std::string p = prefix + "." + std::to_string(l);
        f(p + ".w_x", s.layers[l].w_x);
        f(p + ".u_zr", s.layers[l].u_zr);
        f(p + ".u_h", s.layers[l].u_h);
        f(p + ".b", s.layers[l].b);
      }
    };
    stack("encoder", self.encoder);
    stack("sentence_fwd", self.sentence_fwd);
    stack("sentence_bwd", self.sentence_bwd);
    stack("memory_cell", self.memory_cell);
    stack("decoder", self.decoder);
    auto att = [&](const std::string& p, auto& a) {
      f(p + ".w1", a.w1);
      f(p + ".w2", a.w2);
      f(p + ".v", a.v);
      f(p + ".w_proj", a.w_proj);
    };
    att("memory_attention", self.memory_attention);
    att("decoder_attention", self.decoder_attention);
    f("output.w", self.output_w);
    f("output.b", self.output_b);
  }
};

// Per-example attention trace.
template <typename T>
struct AttentionRecord {
  Tensor<T> memory_attention;   // m x |S|, one row per memory step
  Tensor<T> memory_context;     // m x e
  Tensor<T> decoder_attention;  // steps x m, one row per decode step
  Tensor<T> decoder_context;    // steps x e
};

// Forward-pass multiply-accumulate counts split by component.
struct ComponentMacs {
  std::uint64_t question_encoder = 0;
  std::uint64_t word_encoder = 0;
  std::uint64_t sentence_encoder = 0;
  std::uint64_t memory_module = 0;
  std::uint64_t memory_attention = 0;  // part of memory_module spent in attention
  std::uint64_t decoder = 0;

  std::uint64_t total() const {
    return question_encoder + word_encoder + sentence_encoder + memory_module + decoder;
  }
};

template <typename T>
struct AttendResult {
  Var<T> context;  // B x e
  Var<T> weights;  // B x k
};

template <typename T>
struct CellResult {
  std::vector<Var<T>> states;  // new per-layer states; top is the projected output
  Var<T> output;
  Var<T> context;
  Var<T> weights;
  std::uint64_t attention_macs = 0;
};

template <typename T>
struct DocumentEncoding {
  Var<T> word_states;      // H^wrd, (B*S) x e
  Var<T> sentence_states;  // H^sen, (B*S) x e
  std::vector<Var<T>> finals;  // fused sentence-level finals per layer
  Tensor<T> sentence_mask;     // B x S
  std::uint64_t word_macs = 0;
  std::uint64_t sentence_macs = 0;
};

template <typename T>
struct MemoryResult {
  Var<T> memories;              // M, (B*m) x e, row b*m + i is memory i of example b
  std::vector<Var<T>> finals;   // per-layer memory-cell state after the last step
  std::vector<Var<T>> weights;  // per step, B x S
  std::vector<Var<T>> contexts;
  std::uint64_t attention_macs = 0;
};

enum class DecodeMode { kTeacherForced, kFreeRunning };

template <typename T>
struct DecodeResult {
  std::vector<Var<T>> logits;   // per step, B x |V|
  std::vector<Var<T>> weights;  // per step, B x m
  std::vector<Var<T>> contexts;
  std::vector<std::vector<std::size_t>> tokens;  // free-running output without EOS
};

struct ForwardOptions {
  bool training = false;  // enables dropout
  bool compute_loss = true;
  bool predict = false;  // run a free-running decode as well
  bool record = false;   // fill per-example attention records
  Rng* rng = nullptr;    // dropout stream
};

template <typename T>
struct ForwardResult {
  Var<T> loss;  // mean over examples of the per-example mean token cross entropy
  std::vector<T> example_loss;
  std::vector<std::vector<std::size_t>> predictions;
  std::vector<AttentionRecord<T>> records;
  ComponentMacs macs;
};

// Attentive Memory Network: question encoder, hierarchical story encoder,
// attentive memory cell and an answer decoder attending over the memories.
template <typename T>
class AmnModel {
 public:
  explicit AmnModel(ModelConfig config)
      : config_(config), params_(ModelParams<T>::random(config, config.seed)) {}
  AmnModel(ModelConfig config, ModelParams<T> params)
      : config_(config), params_(std::move(params)) {
    config_.validate();
  }

  const ModelConfig& config() const { return config_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  // query [B x e], states [(B*k) x e], mask [B x k].
  AttendResult<T> attend(Var<T> query, Var<T> states, const Tensor<T>& mask,
                         const AttentionParams<T>& att) const {
    const std::size_t B = query.rows(), k = mask.cols();
    if (k == 0) throw ContractError("attend: nothing to attend over");
    if (mask.rows() != B || states.rows() != B * k) {
      throw ShapeError("attend: states " + states.value().shape_str() + " / mask " +
                       mask.shape_str() + " do not match query " + query.value().shape_str());
    }
    Tape<T>& tape = *query.tape();
    Var<T> keys = matmul(states, tape.param(att.w1));
    Var<T> queries = matmul(repeat_rows(query, k), tape.param(att.w2));
    Var<T> scores = matmul(tanh(add(keys, queries)), tape.param(att.v));
    Var<T> weights = softmax_masked(reshape(scores, B, k), mask);
    return {weights_sum(weights, states), weights};
  }

  // GRU stack step on x, then attention from the top-layer candidate state and
  // projection of [context | candidate] back to e dims. The projection
  // replaces the top-layer state.
  CellResult<T> attentive_cell_step(Var<T> x, const std::vector<Var<T>>& h_prev, Var<T> states,
                                    const Tensor<T>& mask, const StackSpec<T>& cell,
                                    const AttentionParams<T>& att,
                                    const DropoutConfig& dropout = {}) const {
    if (h_prev.size() != cell.depth()) throw ShapeError("attentive_cell_step: state depth mismatch");
    CellResult<T> out;
    out.states.resize(cell.depth());
    Var<T> input = x;
    for (std::size_t l = 0; l < cell.depth(); ++l) {
      out.states[l] = gru_step(input, h_prev[l], cell.layers[l]);
      if (l + 1 < cell.depth()) input = apply_dropout(out.states[l], dropout);
    }
    Var<T> candidate = out.states.back();
    const std::uint64_t before = mac_counter();
    AttendResult<T> a = attend(candidate, states, mask, att);
    Tape<T>& tape = *x.tape();
    out.output = matmul(concat_cols(a.context, candidate), tape.param(att.w_proj));
    out.attention_macs = mac_counter() - before;
    out.states.back() = out.output;
    out.context = a.context;
    out.weights = a.weights;
    return out;
  }

  // Per-layer final states of the question encoder; back() is h_que.
  std::vector<Var<T>> encode_question(Tape<T>& tape, const Batch& batch,
                                      const DropoutConfig& dropout = {}) const {
    if (batch.max_question == 0) throw ContractError("encode_question: empty question");
    const std::size_t B = batch.size, Lq = batch.max_question;
    std::vector<Var<T>> steps;
    std::vector<std::vector<std::uint8_t>> mask;
    Var<T> emb = tape.param(params_.embedding);
    for (std::size_t t = 0; t < Lq; ++t) {
      std::vector<std::size_t> ids(B);
      std::vector<std::uint8_t> live(B);
      for (std::size_t b = 0; b < B; ++b) {
        ids[b] = batch.question[b * Lq + t];
        live[b] = batch.question_mask[b * Lq + t];
      }
      steps.push_back(gather_rows(emb, std::move(ids)));
      mask.push_back(std::move(live));
    }
    return run_sequence(steps, zero_states(tape, B), params_.encoder, mask, dropout).layer_finals;
  }

  // Word-level encoder per sentence (tied with the question encoder, zero
  // initial state) producing H^wrd, then the bidirectional sentence-level
  // encoder over H^wrd with h_que as the bottom-layer initial state.
  DocumentEncoding<T> encode_document(Tape<T>& tape, const Batch& batch, Var<T> h_que,
                                      const DropoutConfig& dropout = {}) const {
    const std::size_t B = batch.size, S = batch.max_sentences, W = batch.max_words;
    if (S == 0 || W == 0) throw ContractError("encode_document: empty document");
    const std::size_t R = B * S;
    const std::uint64_t start = mac_counter();
    Var<T> emb = tape.param(params_.embedding);
    std::vector<Var<T>> word_steps;
    std::vector<std::vector<std::uint8_t>> word_mask;
    for (std::size_t w = 0; w < W; ++w) {
      std::vector<std::size_t> ids(R);
      std::vector<std::uint8_t> live(R);
      for (std::size_t r = 0; r < R; ++r) {
        ids[r] = batch.words[r * W + w];
        live[r] = batch.word_mask[r * W + w];
      }
      word_steps.push_back(gather_rows(emb, std::move(ids)));
      word_mask.push_back(std::move(live));
    }
    auto words = run_sequence(word_steps, zero_states(tape, R), params_.encoder, word_mask, dropout);

    DocumentEncoding<T> out;
    out.word_states = apply_dropout(words.final, dropout);
    out.word_macs = mac_counter() - start;
    out.sentence_mask = Tensor<T>(B, S);
    std::vector<Var<T>> sentence_steps;
    std::vector<std::vector<std::uint8_t>> sentence_mask;
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<std::size_t> rows(B);
      std::vector<std::uint8_t> live(B);
      for (std::size_t b = 0; b < B; ++b) {
        rows[b] = b * S + s;
        live[b] = batch.sentence_mask[b * S + s];
        out.sentence_mask(b, s) = live[b] ? T(1) : T(0);
      }
      sentence_steps.push_back(gather_rows(out.word_states, std::move(rows)));
      sentence_mask.push_back(std::move(live));
    }
    std::vector<Var<T>> init = zero_states(tape, B);
    init.front() = h_que;
    auto sentences = run_bidirectional(sentence_steps, init, init, params_.sentence_fwd,
                                       params_.sentence_bwd, sentence_mask, dropout);
    out.sentence_states = interleave_rows(sentences.states);
    out.finals = sentences.layer_finals;
    out.sentence_macs = mac_counter() - start - out.word_macs;
    return out;
  }

  // m memory steps: m_i = cell(h_que, m_{i-1}) attending over H^sen, with
  // m_0 the fused sentence-level final state.
  MemoryResult<T> memory_module(Var<T> h_que, Var<T> sentence_states,
                                const Tensor<T>& sentence_mask, const std::vector<Var<T>>& init,
                                std::size_t m, const DropoutConfig& dropout = {}) const {
    if (m == 0) throw ConfigError("memory_module: at least one memory step is required");
    MemoryResult<T> out;
    std::vector<Var<T>> h = init;
    std::vector<Var<T>> outputs;
    for (std::size_t i = 0; i < m; ++i) {
      auto cell = attentive_cell_step(h_que, h, sentence_states, sentence_mask, params_.memory_cell,
                                      params_.memory_attention, dropout);
      h = cell.states;
      outputs.push_back(apply_dropout(cell.output, dropout));
      out.weights.push_back(cell.weights);
      out.contexts.push_back(cell.context);
      out.attention_macs += cell.attention_macs;
    }
    out.memories = interleave_rows(outputs);
    out.finals = h;
    return out;
  }

  // Decoder initialised with the final memory state, attending over M at
  // every step. Teacher-forced mode feeds GO then the gold tokens of `batch`;
  // free-running mode feeds back its own argmax until EOS or
  // max_answer_len + 1 steps.
  DecodeResult<T> decode_answer(Tape<T>& tape, const MemoryResult<T>& memory, const Batch* batch,
                                DecodeMode mode, std::size_t max_answer_len,
                                const DropoutConfig& dropout = {}) const {
    if (!memory.memories.valid()) throw ContractError("decode_answer: no memories");
    if (mode == DecodeMode::kTeacherForced && batch == nullptr) {
      throw ContractError("decode_answer: teacher-forced decoding needs targets");
    }
    const std::size_t m = memory.weights.size();
    const std::size_t B = memory.memories.rows() / m;
    const Tensor<T> mask(B, m, T(1));
    const std::size_t steps = mode == DecodeMode::kTeacherForced ? batch->max_answer : max_answer_len + 1;
    const std::size_t V = params_.output_w.cols();

    DecodeResult<T> out;
    out.tokens.resize(B);
    std::vector<std::uint8_t> done(B, 0);
    std::vector<std::size_t> prev(B, token::kGo);
    std::vector<Var<T>> h = memory.finals;
    Var<T> emb = tape.param(params_.embedding);
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<std::size_t> ids(B, token::kGo);
      if (t > 0) {
        for (std::size_t b = 0; b < B; ++b) {
          ids[b] = mode == DecodeMode::kTeacherForced ? batch->answer[b * batch->max_answer + t - 1] : prev[b];
        }
      }
      auto cell = attentive_cell_step(gather_rows(emb, std::move(ids)), h, memory.memories, mask,
                                      params_.decoder, params_.decoder_attention, dropout);
      h = cell.states;
      Var<T> logits = add(matmul(apply_dropout(cell.output, dropout), tape.param(params_.output_w)),
                          tape.param(params_.output_b));
      out.logits.push_back(logits);
      out.weights.push_back(cell.weights);
      out.contexts.push_back(cell.context);
      if (mode == DecodeMode::kFreeRunning) {
        const Tensor<T>& lv = logits.value();
        bool all_done = true;
        for (std::size_t b = 0; b < B; ++b) {
          std::size_t best = 0;
          for (std::size_t c = 1; c < V; ++c)
            if (lv(b, c) > lv(b, best)) best = c;
          prev[b] = best;
          if (!done[b]) {
            if (best == token::kEos) {
              done[b] = 1;
            } else {
              out.tokens[b].push_back(best);
            }
          }
          all_done = all_done && done[b];
        }
        if (all_done) break;
      }
    }
    return out;
  }

  ForwardResult<T> forward(Tape<T>& tape, const Batch& batch, const ForwardOptions& opt) const {
    check_vocabulary(batch);
    const DropoutConfig dropout{config_.dropout, opt.training, opt.rng};
    const std::size_t B = batch.size;
    ForwardResult<T> res;
    std::uint64_t mark = mac_counter();
    auto lap = [&] {
      const std::uint64_t now = mac_counter();
      const std::uint64_t d = now - mark;
      mark = now;
      return d;
    };

    std::vector<Var<T>> question = encode_question(tape, batch, dropout);
    Var<T> h_que = question.back();
    res.macs.question_encoder = lap();
    DocumentEncoding<T> doc = encode_document(tape, batch, h_que, dropout);
    lap();
    res.macs.word_encoder = doc.word_macs;
    res.macs.sentence_encoder = doc.sentence_macs;

    MemoryResult<T> mem = memory_module(h_que, doc.sentence_states, doc.sentence_mask, doc.finals,
                                        config_.memories, dropout);
    res.macs.memory_module = lap();
    res.macs.memory_attention = mem.attention_macs;

    DecodeResult<T> forced;
    if (opt.compute_loss) {
      forced = decode_answer(tape, mem, &batch, DecodeMode::kTeacherForced, config_.max_answer_len, dropout);
      res.macs.decoder = lap();
      const std::size_t Ta = batch.max_answer;
      res.example_loss.assign(B, T(0));
      Var<T> total;
      for (std::size_t t = 0; t < Ta; ++t) {
        std::vector<std::size_t> targets(B);
        std::vector<T> weights(B);
        for (std::size_t b = 0; b < B; ++b) {
          targets[b] = batch.answer[b * Ta + t];
          const bool live = batch.answer_mask[b * Ta + t] != 0;
          const T per_example = live ? T(1) / static_cast<T>(batch.answer_lengths[b]) : T(0);
          weights[b] = per_example / static_cast<T>(B);
          if (live) {
            res.example_loss[b] += per_example * row_nll(forced.logits[t].value(), b, targets[b]);
          }
        }
        Var<T> step = cross_entropy(forced.logits[t], std::move(targets), std::move(weights));
        total = total.valid() ? add(total, step) : step;
      }
      res.loss = total;
    }

    DecodeResult<T> free;
    if (opt.predict) {
      free = decode_answer(tape, mem, nullptr, DecodeMode::kFreeRunning, config_.max_answer_len);
      res.predictions = free.tokens;
    }

    if (opt.record) {
      const DecodeResult<T>& dec = opt.predict ? free : forced;
      const std::size_t e = config_.size;
      for (std::size_t b = 0; b < B; ++b) {
        AttentionRecord<T> rec;
        const std::size_t S = batch.story_lengths[b];
        const std::size_t m = mem.weights.size();
        rec.memory_attention = Tensor<T>(m, S);
        rec.memory_context = Tensor<T>(m, e);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t s = 0; s < S; ++s) rec.memory_attention(i, s) = mem.weights[i].value()(b, s);
          for (std::size_t c = 0; c < e; ++c) rec.memory_context(i, c) = mem.contexts[i].value()(b, c);
        }
        std::size_t steps = dec.weights.size();
        if (opt.predict) {
          steps = std::min(steps, dec.tokens[b].size() + 1);
        } else if (opt.compute_loss) {
          steps = batch.answer_lengths[b];
        }
        rec.decoder_attention = Tensor<T>(steps, m);
        rec.decoder_context = Tensor<T>(steps, e);
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t i = 0; i < m; ++i) rec.decoder_attention(t, i) = dec.weights[t].value()(b, i);
          for (std::size_t c = 0; c < e; ++c) rec.decoder_context(t, c) = dec.contexts[t].value()(b, c);
        }
        res.records.push_back(std::move(rec));
      }
    }
    return res;
  }

 private:
  Var<T> weights_sum(Var<T> weights, Var<T> states) const { return weighted_row_sum(weights, states); }

  std::vector<Var<T>> zero_states(Tape<T>& tape, std::size_t rows) const {
    std::vector<Var<T>> h;
    for (std::size_t l = 0; l < config_.depth; ++l) h.push_back(tape.constant(Tensor<T>(rows, config_.size)));
    return h;
  }

  static T row_nll(const Tensor<T>& logits, std::size_t row, std::size_t target) {
    T mx = logits(row, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(row, c));
    T z = T(0);
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits(row, c) - mx);
    return std::log(z) + mx - logits(row, target);
  }

  void check_vocabulary(const Batch& batch) const {
    const std::size_t V = config_.vocab_size;
    auto check = [V](const std::vector<std::size_t>& ids, const char* what) {
      for (const std::size_t id : ids) {
        if (id >= V) {
          throw DataError(std::string("token id ") + std::to_string(id) + " in " + what +
                          " is outside the model vocabulary of " + std::to_string(V));
        }
      }
    };
    check(batch.question, "question");
    check(batch.words, "story");
    check(batch.answer, "answer");
  }

  ModelConfig config_;
  ModelParams<T> params_;
};

inline void ModelConfig::validate() const {
  if (size == 0) throw ConfigError("model size must be positive");
  if (depth < 1 || depth > 3) throw ConfigError("depth must be 1, 2 or 3");
  if (memories < 1) throw ConfigError("at least one memory step is required");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (vocab_size <= token::kReserved) throw ConfigError("vocabulary must extend past the reserved ids");
}

}  // namespace amn
