#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "amn/model.hpp"
#include "helpers.hpp"
#include "model_gradcheck.hpp"

using namespace amn;
using amn::test::max_abs_diff;
using amn::test::random_tensor;
using D = Tensor<double>;

namespace {

ModelConfig small_config(std::size_t e = 4, std::size_t depth = 1, std::size_t m = 1, std::size_t V = 12) {
  ModelConfig c;
  c.size = e;
  c.depth = depth;
  c.memories = m;
  c.vocab_size = V;
  c.max_answer_len = 2;
  c.seed = 5;
  return c;
}

std::size_t word(std::mt19937_64& rng, std::size_t V) {
  return token::kReserved + std::uniform_int_distribution<std::size_t>(0, V - token::kReserved - 1)(rng);
}

EncodedExample random_example(std::mt19937_64& rng, std::size_t V, std::size_t sentences, std::size_t answer = 1) {
  EncodedExample ex;
  std::uniform_int_distribution<std::size_t> len(1, 4);
  for (std::size_t s = 0; s < sentences; ++s) {
    ex.story.emplace_back();
    for (std::size_t w = len(rng); w > 0; --w) ex.story.back().push_back(word(rng, V));
  }
  for (std::size_t w = len(rng); w > 0; --w) ex.question.push_back(word(rng, V));
  for (std::size_t w = 0; w < answer; ++w) ex.answer.push_back(word(rng, V));
  return ex;
}

Batch one(const EncodedExample& ex) { return make_batch(std::span<const EncodedExample>(&ex, 1)); }

template <typename T>
std::vector<T> row(const Tensor<T>& t, std::size_t r) {
  std::vector<T> v(t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) v[c] = t(r, c);
  return v;
}

D rows_of(const D& t, std::size_t start, std::size_t n) {
  D out(n, t.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < t.cols(); ++c) out(i, c) = t(start + i, c);
  return out;
}

}  // namespace

TEST_CASE("attend over one state returns that state") {
  AmnModel<double> model(small_config());
  std::mt19937_64 rng(1);
  Tape<double> t(false);
  const D s = random_tensor(1, 4, rng);
  auto res = model.attend(t.constant(random_tensor(1, 4, rng)), t.constant(s), D(1, 1, 1.0),
                          model.params().memory_attention);
  CHECK(res.weights.value()[0] == doctest::Approx(1.0));
  CHECK(max_abs_diff(res.context.value(), s) < 1e-12);
  CHECK_THROWS_AS(model.attend(t.constant(D(1, 4)), t.constant(D(0, 4)), D(1, 0), model.params().memory_attention),
                  ContractError);
}

TEST_CASE("attend with zero parameters averages the states") {
  AmnModel<double> model(small_config());
  AttentionParams<double> zero(4);
  std::mt19937_64 rng(2);
  Tape<double> t(false);
  const D s = random_tensor(3, 4, rng);
  auto res = model.attend(t.constant(random_tensor(1, 4, rng)), t.constant(s), D(1, 3, 1.0), zero);
  for (std::size_t i = 0; i < 3; ++i) CHECK(res.weights.value()(0, i) == doctest::Approx(1.0 / 3));
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(res.context.value()(0, c) == doctest::Approx((s(0, c) + s(1, c) + s(2, c)) / 3));
  }
}

TEST_CASE("attend matches an explicit weighted sum") {
  AmnModel<double> model(small_config(5));
  std::mt19937_64 rng(3);
  const auto& att = model.params().memory_attention;
  Tape<double> t(false);
  const D q = random_tensor(2, 5, rng), s = random_tensor(10, 5, rng);
  D mask(2, 5, 1.0);
  mask(1, 4) = 0.0;
  auto res = model.attend(t.constant(q), t.constant(s), mask, att);
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<double> u(5);
    double mx = -1e300;
    for (std::size_t k = 0; k < 5; ++k) {
      double score = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        double a = 0;
        for (std::size_t i = 0; i < 5; ++i) a += s(b * 5 + k, i) * att.w1(i, j) + q(b, i) * att.w2(i, j);
        score += std::tanh(a) * att.v(j, 0);
      }
      u[k] = score;
      if (mask(b, k) > 0) mx = std::max(mx, score);
    }
    double z = 0;
    for (std::size_t k = 0; k < 5; ++k) z += mask(b, k) > 0 ? std::exp(u[k] - mx) : 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      double d = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        const double a = mask(b, k) > 0 ? std::exp(u[k] - mx) / z : 0.0;
        CHECK(std::abs(res.weights.value()(b, k) - a) < 1e-10);
        d += a * s(b * 5 + k, c);
      }
      CHECK(std::abs(res.context.value()(b, c) - d) < 1e-10);
    }
  }
}

TEST_CASE("projection block selection in the attentive cell") {
  const std::size_t e = 3;
  AmnModel<double> model(small_config(e));
  std::mt19937_64 rng(4);
  const auto& cell = model.params().memory_cell;
  const D x0 = random_tensor(1, e, rng), h0 = random_tensor(1, e, rng), s0 = random_tensor(4, e, rng);
  const D mask(1, 4, 1.0);
  // Tapes dedupe parameters by address, so each projection gets its own tape.
  auto run = [&](const AttentionParams<double>& att) {
    Tape<double> t(false);
    auto x = t.constant(x0), h = t.constant(h0), s = t.constant(s0);
    auto full = model.attentive_cell_step(x, {h}, s, mask, cell, att);
    auto state = gru_step(x, h, cell.layers[0]);
    auto a = model.attend(state, s, mask, att);
    auto manual = matmul(concat_cols(a.context, state), t.param(att.w_proj));
    CHECK(max_abs_diff(full.states.back().value(), full.output.value()) == 0.0);
    CHECK_THROWS_AS(model.attentive_cell_step(x, {h, h}, s, mask, cell, att), ShapeError);
    return std::tuple{full.output.value(), full.context.value(), state.value(), manual.value()};
  };

  AttentionParams<double> att = model.params().memory_attention;
  att.w_proj = D(2 * e, e);
  for (std::size_t i = 0; i < e; ++i) att.w_proj(i, i) = 1.0;
  auto [out1, ctx1, st1, man1] = run(att);
  CHECK(max_abs_diff(out1, ctx1) < 1e-12);

  att.w_proj = D(2 * e, e);
  for (std::size_t i = 0; i < e; ++i) att.w_proj(e + i, i) = 1.0;
  auto [out2, ctx2, st2, man2] = run(att);
  CHECK(max_abs_diff(out2, st2) < 1e-12);

  auto [out3, ctx3, st3, man3] = run(model.params().memory_attention);
  CHECK(max_abs_diff(out3, man3) < 1e-12);
}

TEST_CASE("question encoder: one word and weight tying") {
  AmnModel<double> model(small_config(4, 1, 1, 10));
  Tape<double> t(false);
  EncodedExample ex{{{5, 6, 7}, {8}}, {7}, {9}};
  auto q = model.encode_question(t, one(ex));
  const D emb = rows_of(model.params().embedding, 7, 1);
  const D ref = gru_step(t.constant(emb), t.constant(D(1, 4)), model.params().encoder.layers[0]).value();
  CHECK(max_abs_diff(q.back().value(), ref) < 1e-12);

  // The question equals the first sentence, so it must equal that sentence's word-level vector.
  EncodedExample same{{{5, 6, 7}, {8}}, {5, 6, 7}, {9}};
  auto q2 = model.encode_question(t, one(same));
  auto doc = model.encode_document(t, one(same), q2.back());
  CHECK(max_abs_diff(q2.back().value(), rows_of(doc.word_states.value(), 0, 1)) < 1e-12);

  auto again = model.encode_question(t, one(same));
  CHECK(again.back().value() == q2.back().value());

  EncodedExample empty{{{5}}, {}, {9}};
  CHECK_THROWS_AS(model.encode_question(t, one(empty)), ContractError);
}

TEST_CASE("mutating the shared encoder changes question and story encodings") {
  AmnModel<double> model(small_config(4, 1, 1, 10));
  EncodedExample ex{{{5, 6, 7}}, {5, 6, 7}, {9}};
  auto run = [&] {
    Tape<double> t(false);
    auto q = model.encode_question(t, one(ex));
    auto doc = model.encode_document(t, one(ex), q.back());
    return std::pair{q.back().value(), doc.word_states.value()};
  };
  auto [q0, w0] = run();
  model.params().encoder.layers[0].u_h(0, 0) += 0.5;
  auto [q1, w1] = run();
  CHECK(max_abs_diff(q0, q1) > 1e-6);
  CHECK(max_abs_diff(q1, w1) < 1e-12);
}

TEST_CASE("document encoder composition and encapsulation") {
  AmnModel<double> model(small_config(4, 2, 1, 14));
  std::mt19937_64 rng(6);
  EncodedExample ex{{{5, 6, 7}, {8, 9}, {10, 11, 12, 13}}, {4, 5}, {6}};
  Tape<double> t(false);
  auto q = model.encode_question(t, one(ex));
  auto doc = model.encode_document(t, one(ex), q.back());
  const auto& p = model.params();

  // Manual pipeline: per-sentence run_sequence, then bidirectional over the finals.
  std::vector<Var<double>> sentence_vectors;
  for (const auto& s : ex.story) {
    D emb(s.size(), 4);
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t c = 0; c < 4; ++c) emb(i, c) = p.embedding(s[i], c);
    auto [states, final] = run_sequence(t.constant(emb), t.constant(D(1, 4)), p.encoder,
                                        std::vector<std::uint8_t>(s.size(), 1));
    sentence_vectors.push_back(final);
  }
  auto stacked = interleave_rows(sentence_vectors);
  CHECK(max_abs_diff(doc.word_states.value(), stacked.value()) < 1e-12);
  auto [hsen, hfinal] =
      run_bidirectional(stacked, q.back(), q.back(), p.sentence_fwd, p.sentence_bwd, {1, 1, 1});
  CHECK(max_abs_diff(doc.sentence_states.value(), hsen.value()) < 1e-12);
  CHECK(max_abs_diff(doc.finals.back().value(), hfinal.value()) < 1e-12);

  // Shuffling words inside sentence 1 leaves the other word-level rows alone.
  EncodedExample perm = ex;
  perm.story[1] = {9, 8};
  auto doc2 = model.encode_document(t, one(perm), q.back());
  CHECK(max_abs_diff(rows_of(doc.word_states.value(), 0, 1), rows_of(doc2.word_states.value(), 0, 1)) == 0.0);
  CHECK(max_abs_diff(rows_of(doc.word_states.value(), 2, 1), rows_of(doc2.word_states.value(), 2, 1)) == 0.0);
  CHECK(max_abs_diff(rows_of(doc.word_states.value(), 1, 1), rows_of(doc2.word_states.value(), 1, 1)) > 1e-9);

  EncodedExample single{{{5, 6}}, {4}, {6}};
  auto d1 = model.encode_document(t, one(single), q.back());
  CHECK(d1.sentence_states.rows() == 1);
}

TEST_CASE("memory module: single sentence, row sums and step composition") {
  AmnModel<double> model(small_config(4, 1, 2, 12));
  std::mt19937_64 rng(7);
  Tape<double> t(false);
  EncodedExample ex = random_example(rng, 12, 1);
  auto q = model.encode_question(t, one(ex));
  auto doc = model.encode_document(t, one(ex), q.back());
  auto mem1 = model.memory_module(q.back(), doc.sentence_states, doc.sentence_mask, doc.finals, 1);
  CHECK(mem1.weights[0].value()[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(model.memory_module(q.back(), doc.sentence_states, doc.sentence_mask, doc.finals, 0), ConfigError);

  EncodedExample ex5 = random_example(rng, 12, 5);
  auto q5 = model.encode_question(t, one(ex5));
  auto doc5 = model.encode_document(t, one(ex5), q5.back());
  auto mem = model.memory_module(q5.back(), doc5.sentence_states, doc5.sentence_mask, doc5.finals, 2);
  for (const auto& w : mem.weights) {
    double s = 0;
    for (double a : w.value().values()) {
      CHECK(a >= 0.0);
      s += a;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  const auto& p = model.params();
  auto step1 = model.attentive_cell_step(q5.back(), doc5.finals, doc5.sentence_states, doc5.sentence_mask,
                                         p.memory_cell, p.memory_attention);
  auto step2 = model.attentive_cell_step(q5.back(), step1.states, doc5.sentence_states, doc5.sentence_mask,
                                         p.memory_cell, p.memory_attention);
  CHECK(max_abs_diff(rows_of(mem.memories.value(), 0, 1), step1.output.value()) < 1e-12);
  CHECK(max_abs_diff(rows_of(mem.memories.value(), 1, 1), step2.output.value()) < 1e-12);
  CHECK(max_abs_diff(mem.finals.back().value(), step2.output.value()) < 1e-12);
}

TEST_CASE("decoder: length contract, single-memory weights and greedy decoding") {
  AmnModel<double> model(small_config(4, 1, 1, 12));
  std::mt19937_64 rng(8);
  Tape<double> t(false);
  EncodedExample ex = random_example(rng, 12, 3, 1);
  const Batch batch = one(ex);
  auto q = model.encode_question(t, batch);
  auto doc = model.encode_document(t, batch, q.back());
  auto mem = model.memory_module(q.back(), doc.sentence_states, doc.sentence_mask, doc.finals, 1);
  auto forced = model.decode_answer(t, mem, &batch, DecodeMode::kTeacherForced, 2);
  CHECK(forced.logits.size() == 2);
  for (const auto& w : forced.weights) CHECK(w.value()[0] == doctest::Approx(1.0));
  CHECK_THROWS_AS(model.decode_answer(t, mem, nullptr, DecodeMode::kTeacherForced, 2), ContractError);

  // Greedy decode, re-done step by step from the memory state.
  auto free = model.decode_answer(t, mem, nullptr, DecodeMode::kFreeRunning, 3);
  const auto& p = model.params();
  std::vector<Var<double>> h = mem.finals;
  std::size_t prev = token::kGo;
  std::vector<std::size_t> manual;
  for (std::size_t step = 0; step < 4; ++step) {
    auto cell = model.attentive_cell_step(gather_rows(t.param(p.embedding), {prev}), h, mem.memories,
                                          D(1, 1, 1.0), p.decoder, p.decoder_attention);
    h = cell.states;
    const D logits = add(matmul(cell.output, t.param(p.output_w)), t.param(p.output_b)).value();
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(0, c) > logits(0, best)) best = c;
    if (best == token::kEos) break;
    manual.push_back(best);
    prev = best;
  }
  CHECK(free.tokens[0] == manual);
}

TEST_CASE("initialisation chain: decoder starts from the last memory state") {
  AmnModel<double> model(small_config(4, 2, 2, 12));
  std::mt19937_64 rng(9);
  Tape<double> t(false);
  EncodedExample ex = random_example(rng, 12, 4, 2);
  const Batch batch = one(ex);
  auto q = model.encode_question(t, batch);
  auto doc = model.encode_document(t, batch, q.back());
  auto mem = model.memory_module(q.back(), doc.sentence_states, doc.sentence_mask, doc.finals, 2);
  auto forced = model.decode_answer(t, mem, &batch, DecodeMode::kTeacherForced, 2);
  const auto& p = model.params();
  auto first = model.attentive_cell_step(gather_rows(t.param(p.embedding), {token::kGo}), mem.finals, mem.memories,
                                         D(1, 2, 1.0), p.decoder, p.decoder_attention);
  const D logits = add(matmul(first.output, t.param(p.output_w)), t.param(p.output_b)).value();
  CHECK(max_abs_diff(forced.logits[0].value(), logits) < 1e-12);
}

TEST_CASE("loss is nonnegative and near ln|V| before training") {
  std::mt19937_64 rng(10);
  ModelConfig c = small_config(32, 1, 1, 20);
  AmnModel<double> model(c);
  std::vector<EncodedExample> exs;
  for (int i = 0; i < 50; ++i) exs.push_back(random_example(rng, 20, 5));
  const Batch batch = make_batch(exs);
  Tape<double> t(false);
  auto res = model.forward(t, batch, ForwardOptions{});
  CHECK(res.loss.value()[0] >= 0.0);
  CHECK(std::abs(res.loss.value()[0] - std::log(20.0)) < 0.5);
  double mean = 0;
  for (double l : res.example_loss) {
    CHECK(l >= 0.0);
    mean += l / 50;
  }
  CHECK(std::abs(mean - res.loss.value()[0]) < 1e-9);
}

TEST_CASE("out-of-vocabulary ids are a data error") {
  AmnModel<double> model(small_config(4, 1, 1, 10));
  EncodedExample ex{{{5, 6}}, {12}, {5}};
  Tape<double> t(false);
  CHECK_THROWS_AS(model.forward(t, one(ex), ForwardOptions{}), DataError);
}

TEST_CASE("full-model gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (std::size_t depth : {1, 2}) {
    ModelConfig c = small_config(3, depth, 1, 9);
    AmnModel<double> model(c);
    std::vector<EncodedExample> exs{random_example(rng, 9, 2, 1), random_example(rng, 9, 2, 2)};
    CHECK(test::model_grad_check(model, make_batch(exs)) < 1e-4);
  }
}

TEST_CASE("forward is bit-deterministic and attention rows are distributions") {
  std::mt19937_64 rng(12);
  ModelConfig c = small_config(6, 2, 3, 15);
  std::vector<EncodedExample> exs;
  for (int i = 0; i < 4; ++i) exs.push_back(random_example(rng, 15, 2 + i, 1 + i % 2));
  const Batch batch = make_batch(exs);
  AmnModel<double> a(c), b(c);
  ForwardOptions opt;
  opt.predict = true;
  opt.record = true;
  Tape<double> ta(false), tb(false);
  auto ra = a.forward(ta, batch, opt);
  auto rb = b.forward(tb, batch, opt);
  CHECK(ra.loss.value() == rb.loss.value());
  CHECK(ra.predictions == rb.predictions);
  for (const auto& rec : ra.records) {
    for (const D* w : {&rec.memory_attention, &rec.decoder_attention}) {
      for (std::size_t r = 0; r < w->rows(); ++r) {
        double s = 0;
        for (std::size_t k = 0; k < w->cols(); ++k) {
          CHECK((*w)(r, k) >= 0.0);
          s += (*w)(r, k);
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("parameter count matches the closed form") {
  ModelConfig c = small_config(32, 1, 1, 40);
  ModelParams<float> p = ModelParams<float>::zeros(c);
  const std::size_t e = 32, V = 40;
  CHECK(p.count() == V * e + 5 * (6 * e * e + 3 * e) + 2 * (4 * e * e + e) + e * V + V);
}

TEST_CASE("tied parameters appear once on the tape") {
  ModelConfig c = small_config(4, 1, 1, 10);
  AmnModel<double> model(c);
  EncodedExample ex{{{5, 6}, {7}}, {5, 8}, {9}};
  Tape<double> t;
  auto res = model.forward(t, one(ex), ForwardOptions{});
  t.backward(res.loss);
  const D* g = t.param_grad(model.params().encoder.layers[0].w_x);
  REQUIRE(g != nullptr);
  double norm = 0;
  for (double x : g->values()) norm += x * x;
  CHECK(norm > 0.0);
}

TEST_CASE("initialisation is seeded and biases start at zero") {
  ModelConfig c = small_config(8, 2, 1, 20);
  const auto a = ModelParams<double>::random(c, 3), b = ModelParams<double>::random(c, 3),
             other = ModelParams<double>::random(c, 4);
  CHECK(a.embedding == b.embedding);
  CHECK(!(a.embedding == other.embedding));
  const_cast<ModelParams<double>&>(a).visit([&](const std::string& name, D& t) {
    for (double x : t.values()) {
      if (ModelParams<double>::is_bias(name)) {
        CHECK(x == 0.0);
      } else {
        const double bound = name == "embedding" ? 1.0 : std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
        CHECK(std::abs(x) <= bound);
      }
    }
  });
}

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  c.depth = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.memories = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.vocab_size = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
