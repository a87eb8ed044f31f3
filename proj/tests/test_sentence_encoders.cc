#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "fixtures.h"
#include "twotier/errors.h"
#include "twotier/grad_check.h"
#include "twotier/recurrent.h"
#include "twotier/sentence_encoders.h"

using namespace twotier;
using fixtures::make_post;

namespace {

std::vector<Vector> random_vectors(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<Vector> out(n, Vector(dim));
  for (auto& v : out)
    for (auto& x : v) x = rng.uniform(-1, 1);
  return out;
}

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = rng.uniform(-1, 1);
  return t;
}

// Gradient check of one cell step with respect to the cell weights, the
// input and the incoming state.
double cell_grad_error(CellKind kind, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = 3, hidden = 4;
  ParameterSet ps;
  RecurrentCell cell(kind, "cell", in, hidden, ps, rng);
  // Move the biases away from their initial constants.
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (auto& x : ps.value(i).data()) x += rng.uniform(-0.3, 0.3);
  Tensor x = random_tensor({1, in}, rng), h = random_tensor({1, hidden}, rng), c = random_tensor({1, hidden}, rng);
  Tensor w = random_tensor({1, hidden}, rng);
  std::vector<Tensor*> leaves;
  for (std::size_t i = 0; i < ps.size(); ++i) leaves.push_back(&ps.value(i));
  leaves.push_back(&x);
  leaves.push_back(&h);
  leaves.push_back(&c);
  const std::size_t n = ps.size();
  return grad_check_params(
      [&](Graph& g, std::span<const Var> vars) {
        std::vector<Var> bound(vars.begin(), vars.begin() + static_cast<long>(n));
        CellState state{vars[n + 1], vars[n + 2]};
        CellState next = cell.step(bound, vars[n], state);
        Var out = sum(next.h * g.constant(w));
        if (kind == CellKind::LSTM) out = out + sum(next.c * g.constant(w));
        return out;
      },
      leaves, 1e-5);
}

std::vector<Vector> sentence_vectors(const Sentence& s, const WordVectors& wv) {
  std::vector<Vector> out;
  for (const auto& t : s) out.push_back(wv.lookup(t));
  return out;
}

}  // namespace

TEST_SUITE("sentence-encoders") {
  TEST_CASE("pool examples") {
    Vector v = {0.3, -1.0, 2.0};
    for (auto mode : {PoolingMode::Max, PoolingMode::Min, PoolingMode::Avg}) CHECK(pool({v}, mode) == v);
    CHECK(pool({{1, 0}, {0, 1}}, PoolingMode::Max) == Vector{1, 1});
    CHECK(pool({{1, 0}, {0, 1}}, PoolingMode::Min) == Vector{0, 0});
    CHECK(pool({{1, 0}, {0, 1}}, PoolingMode::Avg) == Vector{0.5, 0.5});
    CHECK_THROWS_AS(pool({}, PoolingMode::Avg), ContractError);
    CHECK_THROWS_AS(pool({{1, 0}, {1}}, PoolingMode::Max), DimensionError);
  }

  TEST_CASE("min, avg and max pooling are ordered per dimension") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
      auto vs = random_vectors(rng, 1 + rng.below(8), 5);
      auto lo = pool(vs, PoolingMode::Min), mid = pool(vs, PoolingMode::Avg), hi = pool(vs, PoolingMode::Max);
      for (std::size_t k = 0; k < 5; ++k) {
        CHECK(lo[k] <= mid[k] + 1e-15);
        CHECK(mid[k] <= hi[k] + 1e-15);
      }
    }
  }

  TEST_CASE("pooling ignores word order") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      auto vs = random_vectors(rng, 2 + rng.below(6), 4);
      auto perm = vs;
      shuffle(perm, rng);
      CHECK(pool(vs, PoolingMode::Max) == pool(perm, PoolingMode::Max));
      CHECK(pool(vs, PoolingMode::Min) == pool(perm, PoolingMode::Min));
      CHECK(pool(vs, PoolingMode::Avg) == pool(perm, PoolingMode::Avg));
    }
  }

  TEST_CASE("attention weight examples") {
    Rng rng(3);
    Vector q = {0.2, -0.4, 1.0};
    CHECK(attention_weights(q, {{1, 2, 3}}) == Vector{1.0});
    auto eq = attention_weights(q, {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
    for (double w : eq) CHECK(w == doctest::Approx(0.25));
    for (int trial = 0; trial < 100; ++trial) {
      auto states = random_vectors(rng, 1 + rng.below(9), 3);
      auto w = attention_weights(random_vectors(rng, 1, 3)[0], states);
      double total = 0.0;
      for (double x : w) {
        CHECK(x >= 0.0);
        total += x;
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
    CHECK_THROWS_AS(attention_weights(q, {}), ContractError);
  }

  TEST_CASE("cell gradients match finite differences") {
    for (auto kind : {CellKind::SimpleRNN, CellKind::GRU, CellKind::LSTM}) {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) CHECK(cell_grad_error(kind, seed) < 1e-4);
    }
  }

  TEST_CASE("attention block gradient matches finite differences") {
    Rng rng(4);
    Tensor query = random_tensor({1, 4}, rng), keys = random_tensor({5, 4}, rng), w = random_tensor({1, 4}, rng);
    std::vector<Tensor*> leaves = {&query, &keys};
    double err = grad_check_params(
        [&](Graph& g, std::span<const Var> v) { return sum(attend(v[0], v[1]).context * g.constant(w)); }, leaves,
        1e-5);
    CHECK(err < 1e-4);
  }

  TEST_CASE("cell kinds parse and print") {
    for (auto kind : {CellKind::SimpleRNN, CellKind::GRU, CellKind::LSTM})
      CHECK(parse_cell_kind(to_string(kind)) == kind);
    CHECK_THROWS(parse_cell_kind("transformer"));
  }

  TEST_CASE("zero-weight simple rnn encodes everything to zero") {
    Seq2SeqConfig c;
    c.cell = CellKind::SimpleRNN;
    Seq2SeqModel model(c, 4);
    for (std::size_t i = 0; i < model.params().size(); ++i) model.params().value(i).fill(0.0);
    Rng rng(5);
    auto out = model.encode(random_vectors(rng, 3, 4));
    CHECK(out == Vector(4, 0.0));
  }

  TEST_CASE("encode is deterministic, sized by hidden_dim, and rejects empty input") {
    for (auto kind : {CellKind::SimpleRNN, CellKind::GRU, CellKind::LSTM}) {
      Seq2SeqConfig c;
      c.cell = kind;
      c.max_len = 5;
      Seq2SeqModel model(c, 6);
      Rng rng(6);
      for (std::size_t len : {1, 3, 5, 9}) {
        auto words = random_vectors(rng, len, 6);
        auto a = model.encode(words);
        CHECK(a.size() == 6);
        CHECK(a == model.encode(words));
      }
      CHECK_THROWS_AS(model.encode({}), ContractError);
      CHECK_THROWS_AS(model.encode({{1.0, 2.0}}), DimensionError);
    }
  }

  TEST_CASE("hidden_dim must match the word dimension") {
    Seq2SeqConfig c;
    c.hidden_dim = 8;
    CHECK_THROWS_AS(Seq2SeqModel(c, 6), ContractError);
    c.hidden_dim = 6;
    CHECK(Seq2SeqModel(c, 6).hidden_dim() == 6);
    c.teacher_forcing = 1.5;
    CHECK_THROWS_AS(c.validate(), ContractError);
  }

  TEST_CASE("sequence error is zero when the predicted sums match") {
    Seq2SeqConfig c;
    Seq2SeqModel model(c, 3);
    // A zero output matrix makes every prediction equal to the bias.
    auto w = *model.params().find("output.W");
    auto b = *model.params().find("output.b");
    model.params().value(w).fill(0.0);
    model.params().value(b) = Tensor({1, 3}, {0.5, -1.0, 2.0});
    Tensor words({4, 3});
    for (std::size_t t = 0; t < 4; ++t) {
      words.at(t, 0) = 0.5;
      words.at(t, 1) = -1.0;
      words.at(t, 2) = 2.0;
    }
    Graph g;
    auto bound = model.params().bind(g);
    auto fwd = model.forward(g, bound, words, {});
    CHECK(g.value(fwd.sequence_loss)[0] == 0.0);
    CHECK(fwd.predictions.size() == 5);
  }

  TEST_CASE("full teacher forcing with zero learning rate leaves parameters alone") {
    auto wv = fixtures::toy_word_vectors(8);
    Seq2SeqConfig c;
    c.teacher_forcing = 1.0;
    c.learning_rate = 0.0;
    c.epochs = 1;
    auto trained = train_autoencoder(fixtures::toy_sentences(), wv, c);
    Seq2SeqModel fresh(c, 8);
    REQUIRE(trained.params().size() == fresh.params().size());
    for (std::size_t i = 0; i < fresh.params().size(); ++i) CHECK(trained.params().value(i) == fresh.params().value(i));
  }

  TEST_CASE("training logs both losses per epoch and is deterministic") {
    auto wv = fixtures::toy_word_vectors(8);
    Seq2SeqConfig c;
    c.epochs = 4;
    c.attention = true;
    auto a = train_autoencoder(fixtures::toy_sentences(), wv, c);
    auto b = train_autoencoder(fixtures::toy_sentences(), wv, c);
    CHECK(a.epoch_token_loss.size() == 4);
    CHECK(a.epoch_sequence_err.size() == 4);
    CHECK(a.epoch_token_loss == b.epoch_token_loss);
    for (std::size_t i = 0; i < a.params().size(); ++i) {
      CHECK(a.params().value(i) == b.params().value(i));
      CHECK(a.params().value(i).all_finite());
    }
    CHECK_THROWS_AS(train_autoencoder({}, wv, c), TrainingError);
  }

  TEST_CASE("long sentences are truncated and counted") {
    auto wv = fixtures::toy_word_vectors(4);
    Seq2SeqConfig c;
    c.epochs = 1;
    c.max_len = 3;
    auto model = train_autoencoder(fixtures::toy_sentences(), wv, c);
    std::size_t longer = 0;
    for (const auto& p : fixtures::toy_sentences()) longer += p.sentences[0].size() > 3;
    CHECK(model.truncated_sentences == longer);
  }

  TEST_CASE("gru autoencoder reconstructs the toy corpus") {
    auto wv = fixtures::toy_word_vectors(32);
    Seq2SeqConfig c;
    c.epochs = 300;
    c.learning_rate = 0.001;
    c.final_lr_factor = 0.3;
    auto model = train_autoencoder(fixtures::toy_sentences(), wv, c);
    std::size_t correct = 0, total = 0;
    for (const auto& p : fixtures::toy_sentences()) {
      const auto& s = p.sentences[0];
      auto out = model.reconstruct(sentence_vectors(s, wv), wv);
      for (std::size_t i = 0; i < s.size(); ++i) {
        ++total;
        correct += i < out.size() && out[i] == s[i];
      }
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.9);
  }

  TEST_CASE("attention lowers the per-token loss at least as fast") {
    auto wv = fixtures::toy_word_vectors(16);
    double plain = 0.0, attended = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Seq2SeqConfig c;
      c.epochs = 300;
      c.seed = seed;
      plain += train_autoencoder(fixtures::toy_sentences(), wv, c).epoch_token_loss.back();
      c.attention = true;
      attended += train_autoencoder(fixtures::toy_sentences(), wv, c).epoch_token_loss.back();
    }
    CHECK(attended / 5 <= plain / 5);
  }

  TEST_CASE("checkpoint round trip keeps encodings bit exact") {
    auto wv = fixtures::toy_word_vectors(6);
    for (auto kind : {CellKind::SimpleRNN, CellKind::GRU, CellKind::LSTM}) {
      Seq2SeqConfig c;
      c.cell = kind;
      c.attention = kind != CellKind::SimpleRNN;
      c.epochs = 2;
      auto model = train_autoencoder(fixtures::toy_sentences(), wv, c);
      auto path = std::filesystem::temp_directory_path() / "twotier_s2s.ckpt";
      write_checkpoint(path, model.to_checkpoint());
      auto back = Seq2SeqModel::from_checkpoint(read_checkpoint(path));
      std::filesystem::remove(path);
      CHECK(back.config().cell == kind);
      CHECK(back.config().attention == c.attention);
      CHECK(back.sos() == model.sos());
      CHECK(back.eos() == model.eos());
      for (const auto& p : fixtures::toy_sentences()) {
        auto words = sentence_vectors(p.sentences[0], wv);
        CHECK(back.encode(words) == model.encode(words));
      }
    }
  }

  TEST_CASE("encode_post examples") {
    auto wv = fixtures::toy_word_vectors(4);
    SentenceEncoder avg(PoolingMode::Avg);
    auto one = encode_post(make_post("p", {{"sun", "moon"}}), avg, wv);
    REQUIRE(one.size() == 1);
    auto expected = pool({wv.lookup("sun"), wv.lookup("moon")}, PoolingMode::Avg);
    CHECK(one[0] == expected);

    auto three = encode_post(make_post("p", {{"sun"}, {"tree", "rock"}, {"fish"}}), avg, wv);
    CHECK(three.size() == 3);

    SentenceEncoder mx(PoolingMode::Max);
    CHECK(encode_post(make_post("p", {{"sun", "moon", "star"}}), mx, wv) ==
          encode_post(make_post("p", {{"star", "sun", "moon"}}), mx, wv));

    // Unknown tokens fall back to the <unk> row.
    auto unk = encode_post(make_post("p", {{"zzz"}}), avg, wv);
    CHECK(unk[0] == wv.lookup("<unk>"));

    Seq2SeqConfig c;
    c.epochs = 1;
    auto model = std::make_shared<const Seq2SeqModel>(train_autoencoder(fixtures::toy_sentences(), wv, c));
    SentenceEncoder s2s(model);
    CHECK_FALSE(s2s.is_pooling());
    auto seq = encode_post(make_post("p", {{"sun"}, {"tree", "rock"}}), s2s, wv);
    REQUIRE(seq.size() == 2);
    CHECK(seq[1] == model->encode({wv.lookup("tree"), wv.lookup("rock")}));
  }
}
