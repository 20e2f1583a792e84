#include <doctest.h>

#include <cmath>

#include "grade/bert_encoder.hpp"
#include "grade/tensor_archive.hpp"
#include "grade/utterance_encoder.hpp"
#include "grade/vocabulary.hpp"
#include "support/fixtures.hpp"

using namespace grade;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Vocabulary small_vocab() { return Vocabulary({"hello", "there", "how", "are", "you", "fine"}, SpecialTokens::toy()); }

BertConfig tiny_bert(int vocab_size, int layers = 1) {
  BertConfig c;
  c.vocab_size = vocab_size;
  c.hidden = 8;
  c.layers = layers;
  c.heads = 2;
  c.intermediate = 12;
  c.max_position = 32;
  return c;
}

}  // namespace

TEST_SUITE("utterance_encoder") {

TEST_CASE("encoder profile names") {
  CHECK(parse_encoder_profile("toy") == EncoderProfile::Toy);
  CHECK(parse_encoder_profile("pretrained") == EncoderProfile::Pretrained);
  CHECK(to_string(EncoderProfile::Pretrained) == "pretrained");
  CHECK_THROWS_AS(parse_encoder_profile("bert-large"), std::invalid_argument);
}

TEST_CASE("vocabulary") {
  std::vector<std::string> corpus{"b a b", "c b a"};
  auto v = Vocabulary::build(corpus);
  SUBCASE("specials first, then by frequency") {
    CHECK(v.token(0) == "[PAD]");
    CHECK(v.token(1) == "[UNK]");
    CHECK(v.id("b") < v.id("a"));
    CHECK(v.id("a") < v.id("c"));
    CHECK(v.size() == 8);
  }
  SUBCASE("unknown tokens map to unk") {
    CHECK(v.id("zzz") == v.unk());
    CHECK_FALSE(v.contains("zzz"));
  }
  SUBCASE("save and load round trip") {
    fixtures::TempDir dir("vocab");
    v.save(dir / "v.txt");
    auto back = Vocabulary::load(dir / "v.txt");
    CHECK(back.size() == v.size());
    for (int i = 0; i < v.size(); ++i) CHECK(back.token(i) == v.token(i));
  }
  SUBCASE("max size") { CHECK(Vocabulary::build(corpus, SpecialTokens::toy(), 6).size() == 6); }
  SUBCASE("loading appends missing specials") {
    fixtures::TempDir dir("vocab2");
    fixtures::write_text(dir / "v.txt", "alpha\nbeta\n");
    auto loaded = Vocabulary::load(dir / "v.txt");
    CHECK(loaded.id("alpha") == 0);
    CHECK(loaded.contains("[UNK]"));
    CHECK(loaded.contains("[EOS]"));
  }
  SUBCASE("duplicates are rejected") { CHECK_THROWS_AS(Vocabulary({"x", "x"}, SpecialTokens::toy()), std::invalid_argument); }
}

TEST_CASE("wordpiece splits greedily") {
  Vocabulary v({"un", "##aff", "##able", "aff", "##a"}, SpecialTokens::bert());
  CHECK(v.wordpiece("unaffable") == std::vector<int>{v.id("un"), v.id("##aff"), v.id("##able")});
  CHECK(v.wordpiece("affa") == std::vector<int>{v.id("aff"), v.id("##a")});
  CHECK(v.wordpiece("xyz") == std::vector<int>{v.unk()});
}

TEST_CASE("serialize lays out bos u1 sep u2 sep r eos") {
  auto v = small_vocab();
  EncoderInput in{{"hello there", "how are you"}, "fine"};
  auto seq = serialize(in, v, 64);
  std::vector<int> expected{v.bos(),    v.id("hello"), v.id("there"), v.sep(),  v.id("how"),
                            v.id("are"), v.id("you"),   v.sep(),       v.id("fine"), v.eos()};
  CHECK(seq.ids == expected);
  CHECK(seq.segments == std::vector<int>{0, 0, 0, 0, 0, 0, 0, 0, 1, 1});
}

TEST_CASE("truncation trims the response tail, then the oldest context") {
  auto v = small_vocab();
  EncoderInput in{{"hello there hello", "how are you"}, "fine fine fine you"};
  SUBCASE("response first") {
    auto seq = serialize(in, v, 12);
    CHECK(seq.size() == 12);
    CHECK(seq.ids[seq.size() - 2] == v.id("fine"));
    CHECK(seq.ids[1] == v.id("hello"));
  }
  SUBCASE("then the first utterance from the front") {
    auto seq = serialize(in, v, 8);
    CHECK(seq.size() == 8);
    // response keeps one token, u1 keeps its last token, u2 loses its first
    CHECK(seq.ids == std::vector<int>{v.bos(), v.id("hello"), v.sep(), v.id("are"), v.id("you"), v.sep(),
                                      v.id("fine"), v.eos()});
  }
  SUBCASE("every segment keeps one token") {
    auto seq = serialize(in, v, 7);
    CHECK(seq.ids == std::vector<int>{v.bos(), v.id("hello"), v.sep(), v.id("you"), v.sep(), v.id("fine"), v.eos()});
  }
  SUBCASE("too small") { CHECK_THROWS_AS(serialize(in, v, 6), std::invalid_argument); }
}

TEST_CASE("empty utterances are rejected") {
  CHECK_THROWS_AS(EncoderInput({{"", "b"}, "c"}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(EncoderInput({{"a", "b"}, "  "}).validate(), std::invalid_argument);
  CHECK_NOTHROW(EncoderInput({{"a", "b"}, "c"}).validate());
}

TEST_CASE("toy encoder") {
  auto v = small_vocab();
  EncoderInput in{{"hello there", "how are you"}, "fine"};
  auto seq = serialize(in, v, 64);
  std::mt19937_64 rng(1);
  auto p = ToyEncoderParams<double>::random(v.size(), 4, 3, rng);

  SUBCASE("deterministic") { CHECK(encode_toy(p, seq) == encode_toy(p, seq)); }
  SUBCASE("zero embedding table yields the projection bias") {
    p.token_embedding.setZero();
    p.projection_bias << 0.1, -0.2, 0.3;
    CHECK(encode_toy(p, seq) == p.projection_bias);
  }
  SUBCASE("hand-set three token vocabulary") {
    Vocabulary three({"x", "y", "z"}, SpecialTokens::toy());
    ToyEncoderParams<double> q;
    q.token_embedding = MatrixXd::Zero(three.size(), 2);
    q.token_embedding.row(three.id("x")) << 1, 2;
    q.token_embedding.row(three.id("y")) << 3, -1;
    q.token_embedding.row(three.id("z")) << 0, 4;
    q.projection.resize(2, 2);
    q.projection << 1, 1, 2, -1;
    q.projection_bias = Eigen::Vector2d(0.5, -0.5);
    TokenSequence tokens{{three.id("x"), three.id("y"), three.id("z"), three.id("x")}, {0, 0, 1, 1}};
    // mean = ((1+3+0+1)/4, (2-1+4+2)/4) = (1.25, 1.75)
    auto out = encode_toy(q, tokens);
    CHECK(out(0) == doctest::Approx(1.25 + 1.75 + 0.5));
    CHECK(out(1) == doctest::Approx(2.5 - 1.75 - 0.5));
  }
  SUBCASE("out of range ids are rejected") {
    TokenSequence bad{{v.size()}, {0}};
    CHECK_THROWS_AS(encode_toy(p, bad), std::out_of_range);
  }
  SUBCASE("backward matches finite differences") {
    VectorXd readout = VectorXd::Random(3);
    VectorXd pooled;
    encode_toy(p, seq, &pooled);
    ToyEncoderParams<double> g{MatrixXd::Zero(p.token_embedding.rows(), p.token_embedding.cols()),
                               MatrixXd::Zero(3, 4), VectorXd::Zero(3)};
    encode_toy_backward(p, seq, pooled, readout, g);
    auto f = [&] { return readout.dot(encode_toy(p, seq)); };
    const double h = 1e-6;
    for (int r = 0; r < p.token_embedding.rows(); ++r)
      for (int c = 0; c < p.token_embedding.cols(); ++c) {
        const double keep = p.token_embedding(r, c);
        p.token_embedding(r, c) = keep + h;
        const double up = f();
        p.token_embedding(r, c) = keep - h;
        const double down = f();
        p.token_embedding(r, c) = keep;
        CHECK(g.token_embedding(r, c) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
      }
    CHECK((g.projection_bias - readout).norm() == 0.0);
  }
}

TEST_CASE("tensor archive") {
  fixtures::TempDir dir("archive");
  TensorArchive a;
  a.metadata["note"] = "x";
  MatrixXd m = MatrixXd::Random(3, 4);
  Eigen::VectorXf f = Eigen::VectorXf::Random(5);
  a.put("m", m);
  a.put("f", f);
  a.put("empty", MatrixXd(0, 0));
  a.save(dir / "a.bin");
  auto b = TensorArchive::load(dir / "a.bin");
  CHECK(b.metadata["note"] == "x");
  CHECK(b.get<double>("m") == m);
  CHECK(b.get<float>("f") == MatrixXd(f.cast<double>()).cast<float>());
  CHECK(b.get<double>("empty").size() == 0);

  MatrixXd into(3, 4);
  b.get_into("m", into);
  CHECK(into == m);
  MatrixXd wrong(4, 3);
  CHECK_THROWS_AS(b.get_into("m", wrong), ArchiveError);
  CHECK_THROWS_AS(b.at("missing"), ArchiveError);

  SUBCASE("truncated file") {
    auto bytes = fixtures::read_text(dir / "a.bin");
    fixtures::write_text(dir / "t.bin", bytes.substr(0, bytes.size() - 9));
    CHECK_THROWS_AS(TensorArchive::load(dir / "t.bin"), ArchiveError);
  }
  SUBCASE("foreign file") {
    fixtures::write_text(dir / "x.bin", "not an archive at all");
    CHECK_THROWS_AS(TensorArchive::load(dir / "x.bin"), ArchiveError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(TensorArchive::load(dir / "none.bin"), ArchiveError); }
}

TEST_CASE("pretrained encoder") {
  auto vocab = Vocabulary({"hello", "there", "##s"}, SpecialTokens::bert());
  std::mt19937_64 rng(3);
  auto bert = BertEncoder<double>::random(tiny_bert(vocab.size()), rng);
  EncoderInput in{{"hello there", "theres"}, "hello"};
  auto seq = serialize(in, vocab, 32, true);
  CHECK(seq.ids.front() == vocab.id("[CLS]"));

  SUBCASE("pooled output is deterministic, bounded and sized") {
    auto v = bert.encode(seq);
    CHECK(v.size() == 8);
    CHECK(v == bert.encode(seq));
    CHECK(v.cwiseAbs().maxCoeff() < 1.0);
  }
  SUBCASE("archive round trip reproduces the output") {
    TensorArchive a;
    bert.write(a);
    fixtures::TempDir dir("bert");
    a.save(dir / "bert.bin");
    auto back = BertEncoder<double>::from_archive(TensorArchive::load(dir / "bert.bin"));
    CHECK((back.encode(seq) - bert.encode(seq)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.config.layers == 1);
  }
  SUBCASE("without layers the states are layer-normalized embedding sums") {
    std::mt19937_64 r2(4);
    auto plain = BertEncoder<double>::random(tiny_bert(vocab.size(), 0), r2);
    auto states = plain.hidden_states(seq);
    for (Eigen::Index t = 0; t < states.rows(); ++t) {
      VectorXd x = plain.word_embeddings.row(seq.ids[static_cast<std::size_t>(t)]).transpose() +
                   plain.position_embeddings.row(t).transpose() +
                   plain.token_type_embeddings.row(seq.segments[static_cast<std::size_t>(t)]).transpose();
      const double mean = x.mean();
      const double var = (x.array() - mean).square().mean();
      VectorXd expected = ((x.array() - mean) / std::sqrt(var + 1e-12)).matrix().cwiseProduct(plain.embedding_norm_gamma) +
                          plain.embedding_norm_beta;
      CHECK((states.row(t).transpose() - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("too long input is rejected") {
    TokenSequence seq_long{std::vector<int>(40, vocab.unk()), std::vector<int>(40, 0)};
    CHECK_THROWS_AS(bert.hidden_states(seq_long), std::invalid_argument);
  }
  SUBCASE("mean state") {
    auto m = bert.mean_state(utterance_ids("hello theres", vocab, true), vocab);
    CHECK(m.size() == 8);
    CHECK(m.allFinite());
  }
}

}
