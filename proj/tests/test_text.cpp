#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "duet/error.hpp"
#include "duet/text.hpp"
#include "duet/util.hpp"

using namespace duet;

TEST(Decompose, OverallOnlyRewritesToSingular) {
  const auto r = decompose_prompt("these two return to their original position.");
  EXPECT_EQ(r.person1, "he returns to his original position");
  EXPECT_EQ(r.person2, "he returns to his original position");
  EXPECT_EQ(r.source, PromptSource::rule);
}

TEST(Decompose, OneAndTheOtherSplits) {
  const auto r = decompose_prompt("one person is crossing the legs, the other person takes a picture.");
  EXPECT_EQ(r.person1, "one person is crossing the legs");
  EXPECT_EQ(r.person2, "the other person takes a picture");
}

TEST(Decompose, FirstPersonOnlyGetsReciprocal) {
  const auto r =
      decompose_prompt("the first person places both hands on the waist while facing the second.");
  EXPECT_EQ(r.person1, "the first person places both hands on the waist while facing the second");
  EXPECT_FALSE(r.person2.empty());
  EXPECT_NE(r.person2.find("second"), std::string::npos);
  EXPECT_NE(r.person2.find("facing the other person"), std::string::npos);
}

TEST(Decompose, FirstSecondMarkers) {
  const auto r =
      decompose_prompt("the first person waves, and the second person raises both arms.");
  EXPECT_EQ(r.person1, "the first person waves");
  EXPECT_EQ(r.person2, "the second person raises both arms");
}

TEST(Decompose, CacheHitIsVerbatim) {
  PromptCache cache;
  cache.insert("two people dance.", "A leads", "B follows");
  const auto r = decompose_prompt("two people dance.", &cache);
  EXPECT_EQ(r.person1, "A leads");
  EXPECT_EQ(r.person2, "B follows");
  EXPECT_EQ(r.source, PromptSource::cache);
}

TEST(Decompose, EmptyCacheValuesFallBackToRules) {
  std::istringstream in("these two jump.\t\tsomething\n");
  const PromptCache cache = PromptCache::parse(in);
  const auto r = decompose_prompt("these two jump.", &cache);
  EXPECT_EQ(r.source, PromptSource::rule);
  EXPECT_EQ(r.person1, "he jumps");
}

TEST(Decompose, MalformedCacheLineReportsOffset) {
  std::istringstream in("ok\ta\tb\nbroken line\n");
  try {
    PromptCache::parse(in);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 7U);
  }
}

TEST(Decompose, TotalOnAssortedInputs) {
  for (const char* p : {"x", "they wave.", "the other person sits", "one person, the other",
                        "person one kicks; person two blocks", "?!", "a b c d e f"}) {
    const auto r = decompose_prompt(p);
    EXPECT_FALSE(r.person1.empty()) << p;
    EXPECT_FALSE(r.person2.empty()) << p;
  }
}

TEST(Decompose, ScenarioOneIsIdempotent) {
  for (const char* p : {"these two return to their original position.", "they hug each other.",
                        "two people walk toward each other and shake hands."}) {
    const auto once = decompose_prompt(p);
    const auto twice = decompose_prompt(once.person1);
    EXPECT_EQ(twice.person1, once.person1) << p;
    EXPECT_EQ(twice.person2, once.person2) << p;
  }
}

TEST(Tokenize, SplitsOnPunctuation) {
  EXPECT_EQ(tokenize("Hello, World! it's"),
            (std::vector<std::string>{"hello", "world", "it's"}));
  EXPECT_TRUE(tokenize("  ... ").empty());
}

TEST(HashEmbedder, MatchesTableLookupPlusPositions) {
  const HashEmbedder e(16);
  const Matrix ab = e.embed({"a", "b"});
  const Matrix pos = sinusoidal_encoding(2, 16);
  EXPECT_LT((ab.row(0) - (e.lookup("a") + pos.row(0))).norm(), 1e-12);
  EXPECT_LT((ab.row(1) - (e.lookup("b") + pos.row(1))).norm(), 1e-12);
  const Matrix ba = e.embed({"b", "a"});
  EXPECT_GT((ab - ba).norm(), 1e-3);
}

TEST(TextEncoder, DeterministicAndShaped) {
  ad::ParameterSet params;
  std::mt19937_64 rng(1);
  const TextEncoder enc(params, "t", {16, 2, 32}, rng);
  const HashEmbedder e(16);
  const EmbeddedText text = embed_text(e, "the first person waves");
  ad::Tape t1(false);
  ad::Tape t2(false);
  const Matrix a = enc.encode(t1, text).value();
  const Matrix b = enc.encode(t2, text).value();
  EXPECT_EQ(a.rows(), 4);
  EXPECT_EQ(a.cols(), 16);
  EXPECT_EQ(a, b);

  ad::Tape t3(false);
  const Matrix ba = enc.encode(t3, embed_text(e, "b a")).value();
  ad::Tape t4(false);
  const Matrix ab = enc.encode(t4, embed_text(e, "a b")).value();
  EXPECT_GT((ab - ba).norm(), 1e-6);
}

TEST(TextEncoder, EmptyTextGivesNullRow) {
  ad::ParameterSet params;
  std::mt19937_64 rng(1);
  const TextEncoder enc(params, "t", {8, 1, 8}, rng);
  const EmbeddedText empty = embed_text(HashEmbedder(8), "");
  EXPECT_TRUE(empty.is_null);
  ad::Tape tape(false);
  const Matrix out = enc.encode(tape, empty).value();
  EXPECT_EQ(out.rows(), 1);
  EXPECT_EQ(out.cols(), 8);
}

TEST(SentenceFeature, IdentityCase) {
  const Matrix token = (Matrix(1, 3) << 0.5, -1.0, 2.0).finished();
  const RowVector out = sentence_feature(token, Matrix::Identity(3, 3), RowVector::Zero(3));
  EXPECT_LT((out - token.row(0)).norm(), 1e-15);
}

TEST(SentenceFeature, DuplicateRowsMatchSingleRow) {
  std::mt19937_64 rng(2);
  const Matrix row = random_normal(1, 4, 1.0, rng);
  const Matrix w = random_normal(4, 5, 1.0, rng);
  const RowVector b = random_normal(1, 5, 1.0, rng);
  Matrix two(2, 4);
  two << row, row;
  EXPECT_LT((sentence_feature(two, w, b) - sentence_feature(row, w, b)).norm(), 1e-12);
}

TEST(SentenceFeature, MatchesHandComputation) {
  std::mt19937_64 rng(3);
  const Matrix x = random_normal(3, 4, 1.0, rng);
  const Matrix w = random_normal(4, 6, 1.0, rng);
  const RowVector b = random_normal(1, 6, 1.0, rng);
  RowVector expected = b;
  for (int c = 0; c < 6; ++c) {
    for (int k = 0; k < 4; ++k) {
      expected(c) += (x(0, k) + x(1, k) + x(2, k)) / 3.0 * w(k, c);
    }
  }
  EXPECT_LT((sentence_feature(x, w, b) - expected).norm(), 1e-12);
}
