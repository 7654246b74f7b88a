#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "noov/corpus.hpp"
#include "test_util.hpp"

using namespace noov;

namespace {

ParallelCorpus numbered_corpus(std::size_t n) {
  ParallelCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    c.add({"s" + std::to_string(i), "w"}, {"t" + std::to_string(i)});
  }
  return c;
}

}  // namespace

TEST(LoadParallel, ReadsAlignedLines) {
  tests::TempDir dir;
  text::write_file(dir.file("a.src"), "a b\n");
  text::write_file(dir.file("a.tgt"), "x y z\n");
  const auto c = load_parallel(dir.file("a.src"), dir.file("a.tgt"));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.pairs[0].source.size(), 2u);
  EXPECT_EQ(c.pairs[0].target.size(), 3u);
  EXPECT_EQ(c.pairs[0].id, 0u);
}

TEST(LoadParallel, LineCountMismatchNamesBothCounts) {
  tests::TempDir dir;
  text::write_file(dir.file("s"), "a\nb\n");
  text::write_file(dir.file("t"), "x\ny\nz\n");
  try {
    load_parallel(dir.file("s"), dir.file("t"));
    FAIL() << "expected AlignmentError";
  } catch (const AlignmentError& e) {
    EXPECT_NE(std::string(e.what()).find("2 ≠ 3"), std::string::npos) << e.what();
  }
}

TEST(LoadParallel, EmptyLineNamesLineNumber) {
  tests::TempDir dir;
  text::write_file(dir.file("s"), "a\n\nc\n");
  text::write_file(dir.file("t"), "x\ny\nz\n");
  try {
    load_parallel(dir.file("s"), dir.file("t"));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(LoadParallel, InvalidUtf8IsAFormatError) {
  tests::TempDir dir;
  text::write_file(dir.file("s"), "ok\n\xC3(\n");
  text::write_file(dir.file("t"), "x\ny\n");
  EXPECT_THROW(load_parallel(dir.file("s"), dir.file("t")), FormatError);
}

TEST(LoadParallel, CountsTokensOfALargeFile) {
  // 595 lines carrying 10201 source tokens in total.
  tests::TempDir dir;
  std::vector<std::string> src, tgt;
  std::size_t tokens = 0;
  for (int i = 0; i < 595; ++i) {
    const int len = i < 86 ? 18 : 17;  // 86*18 + 509*17 = 10201
    std::string line;
    for (int k = 0; k < len; ++k) line += (k ? " w" : "w") + std::to_string(k);
    tokens += static_cast<std::size_t>(len);
    src.push_back(line);
    tgt.push_back("t");
  }
  text::write_lines(dir.file("s"), src);
  text::write_lines(dir.file("t"), tgt);
  const auto c = load_parallel(dir.file("s"), dir.file("t"));
  std::size_t counted = 0;
  for (const auto& p : c.pairs) counted += p.source.size();
  EXPECT_EQ(c.size(), 595u);
  EXPECT_EQ(counted, 10201u);
  EXPECT_EQ(tokens, 10201u);
}

TEST(LoadParallel, SaveReloadRoundTrip) {
  tests::TempDir dir;
  ParallelCorpus c;
  c.add({"he", "denies", "any", "polyuria", "."}, {"niega", "poliuria", "."});
  c.add({"flu", "shot"}, {"vacuna", "contra", "la", "influenza"});
  save_parallel(c, dir.file("s"), dir.file("t"));
  const auto back = load_parallel(dir.file("s"), dir.file("t"));
  EXPECT_EQ(back.pairs, c.pairs);
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("flu shot ."), (Sentence{"flu", "shot", "."}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("shot.", true), (Sentence{"shot", "."}));
  EXPECT_EQ(tokenize("(flu) shot...", true), (Sentence{"(", "flu", ")", "shot", ".", ".", "."}));
  EXPECT_EQ(tokenize("...", true), (Sentence{"..."}));
  EXPECT_EQ(tokenize("shot.", false), (Sentence{"shot."}));
  for (const auto& t : tokenize("  a  b\t\tc ", true)) EXPECT_FALSE(t.empty());
}

TEST(Vocabulary, BuildOrdersByCountThenLexicographically) {
  const auto v = Vocabulary::build({{"a", "b"}, {"a"}}, 1);
  ASSERT_EQ(v.size(), 6u);
  EXPECT_EQ(v.id("a"), 4);
  EXPECT_EQ(v.id("b"), 5);
  EXPECT_EQ(v.count(4), 2);
  const auto ties = Vocabulary::build({{"zeta", "alpha", "mid"}}, 1);
  EXPECT_EQ(ties.token(4), "alpha");
  EXPECT_EQ(ties.token(5), "mid");
  EXPECT_EQ(ties.token(6), "zeta");
}

TEST(Vocabulary, MinCountDropsRareTokens) {
  const auto v = Vocabulary::build({{"a", "b"}}, 2);
  EXPECT_EQ(v.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(Vocabulary::is_special(v.token(i)));
}

TEST(Vocabulary, MapsAreMutualInverses) {
  const auto v = Vocabulary::build({{"el", "la", "el", "de"}, {"la", "casa"}}, 1);
  for (int i = 0; i < static_cast<int>(v.size()); ++i) EXPECT_EQ(v.id(v.token(i)), i);
  EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocabulary::kBos), "<s>");
  EXPECT_EQ(v.token(Vocabulary::kEos), "</s>");
  EXPECT_EQ(v.token(Vocabulary::kUnk), "<unk>");
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  tests::TempDir dir;
  const auto v = Vocabulary::build({{"x", "y", "x"}, {"ñ"}}, 1);
  v.save(dir.file("v.tsv"));
  EXPECT_EQ(Vocabulary::load(dir.file("v.tsv")), v);
  EXPECT_EQ(text::read_lines(dir.file("v.tsv")).front(), "<pad>\t0\t0");
}

TEST(Vocabulary, LoadRejectsMalformedRows) {
  tests::TempDir dir;
  text::write_file(dir.file("v.tsv"), "<pad>\t0\t0\n<s>\t1\n");
  EXPECT_THROW(Vocabulary::load(dir.file("v.tsv")), FormatError);
}

TEST(Encode, Examples) {
  const auto v = Vocabulary::build({{"a", "b"}, {"a"}}, 1);
  EXPECT_EQ(encode_sentence({"a"}, v, true).ids, (std::vector<int>{1, 4, 2}));
  EXPECT_EQ(encode_sentence({"zzz"}, v, false).ids, (std::vector<int>{3}));
  EXPECT_EQ(encode_sentence({"zzz"}, v, false).surfaces, (Sentence{"zzz"}));
  EXPECT_EQ(encode_sentence({}, v, true).ids, (std::vector<int>{1, 2}));
  const Sentence s{"b", "a", "a"};
  EXPECT_EQ(decode_ids(encode_sentence(s, v, false).ids, v), s);
}

TEST(Split, SizesFollowRoundedFractions) {
  const auto s = split_corpus(numbered_corpus(100), {0.2, 0.1, 5});
  EXPECT_EQ(s.train.size(), 72u);
  EXPECT_EQ(s.dev.size(), 8u);
  EXPECT_EQ(s.test.size(), 20u);
  const auto big = split_corpus(numbered_corpus(3020), {0.2, 0.1, 5});
  EXPECT_EQ(big.train.size(), 2174u);
  EXPECT_EQ(big.dev.size(), 242u);
  EXPECT_EQ(big.test.size(), 604u);
}

TEST(Split, IsADeterministicPartition) {
  const auto c = numbered_corpus(57);
  const auto a = split_corpus(c, {0.2, 0.1, 9});
  const auto b = split_corpus(c, {0.2, 0.1, 9});
  EXPECT_EQ(a.train_ids, b.train_ids);
  EXPECT_EQ(a.test_ids, b.test_ids);
  std::multiset<std::size_t> all;
  for (const auto* ids : {&a.train_ids, &a.dev_ids, &a.test_ids}) all.insert(ids->begin(), ids->end());
  EXPECT_EQ(all.size(), 57u);
  EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), 57u);
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    EXPECT_EQ(a.test.pairs[i].source, c.pairs[a.test_ids[i]].source);
    EXPECT_EQ(a.test.pairs[i].id, i);
  }
  const auto other = split_corpus(c, {0.2, 0.1, 10});
  EXPECT_NE(other.test_ids, a.test_ids);
}

TEST(Split, RejectsSmallCorporaAndBadFractions) {
  EXPECT_THROW(split_corpus(numbered_corpus(9), {}), ValidationError);
  EXPECT_THROW(split_corpus(numbered_corpus(20), {0.0, 0.1, 1}), ValidationError);
  EXPECT_THROW(split_corpus(numbered_corpus(20), {0.2, 1.0, 1}), ValidationError);
}

TEST(Oov, Examples) {
  const auto v = Vocabulary::build({{"a", "b"}}, 1);
  EXPECT_DOUBLE_EQ(oov_rate({{"a", "zzz", "a", "q"}}, v), 0.5);
  EXPECT_DOUBLE_EQ(oov_rate({{"a", "b"}, {"b"}}, v), 0.0);
  EXPECT_DOUBLE_EQ(oov_rate({{"a", "<unk>", "zzz"}}, v), 0.5);
  EXPECT_THROW(oov_rate({}, v), ValidationError);
  EXPECT_THROW(oov_rate({{}}, v), ValidationError);
}

TEST(Oov, EngineeredHeldOutCorpus) {
  // 1000 held-out tokens, 256 of them unseen in training.
  std::vector<Sentence> train{{}}, test;
  for (int i = 0; i < 50; ++i) train[0].push_back("known" + std::to_string(i));
  const auto v = Vocabulary::build(train, 1);
  std::size_t unseen = 0, total = 0;
  for (int s = 0; s < 100; ++s) {
    Sentence sent;
    for (int k = 0; k < 10; ++k) {
      const int i = s * 10 + k;
      if (i % 125 < 32) {
        sent.push_back("novel" + std::to_string(i));
      } else {
        sent.push_back("known" + std::to_string(i % 50));
      }
    }
    for (const auto& t : sent) {
      ++total;
      if (!v.contains(t)) ++unseen;
    }
    test.push_back(sent);
  }
  ASSERT_EQ(total, 1000u);
  ASSERT_EQ(unseen, 256u);
  EXPECT_DOUBLE_EQ(oov_rate(test, v), 0.256);
}

TEST(Concat, RenumbersIds) {
  const auto c = ParallelCorpus::concat({numbered_corpus(3), numbered_corpus(2)}, "joint");
  ASSERT_EQ(c.size(), 5u);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c.pairs[i].id, i);
  EXPECT_EQ(c.name, "joint");
}
