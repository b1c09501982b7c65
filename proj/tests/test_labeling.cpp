#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "testutil.hpp"
#include "threatlens/labeling.hpp"

using namespace threatlens;
using labeling::SentimentLexicon;

namespace {

SentimentLexicon tiny_lexicon() {
    SentimentLexicon lex(Language::En);
    lex.add("bomb", -1.0);
    lex.add("attack", -1.0);
    lex.add("peace", 1.0);
    lex.add("calm", 0.5);
    lex.add("storm", -0.5);
    return lex;
}

}  // namespace

TEST(Polarity, HandArithmeticThreatCase) {
    // (-1 + -1 + 0) / 3 = -2/3, below the -0.5 threshold.
    auto lex = tiny_lexicon();
    auto res = labeling::polarity({"bomb", "attack", "unknownword"}, lex);
    EXPECT_EQ(res.n, 3u);
    EXPECT_NEAR(res.value, -2.0 / 3.0, 1e-12);
    EXPECT_EQ(res.label, Label::Threat);
}

TEST(Polarity, AllWordsAbsentScoreZero) {
    auto lex = tiny_lexicon();
    auto res = labeling::polarity({"xyz", "abc"}, lex);
    EXPECT_DOUBLE_EQ(res.value, 0.0);
    EXPECT_EQ(res.label, Label::Neutral);
}

TEST(Polarity, SinglePositiveWord) {
    auto lex = tiny_lexicon();
    auto res = labeling::polarity({"peace"}, lex);
    EXPECT_DOUBLE_EQ(res.value, 1.0);
    EXPECT_EQ(res.label, Label::NonThreat);
}

TEST(Polarity, EmptyTweetRejected) {
    auto lex = tiny_lexicon();
    EXPECT_THROW(labeling::polarity({}, lex), EmptyTweet);
}

TEST(Polarity, PermutationInvariant) {
    auto lex = tiny_lexicon();
    std::vector<std::string> words = {"bomb", "peace", "calm", "storm", "zzz", "attack"};
    auto base = labeling::polarity(words, lex);
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        shuffle(words, rng);
        auto shuffled = labeling::polarity(words, lex);
        EXPECT_DOUBLE_EQ(shuffled.value, base.value);
        EXPECT_EQ(shuffled.label, base.label);
    }
}

TEST(Polarity, BoundedByScoreRange) {
    SentimentLexicon lex(Language::En);
    Rng rng(5);
    std::vector<std::string> vocab;
    for (int i = 0; i < 40; ++i) {
        std::string w = "w" + std::to_string(i);
        lex.add(w, rng.uniform(-1.0, 1.0));
        vocab.push_back(w);
    }
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> words;
        std::size_t n = 1 + rng.below(12);
        for (std::size_t k = 0; k < n; ++k) words.push_back(vocab[rng.below(vocab.size())]);
        auto res = labeling::polarity(words, lex);
        EXPECT_GE(res.value, -1.0);
        EXPECT_LE(res.value, 1.0);
    }
}

TEST(PolarityLabel, BoundaryGrid) {
    const double eps = 1e-9;
    EXPECT_EQ(labeling::polarity_label(-1.0), Label::Threat);
    EXPECT_EQ(labeling::polarity_label(-0.5 - eps), Label::Threat);
    EXPECT_EQ(labeling::polarity_label(-0.5), Label::Threat);  // boundary inclusive
    EXPECT_EQ(labeling::polarity_label(-0.5 + eps), Label::Neutral);
    EXPECT_EQ(labeling::polarity_label(0.0), Label::Neutral);
    EXPECT_EQ(labeling::polarity_label(0.5 - eps), Label::Neutral);
    EXPECT_EQ(labeling::polarity_label(0.5), Label::NonThreat);  // boundary inclusive
    EXPECT_EQ(labeling::polarity_label(1.0), Label::NonThreat);
}

TEST(PolarityLabel, NonFiniteRejected) {
    EXPECT_THROW(labeling::polarity_label(std::numeric_limits<double>::quiet_NaN()),
                 NonFiniteInput);
    EXPECT_THROW(labeling::polarity_label(std::numeric_limits<double>::infinity()),
                 NonFiniteInput);
}

TEST(Reconcile, ManualAlwaysWinsAllNinePairs) {
    const Label all[] = {Label::Threat, Label::Neutral, Label::NonThreat};
    for (Label manual : all)
        for (Label auto_label : all)
            EXPECT_EQ(labeling::reconcile(manual, auto_label), manual);
}

TEST(Reconcile, AutoUsedWhenManualAbsent) {
    const Label all[] = {Label::Threat, Label::Neutral, Label::NonThreat};
    for (Label auto_label : all)
        EXPECT_EQ(labeling::reconcile(std::nullopt, auto_label), auto_label);
}

TEST(Lexicon, TsvLoadAndCaseFolding) {
    tltest::TempDir dir("lex");
    tltest::write_file(dir.file("lex.tsv"), "Bomb\t-1\npeace\t0.75\n# comment\nШторм\t-0.25\n");
    auto lex = labeling::load_lexicon_tsv(dir.file("lex.tsv"), Language::En);
    EXPECT_EQ(lex.size(), 3u);
    EXPECT_DOUBLE_EQ(lex.score("bomb"), -1.0);
    EXPECT_DOUBLE_EQ(lex.score("BOMB"), -1.0);
    EXPECT_DOUBLE_EQ(lex.score("peace"), 0.75);
    EXPECT_DOUBLE_EQ(lex.score("шторм"), -0.25);  // Cyrillic fold
    EXPECT_DOUBLE_EQ(lex.score("absent"), 0.0);
}

TEST(Lexicon, RejectsOutOfRangeAndMalformed) {
    tltest::TempDir dir("lexbad");
    tltest::write_file(dir.file("range.tsv"), "word\t1.5\n");
    EXPECT_THROW(labeling::load_lexicon_tsv(dir.file("range.tsv"), Language::En),
                 MalformedRecord);
    tltest::write_file(dir.file("nonnum.tsv"), "word\tabc\n");
    EXPECT_THROW(labeling::load_lexicon_tsv(dir.file("nonnum.tsv"), Language::En),
                 MalformedRecord);
    tltest::write_file(dir.file("notsv.tsv"), "justaword\n");
    EXPECT_THROW(labeling::load_lexicon_tsv(dir.file("notsv.tsv"), Language::En),
                 MalformedRecord);
}
