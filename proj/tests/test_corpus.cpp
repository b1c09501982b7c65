#include <gtest/gtest.h>

#include <set>

#include "testutil.hpp"
#include "threatlens/corpus.hpp"

using namespace threatlens;

TEST(LoadJsonl, SingleRecordWithLabel) {
    tltest::TempDir dir("load");
    tltest::write_file(dir.file("one.jsonl"),
                       R"({"text":"evacuate now","lang":"en","label":"threat"})"
                       "\n");
    auto ds = corpus::load_jsonl(dir.file("one.jsonl"));
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.records[0].text, "evacuate now");
    EXPECT_EQ(ds.records[0].lang, Language::En);
    ASSERT_TRUE(ds.records[0].final_label.has_value());
    EXPECT_EQ(*ds.records[0].final_label, Label::Threat);
    EXPECT_EQ(ds.records[0].id, "line-1");
}

TEST(LoadJsonl, MissingFileIsIoError) {
    EXPECT_THROW(corpus::load_jsonl("/definitely/not/there.jsonl"), IOError);
}

TEST(LoadJsonl, EmptyFileGivesEmptyDataset) {
    tltest::TempDir dir("load");
    tltest::write_file(dir.file("empty.jsonl"), "");
    EXPECT_EQ(corpus::load_jsonl(dir.file("empty.jsonl")).size(), 0u);
}

TEST(LoadJsonl, UnknownLanguageRejected) {
    tltest::TempDir dir("load");
    tltest::write_file(dir.file("fr.jsonl"), R"({"text":"bonjour","lang":"fr"})"
                                             "\n");
    EXPECT_THROW(corpus::load_jsonl(dir.file("fr.jsonl")), MalformedRecord);
}

TEST(LoadJsonl, UnknownLabelRejected) {
    tltest::TempDir dir("load");
    tltest::write_file(dir.file("bad.jsonl"), R"({"text":"x y","lang":"en","label":"meh"})"
                                              "\n");
    EXPECT_THROW(corpus::load_jsonl(dir.file("bad.jsonl")), MalformedRecord);
}

TEST(LoadJsonl, WhitespaceOnlyTextRejected) {
    tltest::TempDir dir("load");
    tltest::write_file(dir.file("ws.jsonl"), R"({"text":"  \t ","lang":"en"})"
                                             "\n");
    EXPECT_THROW(corpus::load_jsonl(dir.file("ws.jsonl")), EmptyText);
}

TEST(LoadJsonl, DuplicateIdsRejected) {
    tltest::TempDir dir("load");
    tltest::write_file(dir.file("dup.jsonl"),
                       R"({"id":"a","text":"one","lang":"en"})"
                       "\n"
                       R"({"id":"a","text":"two","lang":"en"})"
                       "\n");
    EXPECT_THROW(corpus::load_jsonl(dir.file("dup.jsonl")), DuplicateId);
}

TEST(LoadJsonl, ArabicNeutralRejected) {
    tltest::TempDir dir("load");
    tltest::write_file(dir.file("ar.jsonl"), R"({"text":"سلام","lang":"ar","label":"neutral"})"
                                             "\n");
    EXPECT_THROW(corpus::load_jsonl(dir.file("ar.jsonl")), MalformedRecord);
}

TEST(LoadJsonl, LangFilterKeepsOnlyRequested) {
    tltest::TempDir dir("load");
    tltest::write_file(dir.file("mix.jsonl"),
                       R"({"text":"hello","lang":"en"})"
                       "\n"
                       R"({"text":"привет","lang":"ru"})"
                       "\n");
    auto ds = corpus::load_jsonl(dir.file("mix.jsonl"), Language::Ru);
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_EQ(ds.records[0].lang, Language::Ru);
}

TEST(Jsonl, SaveLoadRoundTrip) {
    tltest::TempDir dir("rt");
    corpus::Dataset ds;
    Rng rng(42);
    const Label labels[] = {Label::Threat, Label::Neutral, Label::NonThreat};
    for (int i = 0; i < 50; ++i) {
        corpus::LabeledTweet rec;
        rec.id = "id-" + std::to_string(i);
        rec.text = "tweet number " + std::to_string(i);
        rec.lang = all_languages()[rng.below(3)];  // skip ar to allow any label
        if (rng.below(2)) {
            rec.manual_label = labels[rng.below(3)];
            rec.final_label = rec.manual_label;
        }
        if (rng.below(2)) {
            rec.polarity = rng.uniform(-1.0, 1.0);
            rec.polarity_label = labels[rng.below(3)];
            if (!rec.final_label) rec.final_label = rec.polarity_label;
        }
        ds.records.push_back(rec);
    }
    corpus::save_jsonl(ds, dir.file("ds.jsonl"));
    auto reloaded = corpus::load_jsonl(dir.file("ds.jsonl"));
    EXPECT_EQ(ds, reloaded);
}

TEST(Split, EightyTwentyOnTenRecords) {
    corpus::Dataset ds;
    for (int i = 0; i < 10; ++i)
        ds.records.push_back({"id" + std::to_string(i), "text x", Language::En, {}, {}, {}, {}});
    auto pair = corpus::split_train_test(ds, 0.8, 7);
    EXPECT_EQ(pair.train.size(), 8u);
    EXPECT_EQ(pair.test.size(), 2u);
}

TEST(Split, RatioOneKeepsAllInTrain) {
    corpus::Dataset ds;
    for (int i = 0; i < 5; ++i)
        ds.records.push_back({"id" + std::to_string(i), "text x", Language::En, {}, {}, {}, {}});
    auto pair = corpus::split_train_test(ds, 1.0, 3);
    EXPECT_EQ(pair.train.size(), 5u);
    EXPECT_TRUE(pair.test.empty());
}

TEST(Split, SameSeedGivesByteIdenticalSplits) {
    tltest::TempDir dir("split");
    corpus::Dataset ds;
    for (int i = 0; i < 37; ++i)
        ds.records.push_back(
            {"id" + std::to_string(i), "text " + std::to_string(i), Language::En, {}, {}, {}, {}});
    auto a = corpus::split_train_test(ds, 0.8, 123);
    auto b = corpus::split_train_test(ds, 0.8, 123);
    corpus::save_jsonl(a.train, dir.file("a.jsonl"));
    corpus::save_jsonl(b.train, dir.file("b.jsonl"));
    EXPECT_EQ(tltest::read_file(dir.file("a.jsonl")), tltest::read_file(dir.file("b.jsonl")));
    EXPECT_EQ(a.test, b.test);
}

TEST(Split, PartitionPropertyAcrossRatiosAndSeeds) {
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 1 + rng.below(200);
        corpus::Dataset ds;
        for (std::size_t i = 0; i < n; ++i)
            ds.records.push_back(
                {"id" + std::to_string(i), "t", Language::En, {}, {}, {}, {}});
        const std::uint64_t k = 1 + rng.below(20);  // ratio = k/20
        const double ratio = static_cast<double>(k) / 20.0;
        const std::uint64_t seed = rng.next_u64();
        auto pair = corpus::split_train_test(ds, ratio, seed);

        // Exact size formula, computed in integers.
        EXPECT_EQ(pair.train.size(), (k * n) / 20);
        EXPECT_EQ(pair.train.size() + pair.test.size(), n);

        std::set<std::string> seen;
        for (const auto& r : pair.train.records) EXPECT_TRUE(seen.insert(r.id).second);
        for (const auto& r : pair.test.records) EXPECT_TRUE(seen.insert(r.id).second);
        EXPECT_EQ(seen.size(), n);
    }
}

TEST(Split, EmptyDatasetRejected) {
    corpus::Dataset ds;
    EXPECT_THROW(corpus::split_train_test(ds, 0.8, 1), EmptyDataset);
}

namespace {

// Independent reimplementation of the documented shuffle: splitmix64 stream,
// Fisher-Yates with i from n-1 down to 1 and j = next() % (i+1).
std::vector<std::size_t> reference_order(std::size_t n, std::uint64_t seed) {
    std::uint64_t state = seed;
    auto next = [&state] {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[next() % i]);
    return order;
}

}  // namespace

TEST(Split, PartsPreserveTheDocumentedShuffleOrder) {
    corpus::Dataset ds;
    const std::size_t n = 23;
    for (std::size_t i = 0; i < n; ++i)
        ds.records.push_back({"id" + std::to_string(i), "t", Language::En, {}, {}, {}, {}});
    const std::uint64_t seed = 9001;
    auto pair = corpus::split_train_test(ds, 0.8, seed);

    auto order = reference_order(n, seed);
    const std::size_t n_train = (8 * n) / 10;
    ASSERT_EQ(pair.train.size(), n_train);
    for (std::size_t i = 0; i < n_train; ++i)
        EXPECT_EQ(pair.train.records[i].id, ds.records[order[i]].id);
    for (std::size_t i = n_train; i < n; ++i)
        EXPECT_EQ(pair.test.records[i - n_train].id, ds.records[order[i]].id);
}

namespace {

corpus::EncodedDataset encoded_of(std::size_t n, std::size_t dim, const std::string& prefix) {
    corpus::EncodedDataset ds;
    ds.dim = dim;
    for (std::size_t i = 0; i < n; ++i) {
        corpus::EncodedRecord rec;
        rec.id = prefix + std::to_string(i);
        rec.vec.assign(dim, static_cast<double>(i));
        rec.label = Label::Threat;
        rec.lang = Language::En;
        ds.records.push_back(rec);
    }
    return ds;
}

}  // namespace

TEST(Merge, FourPartsConcatenate) {
    std::vector<corpus::EncodedDataset> parts = {
        encoded_of(100, 300, "a"), encoded_of(80, 300, "b"), encoded_of(90, 300, "c"),
        encoded_of(70, 300, "d")};
    auto merged = corpus::merge_multilingual(parts);
    EXPECT_EQ(merged.size(), 340u);
    EXPECT_EQ(merged.dim, 300u);
}

TEST(Merge, DimensionMismatchRejected) {
    std::vector<corpus::EncodedDataset> parts = {encoded_of(10, 300, "a"),
                                                 encoded_of(10, 200, "b")};
    EXPECT_THROW(corpus::merge_multilingual(parts), DimensionMismatch);
}

TEST(Merge, EmptyInputRejected) {
    EXPECT_THROW(corpus::merge_multilingual({}), EmptyInput);
    std::vector<corpus::EncodedDataset> parts = {encoded_of(10, 8, "a"), encoded_of(0, 8, "b")};
    EXPECT_THROW(corpus::merge_multilingual(parts), EmptyInput);
}

TEST(Merge, SinglePartIsIdentity) {
    auto part = encoded_of(25, 16, "x");
    auto merged = corpus::merge_multilingual({part});
    EXPECT_EQ(merged.records, part.records);
    EXPECT_EQ(merged.dim, part.dim);
}
