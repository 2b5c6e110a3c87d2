#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hybridrank/error.hpp"
#include "hybridrank/index.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace hybridrank;
using index::HybridIndex;
using scoring::Normalization;
using scoring::ScoringConfig;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("hybridrank_test_" + name);
}

}  // namespace

TEST_CASE("build validates entries") {
    const auto empty = HybridIndex::build({});
    CHECK(empty.size() == 0);
    CHECK(empty.query({"q", SourceTag::other, {{1.0F}}, {}, {}}, {}, 10).empty());

    const auto one = HybridIndex::build({{"a", SourceTag::bullet, {{1.0F}}, {{{7, 2.0F}}, 0}, {}}});
    REQUIRE(one.postings(7).size() == 1);
    CHECK(one.postings(7)[0] == index::Posting{0, 2.0F});
    CHECK(one.postings(8).empty());
    CHECK(one.metadata().vocab_size == 8);

    CHECK_THROWS_WITH(HybridIndex::build({{"a", SourceTag::other, {{1.0F}}, {}, {}},
                                          {"a", SourceTag::other, {{1.0F}}, {}, {}}}),
                      doctest::Contains("duplicate entry id 'a'"));
    CHECK_THROWS_AS(HybridIndex::build({{"a", SourceTag::other, {{1.0F}}, {}, {}},
                                        {"b", SourceTag::other, {{1.0F, 2.0F}}, {}, {}}}),
                    DimensionError);
    CHECK_THROWS_AS(HybridIndex::build({{"a", SourceTag::other, {{1.0F}}, {{{9, 1.0F}}, 0}, {}}}, {0, 5, 0, ""}),
                    DimensionError);
}

TEST_CASE("postings hold exactly the nonzero entries") {
    gen::Rng rng(41);
    const auto entries = gen::entries(rng, 100, 4, 60, 15);
    const auto idx = HybridIndex::build(entries);
    std::size_t nnz = 0;
    for (const auto& e : entries) nnz += e.sparse.size();
    CHECK(idx.posting_count() == nnz);

    std::size_t found = 0;
    for (TokenId t = 0; t < 60; ++t) {
        const auto list = idx.postings(t);
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (i > 0) REQUIRE(list[i - 1].entry < list[i].entry);
            const auto& e = idx.entries()[list[i].entry];
            const auto it = std::find_if(e.sparse.entries.begin(), e.sparse.entries.end(),
                                         [t](const SparseEntry& s) { return s.token == t; });
            REQUIRE(it != e.sparse.entries.end());
            REQUIRE(it->weight == list[i].weight);
            ++found;
        }
    }
    CHECK(found == nnz);
}

TEST_CASE("query equals brute-force rank") {
    gen::Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const auto entries = gen::entries(rng, 1 + trial * 20, 16, 80, 20);
        const auto idx = HybridIndex::build(entries);
        const auto q = gen::entry(rng, "q", 16, 80, 20);
        for (double alpha : {0.0, 0.5, 1.0}) {
            const ScoringConfig cfg{alpha, std::nullopt, Normalization::none};
            const auto got = idx.query(q, cfg, entries.size() + 5);
            const auto want = scoring::rank(q, entries, cfg);
            REQUIRE(got == want);
            const auto oracle_rank = oracle::brute_rank(q, entries, alpha, 80);
            for (std::size_t i = 0; i < got.size(); ++i) {
                REQUIRE(got[i].candidate_id == oracle_rank[i].id);
                REQUIRE(std::abs(got[i].combined - oracle_rank[i].combined) <= 1e-6);
            }
            const auto top1 = idx.query(q, cfg, 1);
            REQUIRE(top1.size() == 1);
            REQUIRE(top1[0] == want[0]);
            const auto top5 = idx.query(q, cfg, 5);
            REQUIRE(std::equal(top5.begin(), top5.end(), want.begin()));
        }
    }
}

TEST_CASE("empty query at alpha 0 ties every candidate") {
    gen::Rng rng(43);
    const auto idx = HybridIndex::build(gen::entries(rng, 12, 4, 30, 5));
    HybridEntry q{"q", SourceTag::other, gen::dense(rng, 4), {}, {}};
    const auto got = idx.query(q, {0.0, std::nullopt, Normalization::none}, 100);
    REQUIRE(got.size() == 12);
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].combined == 0.0);
        if (i > 0) CHECK(got[i - 1].candidate_id < got[i].candidate_id);
    }
}

TEST_CASE("query filters and normalization") {
    gen::Rng rng(44);
    const auto entries = gen::entries(rng, 40, 8, 50, 10);
    const auto idx = HybridIndex::build(entries);
    const auto q = gen::entry(rng, "q", 8, 50, 10);

    index::QueryFilter by_source;
    by_source.sources = std::set<SourceTag>{SourceTag::review};
    std::vector<HybridEntry> reviews;
    for (const auto& e : entries)
        if (e.source == SourceTag::review) reviews.push_back(e);
    CHECK(idx.query(q, {}, 100, by_source) == scoring::rank(q, reviews, {}));

    index::QueryFilter by_id;
    by_id.candidate_ids = std::vector<std::string>{"c3", "c10", "nope"};
    const auto subset = idx.query(q, {}, 100, by_id);
    CHECK(subset.size() == 2);

    ScoringConfig scaled{0.5, scoring::SourcePriors{}, Normalization::min_max_per_query};
    for (auto tag : all_source_tags()) (*scaled.source_priors)[tag] = 0.1 + static_cast<int>(tag) * 0.1;
    const auto full = scoring::rank(q, entries, scaled);
    const auto got = idx.query(q, scaled, 7);
    REQUIRE(got.size() == 7);
    CHECK(std::equal(got.begin(), got.end(), full.begin()));

    CHECK_THROWS_AS((void)idx.query({"q", SourceTag::other, {{1.0F}}, {}, {}}, {}, 5), DimensionError);
}

TEST_CASE("save and load round-trip") {
    gen::Rng rng(45);
    auto entries = gen::entries(rng, 30, 6, 40, 8);
    entries[3].surface_tokens = std::vector<std::string>{"how", "fast", "does", "it", "go"};
    entries[4].surface_tokens = std::vector<std::string>{};
    const auto idx = HybridIndex::build(entries, {0, 64, 8, R"({"k":8})"});
    const auto path = temp_file("roundtrip.hrix");
    idx.save(path);
    const auto loaded = HybridIndex::load(path);
    CHECK(loaded == idx);
    CHECK(loaded.serialize() == idx.serialize());
    CHECK(loaded.metadata().creation_config == R"({"k":8})");
    std::filesystem::remove(path);

    const auto empty = HybridIndex::build({});
    CHECK(HybridIndex::deserialize(empty.serialize()) == empty);
}

TEST_CASE("load reports distinct failures") {
    gen::Rng rng(46);
    const auto idx = HybridIndex::build(gen::entries(rng, 10, 4, 20, 5));
    const auto bytes = idx.serialize();

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS((void)HybridIndex::deserialize(bad_magic), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_AS((void)HybridIndex::deserialize(bad_version), VersionError);

    CHECK_THROWS_AS((void)HybridIndex::deserialize(bytes.substr(0, bytes.size() - 10)), TruncatedError);
    CHECK_THROWS_AS((void)HybridIndex::deserialize(bytes.substr(0, 2)), FormatError);

    // Last payload byte of the final (postings) section, just before its CRC.
    auto corrupted = bytes;
    corrupted[bytes.size() - 5] ^= 0x5A;
    CHECK_THROWS_AS((void)HybridIndex::deserialize(corrupted), ChecksumError);

    CHECK_THROWS_AS((void)HybridIndex::load(temp_file("does_not_exist.hrix")), IoError);
}
