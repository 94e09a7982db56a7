#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "tkest/subset_catalog.hpp"

using namespace tkest;
using namespace tkest::testing;

namespace {

ImpactIndex abc_index() { return impacts("a\t0:1\nb\t0:1 1:1\nc\t0:1 1:1 2:1\n"); }

std::vector<SubsetStats> mine_text(ImpactIndex const& index,
                                   std::string const& log,
                                   std::size_t max_size,
                                   std::map<std::size_t, std::uint64_t> const& min_freq = {})
{
    std::istringstream in(log);
    return mine_subsets(in, index, max_size, min_freq);
}

SubsetStats stat(ImpactIndex const& index, std::initializer_list<char const*> names, std::uint64_t freq)
{
    auto const ids = term_ids(index, names);
    return {SubsetKey(std::span<TermId const>(ids)), freq};
}

/// Counts each subset once per query by testing containment against every
/// query, independent of the enumeration used by mine_subsets.
std::map<std::vector<TermId>, std::uint64_t> brute_mine(ImpactIndex const& index,
                                                        std::vector<std::string> const& log,
                                                        std::size_t max_size)
{
    std::vector<std::set<TermId>> queries;
    std::set<std::vector<TermId>> candidates;
    for (auto const& line : log) {
        std::set<TermId> terms;
        std::istringstream words(line);
        for (std::string w; words >> w;) {
            if (auto id = index.find_term(w)) {
                terms.insert(*id);
            }
        }
        for (auto& s : all_subsets({terms.begin(), terms.end()}, max_size)) {
            candidates.insert(std::move(s));
        }
        queries.push_back(std::move(terms));
    }
    std::map<std::vector<TermId>, std::uint64_t> out;
    for (auto const& c : candidates) {
        std::uint64_t n = 0;
        for (auto const& q : queries) {
            n += std::all_of(c.begin(), c.end(), [&](TermId t) { return q.contains(t); }) ? 1 : 0;
        }
        out[c] = n;
    }
    return out;
}

DepthPolicy pair_policy()
{
    DepthPolicy p;
    p.name = "pairs";
    p.base_depth = {{2, 10000}};
    p.tiers = {{100, 1.0}, {1, 0.1}};
    return p;
}

}  // namespace

TEST(SubsetKey, ValidatesShape)
{
    EXPECT_NO_THROW(SubsetKey({TermId(1), TermId(4)}));
    EXPECT_THROW(SubsetKey({TermId(4), TermId(1)}), std::invalid_argument);
    EXPECT_THROW(SubsetKey({TermId(1), TermId(1)}), std::invalid_argument);
    EXPECT_THROW(SubsetKey(std::span<TermId const>{}), std::invalid_argument);
    EXPECT_THROW(SubsetKey({TermId(0), TermId(1), TermId(2), TermId(3), TermId(4)}), std::invalid_argument);
    EXPECT_LT(SubsetKey({TermId(9)}), SubsetKey({TermId(0), TermId(1)}));
    EXPECT_LT(SubsetKey({TermId(0), TermId(2)}), SubsetKey({TermId(1), TermId(2)}));
}

TEST(SubsetKey, Containment)
{
    auto const q = make_query({TermId(1), TermId(3), TermId(5)});
    EXPECT_TRUE(SubsetKey({TermId(1), TermId(5)}).contained_in(q));
    EXPECT_FALSE(SubsetKey({TermId(1), TermId(2)}).contained_in(q));
    EXPECT_TRUE(SubsetKey({TermId(1), TermId(3), TermId(5)}).contained_in(q));
}

TEST(MineSubsets, HandExample)
{
    auto const index = abc_index();
    auto const got = mine_text(index, "a b\na b c\nb\n", 2);
    std::vector<SubsetStats> const expected{stat(index, {"a"}, 2),      stat(index, {"b"}, 3),
                                            stat(index, {"c"}, 1),      stat(index, {"a", "b"}, 2),
                                            stat(index, {"a", "c"}, 1), stat(index, {"b", "c"}, 1)};
    EXPECT_EQ(got, expected);
}

TEST(MineSubsets, EmptyLog)
{
    EXPECT_TRUE(mine_text(abc_index(), "", 4).empty());
}

TEST(MineSubsets, DuplicateTermsCollapse)
{
    auto const index = abc_index();
    std::vector<SubsetStats> const expected{stat(index, {"a"}, 1), stat(index, {"b"}, 1), stat(index, {"a", "b"}, 1)};
    EXPECT_EQ(mine_text(index, "a a b\n", 2), expected);
}

TEST(MineSubsets, UnknownTermsAndFrequencyFloor)
{
    auto const index = abc_index();
    auto const got = mine_text(index, "a zz b\na b\nc\n", 2, {{1, 2}});
    std::vector<SubsetStats> const expected{stat(index, {"a"}, 2), stat(index, {"b"}, 2), stat(index, {"a", "b"}, 2)};
    EXPECT_EQ(got, expected);
    EXPECT_THROW((void)mine_text(index, "a", 5), std::invalid_argument);
    EXPECT_THROW((void)mine_subsets(std::string("/nonexistent/log.txt"), index, 2), io_error);
}

TEST(MineSubsets, MatchesBruteForceEnumeration)
{
    auto const index = random_index(50, 30, 3);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto log = random_queries(index, 1000, 1, 7, seed);
        log.push_back("unknown t1 words");
        for (std::size_t max_size = 1; max_size <= 4; ++max_size) {
            std::ostringstream text;
            for (auto const& q : log) {
                text << q << '\n';
            }
            auto const got = mine_text(index, text.str(), max_size);
            auto const expected = brute_mine(index, log, max_size);
            ASSERT_EQ(got.size(), expected.size());
            for (auto const& s : got) {
                std::vector<TermId> key(s.key.terms().begin(), s.key.terms().end());
                ASSERT_EQ(expected.at(key), s.frequency);
            }
        }
    }
}

TEST(MineSubsets, LongQueriesKeepTheRarestTerms)
{
    // Term t<i> has i+1 postings, so lower ids are rarer.
    std::ostringstream text;
    for (int t = 0; t < 14; ++t) {
        text << 't' << t << '\t';
        for (int d = 0; d <= t; ++d) {
            text << (d ? " " : "") << d << ":1";
        }
        text << '\n';
    }
    auto const index = impacts(text.str());
    std::string query;
    for (int t = 13; t >= 0; --t) {
        query += "t" + std::to_string(t) + " ";
    }
    auto const got = mine_text(index, query, 1);
    ASSERT_EQ(got.size(), mining_term_cap);
    for (auto const& s : got) {
        EXPECT_LT(s.key[0].value, 12U);
    }
}

TEST(AssignDepths, TierExamples)
{
    auto const index = abc_index();
    auto const policy = pair_policy();
    std::vector<SubsetStats> stats{stat(index, {"a", "b"}, 5), stat(index, {"a", "c"}, 100)};
    auto const got = assign_depths(stats, policy, 1000);
    ASSERT_EQ(got.size(), 2U);
    EXPECT_EQ(got[0].depth, 1000U);
    EXPECT_EQ(got[1].depth, 10000U);
}

TEST(AssignDepths, ClampsAndDrops)
{
    auto const index = abc_index();
    auto policy = pair_policy();
    policy.base_depth[1] = 500;
    policy.min_frequency_to_keep = {{2, 3}};
    std::vector<SubsetStats> stats{stat(index, {"a"}, 1), stat(index, {"a", "b"}, 2), stat(index, {"a", "c"}, 3),
                                   stat(index, {"a", "b", "c"}, 50)};
    auto const got = assign_depths(stats, policy, 1000);
    ASSERT_EQ(got.size(), 2U);
    EXPECT_EQ(got[0].stats, stats[0]);
    EXPECT_EQ(got[0].depth, 1000U);  // 500 * 0.1 clamped up to k_max
    EXPECT_EQ(got[1].stats, stats[2]);
    EXPECT_EQ(got[1].depth, 1000U);
}

TEST(AssignDepths, MonotoneInFrequencyAndAtLeastKMax)
{
    auto const index = abc_index();
    for (auto const* name : {"huge", "large", "medium", "small"}) {
        auto const policy = named_config(name);
        for (std::size_t size = 1; size <= policy.max_size(); ++size) {
            std::vector<TermId> ids{TermId(0), TermId(1), TermId(2)};
            ids.resize(std::min<std::size_t>(size, 3));
            if (size == 4) {
                continue;
            }
            std::uint32_t last = 0;
            for (std::uint64_t f = 1; f <= 200; ++f) {
                std::vector<SubsetStats> one{{SubsetKey(std::span<TermId const>(ids)), f}};
                for (std::uint32_t k_max : {10U, 1000U}) {
                    auto const got = assign_depths(one, policy, k_max);
                    if (!got.empty()) {
                        EXPECT_GE(got[0].depth, k_max);
                    }
                }
                auto const got = assign_depths(one, policy, 10);
                if (!got.empty()) {
                    EXPECT_GE(got[0].depth, last) << name << " size " << size << " freq " << f;
                    last = got[0].depth;
                }
            }
        }
    }
}

TEST(NamedConfig, Shapes)
{
    auto const huge = named_config("huge");
    EXPECT_EQ(huge.base_depth, (std::map<std::size_t, std::uint32_t>{{1, 10000}, {2, 10000}, {3, 4000}, {4, 3000}}));
    EXPECT_EQ(huge.max_size(), 4U);
    ASSERT_EQ(huge.tiers.size(), 1U);
    EXPECT_EQ(huge.tiers[0].multiplier, 1.0);
    EXPECT_EQ(named_config("large").max_size(), 3U);
    EXPECT_EQ(named_config("medium").max_size(), 2U);
    EXPECT_EQ(named_config("small").max_size(), 2U);
    for (auto const* name : {"huge", "large", "medium", "small"}) {
        EXPECT_NO_THROW(named_config(name).validate()) << name;
    }
    EXPECT_THROW((void)named_config("giant"), std::invalid_argument);
}

TEST(NamedConfig, PoliciesShrinkFromHugeToSmall)
{
    std::vector<DepthPolicy> const order{named_config("huge"), named_config("large"), named_config("medium"),
                                         named_config("small")};
    for (std::size_t i = 1; i < order.size(); ++i) {
        for (auto const& [size, depth] : order[i].base_depth) {
            ASSERT_TRUE(order[i - 1].base_depth.contains(size));
            EXPECT_LE(depth, order[i - 1].base_depth.at(size));
        }
    }
}

TEST(DepthSchedule, ExplicitDepths)
{
    std::vector<std::uint32_t> const depths{10000, 10000, 4000, 3000};
    auto const p = depth_schedule(depths);
    EXPECT_EQ(p.base_depth, named_config("huge").base_depth);
    EXPECT_EQ(p.name, "custom");
    EXPECT_THROW((void)depth_schedule(std::vector<std::uint32_t>{}), std::invalid_argument);
    EXPECT_THROW((void)depth_schedule(std::vector<std::uint32_t>{1, 2, 3, 4, 5}), std::invalid_argument);
    EXPECT_THROW((void)depth_schedule(std::vector<std::uint32_t>{10, 0}), std::invalid_argument);
}

TEST(DepthPolicy, ValidateRejectsMalformed)
{
    auto p = pair_policy();
    p.tiers = {{1, 1.0}, {100, 0.5}};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = pair_policy();
    p.tiers = {{1, 1.5}};
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = pair_policy();
    p.base_depth[2] = 0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Catalog, QuantileCoverageAddsMissingSubsets)
{
    auto const index = abc_index();
    std::vector<SubsetStats> stats{stat(index, {"a"}, 3), stat(index, {"b"}, 1), stat(index, {"a", "b"}, 1)};
    std::vector<CatalogEntry> catalog{{stats[0], 100}};
    auto const covered = with_quantile_coverage(catalog, stats);
    ASSERT_EQ(covered.size(), 3U);
    EXPECT_EQ(covered[0], (CatalogEntry{stats[0], 100}));
    EXPECT_EQ(covered[1], (CatalogEntry{stats[1], 0}));
    EXPECT_EQ(covered[2], (CatalogEntry{stats[2], 0}));
}

TEST(Catalog, TsvRoundTrip)
{
    auto const index = abc_index();
    std::vector<CatalogEntry> catalog{{stat(index, {"a"}, 3), 100}, {stat(index, {"b", "c"}, 7), 2000}};
    std::stringstream text;
    write_catalog(catalog, index, text);
    EXPECT_EQ(text.str(), "a\t3\t100\nb,c\t7\t2000\n");
    EXPECT_EQ(read_catalog(text, index), catalog);
    std::istringstream bad("a,zz\t1\t10\n");
    EXPECT_THROW((void)read_catalog(bad, index), parse_error);
    std::istringstream short_line("a\t1\n");
    EXPECT_THROW((void)read_catalog(short_line, index), parse_error);
}
