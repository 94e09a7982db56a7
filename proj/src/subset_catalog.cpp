#include "tkest/subset_catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "tkest/hash.hpp"

namespace tkest {

SubsetKey::SubsetKey(std::span<TermId const> terms)
{
    if (terms.empty() || terms.size() > max_terms) {
        throw std::invalid_argument("SubsetKey: size must be in [1,4]");
    }
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i > 0 && !(terms[i - 1] < terms[i])) {
            throw std::invalid_argument("SubsetKey: terms must be strictly ascending");
        }
        m_terms[i] = terms[i];
    }
    m_size = terms.size();
}

bool SubsetKey::contained_in(Query const& query) const noexcept
{
    return std::includes(query.terms.begin(), query.terms.end(), m_terms.begin(), m_terms.begin() + m_size);
}

std::strong_ordering operator<=>(SubsetKey const& a, SubsetKey const& b) noexcept
{
    if (auto c = a.m_size <=> b.m_size; c != 0) {
        return c;
    }
    for (std::size_t i = 0; i < a.m_size; ++i) {
        if (auto c = a.m_terms[i] <=> b.m_terms[i]; c != 0) {
            return c;
        }
    }
    return std::strong_ordering::equal;
}

bool operator==(SubsetKey const& a, SubsetKey const& b) noexcept { return (a <=> b) == 0; }

std::size_t SubsetKeyHash::operator()(SubsetKey const& key) const noexcept
{
    std::uint64_t h = key.size();
    for (auto t : key.terms()) {
        h = hash64(h, t.value);
    }
    return static_cast<std::size_t>(h);
}

std::size_t DepthPolicy::max_size() const { return base_depth.empty() ? 0 : base_depth.rbegin()->first; }

void DepthPolicy::validate() const
{
    if (base_depth.empty()) {
        throw std::invalid_argument("depth policy '" + name + "': no subset sizes");
    }
    for (auto [size, depth] : base_depth) {
        if (size < 1 || size > SubsetKey::max_terms) {
            throw std::invalid_argument("depth policy '" + name + "': subset size outside [1,4]");
        }
        if (depth == 0) {
            throw std::invalid_argument("depth policy '" + name + "': depths must be positive");
        }
    }
    for (std::size_t i = 0; i < tiers.size(); ++i) {
        if (!(tiers[i].multiplier > 0.0 && tiers[i].multiplier <= 1.0)) {
            throw std::invalid_argument("depth policy '" + name + "': tier multiplier outside (0,1]");
        }
        if (i > 0 && !(tiers[i - 1].min_frequency > tiers[i].min_frequency)) {
            throw std::invalid_argument("depth policy '" + name + "': tiers must be sorted by descending frequency");
        }
        if (i > 0 && tiers[i - 1].multiplier < tiers[i].multiplier) {
            throw std::invalid_argument("depth policy '" + name + "': multipliers must not grow as frequency falls");
        }
    }
}

namespace {

using count_map = std::unordered_map<SubsetKey, std::uint64_t, SubsetKeyHash>;

void count_subsets(std::vector<TermId> const& terms, std::size_t max_size, count_map& counts)
{
    std::array<TermId, SubsetKey::max_terms> chosen{};
    auto recurse = [&](auto&& self, std::size_t start, std::size_t depth) -> void {
        for (std::size_t i = start; i < terms.size(); ++i) {
            chosen[depth] = terms[i];
            ++counts[SubsetKey(std::span<TermId const>(chosen.data(), depth + 1))];
            if (depth + 1 < max_size) {
                self(self, i + 1, depth + 1);
            }
        }
    };
    recurse(recurse, 0, 0);
}

}  // namespace

std::vector<SubsetStats> mine_subsets(std::istream& log,
                                      ImpactIndex const& index,
                                      std::size_t max_size,
                                      std::map<std::size_t, std::uint64_t> const& min_freq)
{
    if (max_size < 1 || max_size > SubsetKey::max_terms) {
        throw std::invalid_argument("mine_subsets: max_size must be in [1,4]");
    }
    count_map counts;
    std::string line;
    while (std::getline(log, line)) {
        auto query = parse_query(index, line);
        auto terms = std::move(query.terms);
        if (terms.size() > mining_term_cap) {
            // Keep the rarest terms: shortest posting lists, ties by term id.
            std::stable_sort(terms.begin(), terms.end(), [&](TermId a, TermId b) {
                return index.list(a).size() < index.list(b).size();
            });
            terms.resize(mining_term_cap);
            std::sort(terms.begin(), terms.end());
        }
        count_subsets(terms, max_size, counts);
    }
    if (log.bad()) {
        throw io_error("mine_subsets: read failure");
    }
    std::vector<SubsetStats> out;
    out.reserve(counts.size());
    for (auto const& [key, freq] : counts) {
        auto it = min_freq.find(key.size());
        std::uint64_t const floor = it == min_freq.end() ? 1 : it->second;
        if (freq >= floor) {
            out.push_back({key, freq});
        }
    }
    std::sort(out.begin(), out.end(), [](auto const& a, auto const& b) { return a.key < b.key; });
    return out;
}

std::vector<SubsetStats> mine_subsets(std::string const& log_path,
                                      ImpactIndex const& index,
                                      std::size_t max_size,
                                      std::map<std::size_t, std::uint64_t> const& min_freq)
{
    std::ifstream in(log_path);
    if (!in) {
        throw io_error("cannot open query log '" + log_path + "'");
    }
    return mine_subsets(in, index, max_size, min_freq);
}

std::vector<CatalogEntry> assign_depths(std::span<SubsetStats const> stats, DepthPolicy const& policy, std::uint32_t k_max)
{
    policy.validate();
    std::vector<CatalogEntry> out;
    for (auto const& s : stats) {
        auto base = policy.base_depth.find(s.key.size());
        if (base == policy.base_depth.end()) {
            continue;
        }
        auto keep = policy.min_frequency_to_keep.find(s.key.size());
        if (keep != policy.min_frequency_to_keep.end() && s.frequency < keep->second) {
            continue;
        }
        double multiplier = 1.0;
        if (!policy.tiers.empty()) {
            auto tier = std::find_if(policy.tiers.begin(), policy.tiers.end(), [&](FrequencyTier const& t) {
                return t.min_frequency <= s.frequency;
            });
            if (tier == policy.tiers.end()) {
                continue;
            }
            multiplier = tier->multiplier;
        }
        auto depth = static_cast<std::uint32_t>(std::floor(base->second * multiplier));
        out.push_back({s, std::max(depth, k_max)});
    }
    return out;
}

DepthPolicy named_config(std::string_view name)
{
    DepthPolicy p;
    p.name = std::string(name);
    if (name == "huge") {
        p.base_depth = {{1, 10000}, {2, 10000}, {3, 4000}, {4, 3000}};
        p.tiers = {{1, 1.0}};
    } else if (name == "large") {
        p.base_depth = {{1, 4000}, {2, 4000}, {3, 2000}};
        p.tiers = {{50, 1.0}, {10, 0.5}, {1, 0.25}};
        p.min_frequency_to_keep = {{3, 5}};
    } else if (name == "medium") {
        p.base_depth = {{1, 2000}, {2, 2000}};
        p.tiers = {{50, 1.0}, {10, 0.5}, {1, 0.25}};
        p.min_frequency_to_keep = {{2, 2}};
    } else if (name == "small") {
        p.base_depth = {{1, 1000}, {2, 1000}};
        p.tiers = {{50, 1.0}, {10, 0.5}, {1, 0.2}};
        p.min_frequency_to_keep = {{2, 3}};
    } else {
        throw std::invalid_argument("unknown configuration '" + std::string(name) + "'");
    }
    p.validate();
    return p;
}

DepthPolicy depth_schedule(std::span<std::uint32_t const> depths)
{
    DepthPolicy p;
    p.name = "custom";
    for (std::size_t i = 0; i < depths.size(); ++i) {
        p.base_depth[i + 1] = depths[i];
    }
    p.validate();
    return p;
}

std::vector<CatalogEntry> with_quantile_coverage(std::vector<CatalogEntry> catalog, std::span<SubsetStats const> stats)
{
    std::unordered_map<SubsetKey, bool, SubsetKeyHash> present;
    for (auto const& e : catalog) {
        present.emplace(e.stats.key, true);
    }
    for (auto const& s : stats) {
        if (!present.contains(s.key)) {
            catalog.push_back({s, 0});
        }
    }
    std::sort(catalog.begin(), catalog.end(), [](auto const& a, auto const& b) { return a.stats.key < b.stats.key; });
    return catalog;
}

void write_catalog(std::span<CatalogEntry const> catalog, ImpactIndex const& index, std::ostream& out)
{
    for (auto const& e : catalog) {
        bool first = true;
        for (auto t : e.stats.key.terms()) {
            if (!first) {
                out << ',';
            }
            first = false;
            out << index.term_string(t);
        }
        out << '\t' << e.stats.frequency << '\t' << e.depth << '\n';
    }
}

std::vector<CatalogEntry> read_catalog(std::istream& in, ImpactIndex const& index)
{
    std::vector<CatalogEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string terms_field;
        std::string freq_field;
        std::string depth_field;
        if (!std::getline(fields, terms_field, '\t') || !std::getline(fields, freq_field, '\t')
            || !std::getline(fields, depth_field, '\t')) {
            throw parse_error("catalog: expected three tab-separated fields", line_no);
        }
        std::vector<TermId> ids;
        std::istringstream term_stream(terms_field);
        std::string term;
        while (std::getline(term_stream, term, ',')) {
            auto id = index.find_term(term);
            if (!id) {
                throw parse_error("catalog: unknown term '" + term + "'", line_no);
            }
            ids.push_back(*id);
        }
        std::sort(ids.begin(), ids.end());
        if (ids.empty() || ids.size() > SubsetKey::max_terms || std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
            throw parse_error("catalog: subset must hold 1-4 distinct terms", line_no);
        }
        try {
            CatalogEntry e{{SubsetKey(ids), std::stoull(freq_field)}, static_cast<std::uint32_t>(std::stoul(depth_field))};
            out.push_back(e);
        } catch (std::logic_error const&) {
            throw parse_error("catalog: bad number", line_no);
        }
    }
    return out;
}

}  // namespace tkest
