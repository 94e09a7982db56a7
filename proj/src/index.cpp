#include "tkest/index.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"
#include "tkest/hash.hpp"
#include "tkest/scoring.hpp"

namespace tkest {

namespace {

constexpr char index_magic[4] = {'T', 'K', 'I', 'X'};
constexpr std::uint8_t index_version = index_format_version;

}  // namespace

PostingList::PostingList(TermId term, std::vector<Posting> postings)
    : m_term(term), m_postings(std::move(postings))
{
    for (std::size_t i = 0; i < m_postings.size(); ++i) {
        if (m_postings[i].impact == 0) {
            throw format_error("posting list: zero impact");
        }
        if (i > 0 && !(m_postings[i - 1].doc < m_postings[i].doc)) {
            throw format_error("posting list: docIDs not strictly ascending");
        }
        m_max_impact = std::max(m_max_impact, m_postings[i].impact);
    }
}

std::size_t PostingList::next_geq(DocId doc, std::size_t from) const noexcept
{
    std::size_t const n = m_postings.size();
    if (from >= n || !(m_postings[from].doc < doc)) {
        return from;
    }
    // Gallop to bracket the target, then binary search inside the bracket.
    std::size_t lo = from;
    std::size_t step = 1;
    std::size_t hi = from + step;
    while (hi < n && m_postings[hi].doc < doc) {
        lo = hi;
        step <<= 1U;
        hi = lo + step;
    }
    hi = std::min(hi, n);
    auto it = std::lower_bound(m_postings.begin() + static_cast<std::ptrdiff_t>(lo + 1),
                               m_postings.begin() + static_cast<std::ptrdiff_t>(hi),
                               doc,
                               [](Posting const& p, DocId d) { return p.doc < d; });
    return static_cast<std::size_t>(it - m_postings.begin());
}

std::string_view to_string(ScorerKind kind)
{
    switch (kind) {
    case ScorerKind::bm25: return "bm25";
    case ScorerKind::qld: return "qld";
    case ScorerKind::precomputed: return "precomputed";
    }
    return "unknown";
}

ImpactIndex::ImpactIndex(std::vector<std::string> terms,
                         std::vector<PostingList> lists,
                         std::vector<std::string> doc_names,
                         QuantizationMeta quantization)
    : m_terms(std::move(terms)),
      m_lists(std::move(lists)),
      m_doc_names(std::move(doc_names)),
      m_quantization(quantization)
{
    if (m_terms.size() != m_lists.size()) {
        throw format_error("index: term dictionary and list count differ");
    }
    m_dictionary.reserve(m_terms.size());
    for (std::size_t t = 0; t < m_terms.size(); ++t) {
        if (!m_dictionary.emplace(m_terms[t], TermId(static_cast<std::uint32_t>(t))).second) {
            throw format_error("index: duplicate term '" + m_terms[t] + "'");
        }
        m_total_postings += m_lists[t].size();
    }
    validate();
}

std::optional<TermId> ImpactIndex::find_term(std::string_view term) const
{
    auto it = m_dictionary.find(std::string(term));
    if (it == m_dictionary.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::uint64_t ImpactIndex::fingerprint() const noexcept
{
    std::uint64_t h = hash64(0x544B4958ULL, document_count());
    h = hash64(h, term_count());
    h = hash64(h, total_postings());
    h = hash64(h, static_cast<std::uint64_t>(m_quantization.scorer.kind));
    h = hash64(h, static_cast<std::uint64_t>(m_quantization.bits));
    for (double v : {m_quantization.scorer.k1,
                     m_quantization.scorer.b,
                     m_quantization.scorer.mu,
                     m_quantization.global_max_raw_score}) {
        h = hash64(h, std::bit_cast<std::uint64_t>(v));
    }
    return h;
}

void ImpactIndex::validate() const
{
    if (m_quantization.bits < 1 || m_quantization.bits > 16) {
        throw format_error("index: quantization bits outside [1,16]");
    }
    if (m_quantization.scorer.kind != ScorerKind::precomputed && !(m_quantization.global_max_raw_score > 0.0)) {
        throw format_error("index: global max raw score must be positive");
    }
    auto const doc_count = document_count();
    for (std::size_t t = 0; t < m_lists.size(); ++t) {
        auto const& list = m_lists[t];
        if (list.term().value != t) {
            throw format_error("index: list term id mismatch");
        }
        if (list.empty()) {
            throw format_error("index: term '" + m_terms[t] + "' has an empty posting list");
        }
        if (list.postings().back().doc.value >= doc_count) {
            throw format_error("index: docID out of range in list '" + m_terms[t] + "'");
        }
        Impact max = 0;
        for (std::size_t i = 0; i < list.size(); ++i) {
            auto const& p = list.postings()[i];
            if (p.impact == 0 || (i > 0 && !(list.postings()[i - 1].doc < p.doc))) {
                throw format_error("index: ordering invariant violated in list '" + m_terms[t] + "'");
            }
            max = std::max(max, p.impact);
        }
        if (max != list.max_impact()) {
            throw format_error("index: stale max impact");
        }
    }
}

bool operator==(ImpactIndex const& a, ImpactIndex const& b)
{
    return a.m_terms == b.m_terms && a.m_lists == b.m_lists && a.m_doc_names == b.m_doc_names
        && a.m_quantization == b.m_quantization;
}

bool same_postings(ImpactIndex const& a, ImpactIndex const& b)
{
    if (a.document_count() != b.document_count() || a.term_count() != b.term_count()) {
        return false;
    }
    for (std::size_t t = 0; t < a.term_count(); ++t) {
        TermId id(static_cast<std::uint32_t>(t));
        if (a.term_string(id) != b.term_string(id)) {
            return false;
        }
        auto pa = a.list(id).postings();
        auto pb = b.list(id).postings();
        if (!std::equal(pa.begin(), pa.end(), pb.begin(), pb.end())) {
            return false;
        }
    }
    return true;
}

std::optional<Impact> lookup(ImpactIndex const& index, TermId term, DocId doc)
{
    auto const& list = index.list(term);
    auto pos = list.next_geq(doc);
    if (pos < list.size() && list.postings()[pos].doc == doc) {
        return list.postings()[pos].impact;
    }
    return std::nullopt;
}

std::vector<std::optional<Impact>> batch_lookup(ImpactIndex const& index, TermId term, std::span<DocId const> docs)
{
    for (std::size_t i = 1; i < docs.size(); ++i) {
        if (!(docs[i - 1] < docs[i])) {
            throw std::invalid_argument("batch_lookup: docs must be strictly ascending");
        }
    }
    auto const& list = index.list(term);
    std::vector<std::optional<Impact>> out;
    out.reserve(docs.size());
    std::size_t pos = 0;
    for (auto doc : docs) {
        pos = list.next_geq(doc, pos);
        if (pos < list.size() && list.postings()[pos].doc == doc) {
            out.emplace_back(list.postings()[pos].impact);
        } else {
            out.emplace_back(std::nullopt);
        }
    }
    return out;
}

Impact max_impact(ImpactIndex const& index, TermId term) { return index.list(term).max_impact(); }

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        auto const c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) != 0 || c >= 0x80) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

namespace {

struct doc_terms {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> tf;  // (term, frequency)
    std::uint32_t length = 0;
};

}  // namespace

ImpactIndex build_index(std::istream& corpus, ScorerParams scorer, int quant_bits)
{
    if (quant_bits < 1 || quant_bits > 16) {
        throw std::invalid_argument("build_index: quant_bits must be in [1,16]");
    }
    if (scorer.kind == ScorerKind::precomputed) {
        throw std::invalid_argument("build_index: corpus indexing needs bm25 or qld");
    }

    std::vector<std::string> doc_names;
    std::unordered_map<std::string, std::uint32_t> doc_ids;
    std::vector<std::string> term_strings;
    std::unordered_map<std::string, std::uint32_t> term_ids;
    std::vector<std::unordered_map<std::uint32_t, std::uint32_t>> doc_tf;
    std::vector<std::uint32_t> doc_len;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(corpus, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw parse_error("corpus: missing tab separator", line_no);
        }
        std::string name = line.substr(0, tab);
        auto [it, inserted] = doc_ids.emplace(name, static_cast<std::uint32_t>(doc_names.size()));
        if (inserted) {
            doc_names.push_back(std::move(name));
            doc_tf.emplace_back();
            doc_len.push_back(0);
        }
        auto const doc = it->second;
        for (auto& token : tokenize(std::string_view(line).substr(tab + 1))) {
            auto [tit, tnew] = term_ids.emplace(token, static_cast<std::uint32_t>(term_strings.size()));
            if (tnew) {
                term_strings.push_back(std::move(token));
            }
            ++doc_tf[doc][tit->second];
            ++doc_len[doc];
        }
    }
    if (doc_names.empty()) {
        throw format_error("corpus: no documents");
    }

    std::size_t const n_docs = doc_names.size();
    std::size_t const n_terms = term_strings.size();
    std::vector<std::uint32_t> df(n_terms, 0);
    std::vector<std::uint64_t> cf(n_terms, 0);
    std::uint64_t collection_len = 0;
    std::vector<doc_terms> docs(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
        docs[d].length = doc_len[d];
        collection_len += doc_len[d];
        docs[d].tf.assign(doc_tf[d].begin(), doc_tf[d].end());
        std::sort(docs[d].tf.begin(), docs[d].tf.end());
        for (auto [t, f] : docs[d].tf) {
            ++df[t];
            cf[t] += f;
        }
    }
    doc_tf.clear();
    double const avg_len = n_docs > 0 ? static_cast<double>(collection_len) / static_cast<double>(n_docs) : 0.0;

    auto raw_score = [&](std::uint32_t term, std::uint32_t tf, std::uint32_t len) {
        if (scorer.kind == ScorerKind::bm25) {
            return scoring::bm25(tf, df[term], n_docs, len, avg_len, scorer.k1, scorer.b);
        }
        return scoring::qld(tf, cf[term], collection_len, len, scorer.mu);
    };

    double global_max = 0.0;
    for (auto const& doc : docs) {
        for (auto [t, f] : doc.tf) {
            global_max = std::max(global_max, raw_score(t, f, doc.length));
        }
    }
    if (!(global_max > 0.0)) {
        throw format_error("corpus: no positive term scores");
    }

    double const levels = static_cast<double>((1U << static_cast<unsigned>(quant_bits)) - 1U);
    std::vector<std::vector<Posting>> postings(n_terms);
    for (std::size_t d = 0; d < n_docs; ++d) {
        for (auto [t, f] : docs[d].tf) {
            double const raw = raw_score(t, f, docs[d].length);
            if (!(raw > 0.0)) {
                continue;
            }
            auto const q = std::max(1.0, std::floor(raw / global_max * levels));
            postings[t].push_back({DocId(static_cast<std::uint32_t>(d)), static_cast<Impact>(q)});
        }
    }

    std::vector<std::string> kept_terms;
    std::vector<PostingList> lists;
    for (std::size_t t = 0; t < n_terms; ++t) {
        if (postings[t].empty()) {
            continue;
        }
        TermId id(static_cast<std::uint32_t>(lists.size()));
        kept_terms.push_back(std::move(term_strings[t]));
        lists.emplace_back(id, std::move(postings[t]));
    }
    return ImpactIndex(std::move(kept_terms),
                       std::move(lists),
                       std::move(doc_names),
                       QuantizationMeta{scorer, quant_bits, global_max});
}

ImpactIndex build_index(std::string const& corpus_path, ScorerParams scorer, int quant_bits)
{
    std::ifstream in(corpus_path);
    if (!in) {
        throw io_error("cannot open corpus '" + corpus_path + "'");
    }
    return build_index(in, scorer, quant_bits);
}

namespace {

template <typename T>
bool parse_uint(std::string_view s, T& out)
{
    if (s.empty()) {
        return false;
    }
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

ImpactIndex load_precomputed(std::istream& in)
{
    std::vector<std::string> terms;
    std::unordered_map<std::string, std::size_t> seen;
    std::vector<PostingList> lists;
    std::uint64_t declared_docs = 0;
    std::uint64_t max_doc_plus_one = 0;
    Impact max_seen = 0;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw parse_error("impacts: missing tab separator", line_no);
        }
        std::string_view head(line.data(), tab);
        std::string_view rest = std::string_view(line).substr(tab + 1);
        if (head == "#document_count") {
            if (!parse_uint(rest, declared_docs) || declared_docs > UINT32_MAX) {
                throw parse_error("impacts: bad document count", line_no);
            }
            continue;
        }
        if (!head.empty() && head.front() == '#') {
            continue;
        }
        if (head.empty()) {
            throw parse_error("impacts: empty term", line_no);
        }
        if (!seen.emplace(std::string(head), terms.size()).second) {
            throw parse_error("impacts: duplicate term '" + std::string(head) + "'", line_no);
        }
        std::vector<Posting> postings;
        std::istringstream fields{std::string(rest)};
        std::string field;
        while (fields >> field) {
            auto colon = field.find(':');
            std::uint64_t doc = 0;
            std::uint64_t impact = 0;
            if (colon == std::string::npos || !parse_uint(std::string_view(field).substr(0, colon), doc)
                || !parse_uint(std::string_view(field).substr(colon + 1), impact)) {
                throw parse_error("impacts: malformed posting '" + field + "'", line_no);
            }
            if (impact == 0 || impact > max_impact_value) {
                throw parse_error("impacts: impact out of range [1,65535]", line_no);
            }
            if (doc >= UINT32_MAX) {
                throw parse_error("impacts: docid out of range", line_no);
            }
            if (!postings.empty() && postings.back().doc.value >= doc) {
                throw parse_error("impacts: docids not strictly ascending", line_no);
            }
            postings.push_back({DocId(static_cast<std::uint32_t>(doc)), static_cast<Impact>(impact)});
            max_doc_plus_one = std::max(max_doc_plus_one, doc + 1);
            max_seen = std::max(max_seen, static_cast<Impact>(impact));
        }
        if (postings.empty()) {
            throw parse_error("impacts: term without postings", line_no);
        }
        TermId id(static_cast<std::uint32_t>(lists.size()));
        terms.emplace_back(head);
        lists.emplace_back(id, std::move(postings));
    }
    if (declared_docs != 0 && declared_docs < max_doc_plus_one) {
        throw format_error("impacts: docid beyond declared document count");
    }
    auto const n_docs = std::max(declared_docs, max_doc_plus_one);
    if (n_docs == 0) {
        throw format_error("impacts: no documents");
    }
    std::vector<std::string> names;
    names.reserve(n_docs);
    for (std::uint64_t d = 0; d < n_docs; ++d) {
        names.push_back(std::to_string(d));
    }
    int const bits = std::max(1, static_cast<int>(std::bit_width(static_cast<unsigned>(max_seen))));
    return ImpactIndex(std::move(terms),
                       std::move(lists),
                       std::move(names),
                       QuantizationMeta{ScorerParams::make_precomputed(), bits, 0.0});
}

ImpactIndex load_precomputed(std::string const& path)
{
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open impacts file '" + path + "'");
    }
    return load_precomputed(in);
}

void write_impacts(ImpactIndex const& index, std::ostream& out)
{
    out << "#document_count\t" << index.document_count() << '\n';
    for (std::size_t t = 0; t < index.term_count(); ++t) {
        TermId id(static_cast<std::uint32_t>(t));
        out << index.term_string(id) << '\t';
        bool first = true;
        for (auto const& p : index.list(id).postings()) {
            if (!first) {
                out << ' ';
            }
            first = false;
            out << p.doc.value << ':' << p.impact;
        }
        out << '\n';
    }
}

bool sample_includes(DocId doc, double rate, std::uint64_t seed) noexcept
{
    if (rate >= 1.0) {
        return true;
    }
    // Top 53 bits as a uniform double in [0,1).
    double const u = static_cast<double>(hash64(seed, doc.value) >> 11U) * 0x1p-53;
    return u < rate;
}

ImpactIndex sample_index(ImpactIndex const& index, double rate, std::uint64_t seed)
{
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw std::invalid_argument("sample_index: rate must be in (0,1]");
    }
    constexpr auto dropped = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> remap(index.document_count(), dropped);
    std::vector<std::string> names;
    for (std::size_t d = 0; d < index.document_count(); ++d) {
        DocId doc(static_cast<std::uint32_t>(d));
        if (sample_includes(doc, rate, seed)) {
            remap[d] = static_cast<std::uint32_t>(names.size());
            names.push_back(index.doc_name(doc));
        }
    }
    if (names.empty()) {
        throw std::invalid_argument("sample_index: sample is empty");
    }
    std::vector<std::string> terms;
    std::vector<PostingList> lists;
    for (std::size_t t = 0; t < index.term_count(); ++t) {
        TermId id(static_cast<std::uint32_t>(t));
        std::vector<Posting> kept;
        for (auto const& p : index.list(id).postings()) {
            if (remap[p.doc.value] != dropped) {
                kept.push_back({DocId(remap[p.doc.value]), p.impact});
            }
        }
        if (kept.empty()) {
            continue;
        }
        terms.push_back(index.term_string(id));
        lists.emplace_back(TermId(static_cast<std::uint32_t>(lists.size())), std::move(kept));
    }
    return ImpactIndex(std::move(terms), std::move(lists), std::move(names), index.quantization());
}

std::vector<std::uint8_t> serialize_index(ImpactIndex const& index)
{
    detail::byte_writer w;
    w.bytes(std::string_view(index_magic, 4));
    w.u8(index_version);
    auto const& q = index.quantization();
    w.u8(static_cast<std::uint8_t>(q.scorer.kind));
    w.u8(static_cast<std::uint8_t>(q.bits));
    w.f64(q.scorer.k1);
    w.f64(q.scorer.b);
    w.f64(q.scorer.mu);
    w.f64(q.global_max_raw_score);
    w.u32(static_cast<std::uint32_t>(index.document_count()));
    w.u32(static_cast<std::uint32_t>(index.term_count()));
    w.u64(index.total_postings());
    for (auto const& name : index.doc_names()) {
        w.str32(name);
    }
    std::uint64_t offset = 0;
    for (std::size_t t = 0; t < index.term_count(); ++t) {
        TermId id(static_cast<std::uint32_t>(t));
        w.str32(index.term_string(id));
        w.u64(offset);
        w.u32(static_cast<std::uint32_t>(index.list(id).size()));
        offset += index.list(id).size();
    }
    for (std::size_t t = 0; t < index.term_count(); ++t) {
        for (auto const& p : index.list(TermId(static_cast<std::uint32_t>(t))).postings()) {
            w.u32(p.doc.value);
            w.u16(p.impact);
        }
    }
    w.u64(fnv1a64(w.buffer()));
    return w.release();
}

ImpactIndex deserialize_index(std::span<std::uint8_t const> bytes)
{
    if (bytes.size() < 13 || !std::equal(index_magic, index_magic + 4, bytes.begin())) {
        throw format_error("index: bad magic (not a TKIX file)");
    }
    if (bytes[4] != index_version) {
        throw format_error("index: unsupported version " + std::to_string(bytes[4]));
    }
    auto body = bytes.first(bytes.size() - 8);
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body.size(), 8);
    if (stored != fnv1a64(body)) {
        throw format_error("index: checksum mismatch");
    }

    detail::byte_reader r(body, "index");
    (void)r.bytes(5);
    QuantizationMeta q;
    auto const kind = r.u8();
    if (kind > static_cast<std::uint8_t>(ScorerKind::precomputed)) {
        throw format_error("index: unknown scorer kind");
    }
    q.scorer.kind = static_cast<ScorerKind>(kind);
    q.bits = r.u8();
    q.scorer.k1 = r.f64();
    q.scorer.b = r.f64();
    q.scorer.mu = r.f64();
    q.global_max_raw_score = r.f64();
    auto const n_docs = r.u32();
    auto const n_terms = r.u32();
    auto const n_postings = r.u64();

    std::vector<std::string> names;
    names.reserve(std::min<std::size_t>(n_docs, r.remaining() / 4));
    for (std::uint32_t d = 0; d < n_docs; ++d) {
        names.push_back(r.str32());
    }
    std::vector<std::string> terms;
    std::vector<std::uint32_t> lengths;
    std::uint64_t expected = 0;
    for (std::uint32_t t = 0; t < n_terms; ++t) {
        terms.push_back(r.str32());
        if (r.u64() != expected) {
            throw format_error("index: list offsets not contiguous");
        }
        lengths.push_back(r.u32());
        expected += lengths.back();
    }
    if (expected != n_postings) {
        throw format_error("index: posting count mismatch");
    }
    r.need(n_postings * 6);
    std::vector<PostingList> lists;
    lists.reserve(n_terms);
    for (std::uint32_t t = 0; t < n_terms; ++t) {
        std::vector<Posting> postings(lengths[t]);
        for (auto& p : postings) {
            p.doc = DocId(r.u32());
            p.impact = r.u16();
        }
        lists.emplace_back(TermId(t), std::move(postings));
    }
    if (r.remaining() != 0) {
        throw format_error("index: trailing bytes");
    }
    return ImpactIndex(std::move(terms), std::move(lists), std::move(names), q);
}

void save_index(ImpactIndex const& index, std::string const& path)
{
    detail::write_file_bytes(path, serialize_index(index));
}

ImpactIndex load_index(std::string const& path) { return deserialize_index(detail::read_file_bytes(path)); }

namespace detail {

std::vector<std::uint8_t> read_file_bytes(std::string const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open '" + path + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(std::string const& path, std::span<std::uint8_t const> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw io_error("cannot write '" + path + "'");
    }
    out.write(reinterpret_cast<char const*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw io_error("write failed for '" + path + "'");
    }
}

}  // namespace detail

}  // namespace tkest
