#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tkest/types.hpp"

namespace tkest {

constexpr std::uint8_t index_format_version = 1;

struct Posting {
    DocId doc;
    Impact impact = 0;

    friend bool operator==(Posting const&, Posting const&) = default;
};

/// Document-ordered postings of one term.
///
/// Construction validates that docIDs are strictly ascending and impacts are
/// non-zero, so every list reachable through an ImpactIndex satisfies both.
class PostingList {
  public:
    PostingList() = default;
    PostingList(TermId term, std::vector<Posting> postings);

    [[nodiscard]] TermId term() const noexcept { return m_term; }
    [[nodiscard]] std::span<Posting const> postings() const noexcept { return m_postings; }
    [[nodiscard]] std::size_t size() const noexcept { return m_postings.size(); }
    [[nodiscard]] bool empty() const noexcept { return m_postings.empty(); }
    [[nodiscard]] Impact max_impact() const noexcept { return m_max_impact; }

    /// Position of the first posting with doc >= `doc`, searching from `from`.
    /// Gallops forward, so ascending probe sequences cost O(log gap) each.
    [[nodiscard]] std::size_t next_geq(DocId doc, std::size_t from = 0) const noexcept;

    friend bool operator==(PostingList const&, PostingList const&) = default;

  private:
    TermId m_term;
    std::vector<Posting> m_postings;
    Impact m_max_impact = 0;
};

enum class ScorerKind : std::uint8_t { bm25 = 0, qld = 1, precomputed = 2 };

struct ScorerParams {
    ScorerKind kind = ScorerKind::bm25;
    double k1 = 0.9;
    double b = 0.4;
    double mu = 1000.0;

    static ScorerParams make_bm25(double k1 = 0.9, double b = 0.4) { return {ScorerKind::bm25, k1, b, 0.0}; }
    static ScorerParams make_qld(double mu = 1000.0) { return {ScorerKind::qld, 0.0, 0.0, mu}; }
    static ScorerParams make_precomputed() { return {ScorerKind::precomputed, 0.0, 0.0, 0.0}; }

    friend bool operator==(ScorerParams const&, ScorerParams const&) = default;
};

[[nodiscard]] std::string_view to_string(ScorerKind kind);

struct QuantizationMeta {
    ScorerParams scorer;
    int bits = 8;
    double global_max_raw_score = 0.0;

    friend bool operator==(QuantizationMeta const&, QuantizationMeta const&) = default;
};

/// Immutable quantized impact index. Safe to share across threads once built.
class ImpactIndex {
  public:
    ImpactIndex() = default;
    ImpactIndex(std::vector<std::string> terms,
                std::vector<PostingList> lists,
                std::vector<std::string> doc_names,
                QuantizationMeta quantization);

    [[nodiscard]] std::size_t term_count() const noexcept { return m_lists.size(); }
    [[nodiscard]] std::size_t document_count() const noexcept { return m_doc_names.size(); }
    [[nodiscard]] std::size_t total_postings() const noexcept { return m_total_postings; }

    [[nodiscard]] std::optional<TermId> find_term(std::string_view term) const;
    [[nodiscard]] std::string const& term_string(TermId term) const { return m_terms.at(term.value); }
    [[nodiscard]] PostingList const& list(TermId term) const { return m_lists.at(term.value); }
    [[nodiscard]] std::string const& doc_name(DocId doc) const { return m_doc_names.at(doc.value); }
    [[nodiscard]] std::span<std::string const> terms() const noexcept { return m_terms; }
    [[nodiscard]] std::span<std::string const> doc_names() const noexcept { return m_doc_names; }
    [[nodiscard]] QuantizationMeta const& quantization() const noexcept { return m_quantization; }

    /// 64-bit hash of (document count, term count, total postings, quantization).
    [[nodiscard]] std::uint64_t fingerprint() const noexcept;

    /// Re-checks every structural invariant; throws format_error on violation.
    void validate() const;

    friend bool operator==(ImpactIndex const& a, ImpactIndex const& b);

  private:
    std::vector<std::string> m_terms;
    std::unordered_map<std::string, TermId> m_dictionary;
    std::vector<PostingList> m_lists;
    std::vector<std::string> m_doc_names;
    QuantizationMeta m_quantization;
    std::size_t m_total_postings = 0;
};

/// Same dictionary, document count and postings; names and metadata ignored.
[[nodiscard]] bool same_postings(ImpactIndex const& a, ImpactIndex const& b);

[[nodiscard]] std::optional<Impact> lookup(ImpactIndex const& index, TermId term, DocId doc);

/// Element-wise `lookup` for strictly ascending `docs`, in one forward pass.
/// Throws std::invalid_argument if `docs` is not strictly ascending.
[[nodiscard]] std::vector<std::optional<Impact>> batch_lookup(ImpactIndex const& index,
                                                              TermId term,
                                                              std::span<DocId const> docs);

[[nodiscard]] Impact max_impact(ImpactIndex const& index, TermId term);

/// Lowercases ASCII and splits on every byte that is not an ASCII letter or
/// digit. Bytes >= 0x80 are kept inside tokens so UTF-8 words stay whole.
[[nodiscard]] std::vector<std::string> tokenize(std::string_view text);

/// Builds an index from `external_docid<TAB>text` lines.
[[nodiscard]] ImpactIndex build_index(std::istream& corpus, ScorerParams scorer, int quant_bits = 8);
[[nodiscard]] ImpactIndex build_index(std::string const& corpus_path, ScorerParams scorer, int quant_bits = 8);

/// Reads `term<TAB>docid:impact ...` lines; docids are internal ids taken
/// verbatim. An optional `#document_count<TAB>N` line fixes the document count.
[[nodiscard]] ImpactIndex load_precomputed(std::istream& in);
[[nodiscard]] ImpactIndex load_precomputed(std::string const& path);

/// Writes the impact-exchange form read by `load_precomputed`.
void write_impacts(ImpactIndex const& index, std::ostream& out);

/// True iff document `doc` survives sampling at `rate` under `seed`.
[[nodiscard]] bool sample_includes(DocId doc, double rate, std::uint64_t seed) noexcept;

/// Bernoulli document sample; survivors are renumbered densely in order and
/// terms that lose every posting are removed.
[[nodiscard]] ImpactIndex sample_index(ImpactIndex const& index, double rate, std::uint64_t seed);

[[nodiscard]] std::vector<std::uint8_t> serialize_index(ImpactIndex const& index);
[[nodiscard]] ImpactIndex deserialize_index(std::span<std::uint8_t const> bytes);
void save_index(ImpactIndex const& index, std::string const& path);
[[nodiscard]] ImpactIndex load_index(std::string const& path);

}  // namespace tkest
