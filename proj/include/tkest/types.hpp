#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace tkest {

/// Dense 0-based identifier wrapper. `Tag` keeps document and term ids from
/// being mixed up at call sites.
template <typename Tag>
struct strong_id {
    std::uint32_t value = 0;

    constexpr strong_id() = default;
    constexpr explicit strong_id(std::uint32_t v) : value(v) {}

    constexpr auto operator<=>(strong_id const&) const = default;
};

struct doc_tag {};
struct term_tag {};

using DocId = strong_id<doc_tag>;
using TermId = strong_id<term_tag>;

/// Quantized term impact. Stored impacts are always >= 1.
using Impact = std::uint16_t;

/// Additive document score; a sum of impacts, so always an exact integer.
using Score = std::uint64_t;

constexpr Impact max_impact_value = std::numeric_limits<Impact>::max();

/// Malformed input data (corpus lines, impact files, binary containers).
class format_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A parse failure tied to a specific input line (1-based).
class parse_error : public format_error {
  public:
    parse_error(std::string const& what, std::size_t line)
        : format_error(what + " (line " + std::to_string(line) + ")"), m_line(line)
    {}

    [[nodiscard]] std::size_t line() const noexcept { return m_line; }

  private:
    std::size_t m_line;
};

/// A store built for one index was opened against a different index.
class compatibility_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace tkest

template <typename Tag>
struct std::hash<tkest::strong_id<Tag>> {
    std::size_t operator()(tkest::strong_id<Tag> id) const noexcept
    {
        return std::hash<std::uint32_t>{}(id.value);
    }
};
