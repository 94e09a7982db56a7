#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tkest/types.hpp"

namespace tkest::detail {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

class byte_writer {
  public:
    void u8(std::uint8_t v) { m_buf.push_back(v); }
    void u16(std::uint16_t v) { put(&v, sizeof v); }
    void u32(std::uint32_t v) { put(&v, sizeof v); }
    void u64(std::uint64_t v) { put(&v, sizeof v); }
    void f64(double v) { put(&v, sizeof v); }
    void bytes(std::string_view s) { put(s.data(), s.size()); }
    void str32(std::string_view s)
    {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s);
    }

    [[nodiscard]] std::size_t size() const noexcept { return m_buf.size(); }
    [[nodiscard]] std::vector<std::uint8_t>& buffer() noexcept { return m_buf; }
    [[nodiscard]] std::vector<std::uint8_t> release() { return std::move(m_buf); }

  private:
    void put(void const* p, std::size_t n)
    {
        auto const* c = static_cast<std::uint8_t const*>(p);
        m_buf.insert(m_buf.end(), c, c + n);
    }

    std::vector<std::uint8_t> m_buf;
};

class byte_reader {
  public:
    explicit byte_reader(std::span<std::uint8_t const> data, char const* what)
        : m_data(data), m_what(what)
    {}

    std::uint8_t u8() { return get<std::uint8_t>(); }
    std::uint16_t u16() { return get<std::uint16_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return get<double>(); }

    std::string bytes(std::size_t n)
    {
        need(n);
        std::string out(reinterpret_cast<char const*>(m_data.data() + m_pos), n);
        m_pos += n;
        return out;
    }
    std::string str32() { return bytes(u32()); }

    [[nodiscard]] std::size_t position() const noexcept { return m_pos; }
    [[nodiscard]] std::size_t remaining() const noexcept { return m_data.size() - m_pos; }

    void need(std::size_t n) const
    {
        if (m_data.size() - m_pos < n) {
            throw format_error(std::string(m_what) + ": truncated file");
        }
    }

  private:
    template <typename T>
    T get()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, m_data.data() + m_pos, sizeof(T));
        m_pos += sizeof(T);
        return v;
    }

    std::span<std::uint8_t const> m_data;
    std::size_t m_pos = 0;
    char const* m_what;
};

std::vector<std::uint8_t> read_file_bytes(std::string const& path);
void write_file_bytes(std::string const& path, std::span<std::uint8_t const> bytes);

}  // namespace tkest::detail
