#pragma once

// Little-endian byte encoding shared by the logit, dense and index formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridrank/error.hpp"

namespace hybridrank::detail {

class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { buf_.append(s); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }

    [[nodiscard]] const std::string& data() const noexcept { return buf_; }
    [[nodiscard]] std::string take() noexcept { return std::move(buf_); }

  private:
    std::string buf_;
};

class ByteReader {
  public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }
    [[nodiscard]] bool done() const noexcept { return pos_ == data_.size(); }

    std::string_view bytes(std::size_t n) {
        need(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
    std::uint32_t u32() {
        auto b = bytes(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    std::uint64_t u64() {
        auto b = bytes(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(b[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        return std::string(bytes(n));
    }

  private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            throw TruncatedError(what_ + ": truncated at byte " + std::to_string(pos_) + " (needed " +
                                 std::to_string(n) + ", have " + std::to_string(remaining()) + ")");
        }
    }

    std::string_view data_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace hybridrank::detail
