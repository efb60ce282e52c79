// Copyright 2026 The Gradstream Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "gradstream/core.hpp"

namespace gradstream {

// Bit order is most-significant-bit first within each byte; the final byte
// is zero-padded. This ordering is part of the frame format.

class BitWriter {
 public:
  void put_bit(bool bit) {
    const std::size_t byte = static_cast<std::size_t>(bit_count_ >> 3);
    if (byte == bytes_.size()) bytes_.push_back(0);
    if (bit) bytes_[byte] |= static_cast<std::uint8_t>(0x80u >> (bit_count_ & 7));
    ++bit_count_;
  }

  // Writes the low `count` bits of value, most significant first.
  void put_bits(std::uint64_t value, unsigned count) {
    for (unsigned i = count; i > 0; --i) {
      put_bit(((value >> (i - 1)) & 1ull) != 0);
    }
  }

  // IEEE-754 binary32 bit pattern, most significant bit first.
  void put_f32(float value) { put_bits(std::bit_cast<std::uint32_t>(value), 32); }

  std::uint64_t bit_count() const { return bit_count_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bit_count_ = 0;
};

class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_count)
      : bytes_(bytes), bit_count_(bit_count) {
    if (bit_count_ > static_cast<std::uint64_t>(bytes_.size()) * 8) {
      throw DecodeError("BitReader: declared bit length exceeds buffer");
    }
  }

  bool get_bit() {
    if (pos_ >= bit_count_) throw DecodeError("BitReader: read past end of stream");
    const bool bit = (bytes_[static_cast<std::size_t>(pos_ >> 3)] >> (7 - (pos_ & 7))) & 1;
    ++pos_;
    return bit;
  }

  std::uint64_t get_bits(unsigned count) {
    std::uint64_t value = 0;
    for (unsigned i = 0; i < count; ++i) {
      value = (value << 1) | static_cast<std::uint64_t>(get_bit());
    }
    return value;
  }

  float get_f32() {
    return std::bit_cast<float>(static_cast<std::uint32_t>(get_bits(32)));
  }

  std::uint64_t remaining() const { return bit_count_ - pos_; }
  std::uint64_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t bit_count_;
  std::uint64_t pos_ = 0;
};

}  // namespace gradstream
