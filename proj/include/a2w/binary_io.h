// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The a2w-lab Authors
//
// Little-endian primitives shared by every binary file format in the
// project, plus small text/file helpers.

#ifndef A2W_BINARY_IO_H_
#define A2W_BINARY_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace a2w {

class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.append(raw); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  // u32 length followed by the raw bytes.
  void str(std::string_view s);

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

// Reads from an in-memory file image. Every accessor throws a format error
// naming `source` when the image is too short.
class ByteReader {
 public:
  ByteReader(std::string data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}

  void expect_magic(std::string_view magic);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();
  std::string bytes(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  const std::string& source() const { return source_; }
  void expect_end() const;

 private:
  const char* take(std::size_t n);

  std::string data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and renames, so readers never see a
// partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view text, char sep);
std::vector<std::string> split_whitespace(std::string_view text);
std::string_view trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Reads a text file into lines (LF; a trailing CR is rejected as a format
// error since all formats are LF-only). A final empty line is dropped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace a2w

#endif  // A2W_BINARY_IO_H_
