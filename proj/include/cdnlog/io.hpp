#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace cdnlog {

// Reads LF- or CRLF-terminated lines from a plain or gzip-compressed file.
// The trailing '\r' is stripped. Throws InputError if the file cannot be
// opened or is a corrupt gzip stream.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  // The view stays valid until the next call.
  bool next(std::string_view& line);
  // Replaces `lines` with the next run of whole lines, viewed in place. Views
  // stay valid until the next call. Do not mix with next() on one reader.
  bool next_batch(std::vector<std::string_view>& lines);
  std::size_t line_number() const { return line_number_; }
  const std::string& path() const { return path_; }

 private:
  bool fill();

  std::string path_;
  void* gz_ = nullptr;
  std::vector<char> buf_;
  std::size_t begin_ = 0;
  std::size_t end_ = 0;
  bool eof_ = false;
  std::string carry_;
  std::vector<char> block_;
  std::size_t used_ = 0;
  std::size_t tail_ = 0;
  std::size_t line_number_ = 0;
};

std::vector<std::string> read_lines(const std::filesystem::path& path);

// Writes `contents` to a sibling temporary file, flushes it, then renames it
// over `path`. Readers see either the old or the new file, never a prefix.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Minimal RFC 4180 CSV: fields are quoted only when they contain a comma,
// quote, CR or LF.
inline bool csv_needs_quotes(std::string_view field) {
  for (char c : field) {
    if (c == ',' || c == '"' || c == '\r' || c == '\n') return true;
  }
  return false;
}
std::string csv_escape(std::string_view field);
void csv_append_row(std::string& out, const std::vector<std::string_view>& fields);
// Splits one CSV line. Returns false on an unterminated quote.
bool csv_split(std::string_view line, std::vector<std::string>& out);

}  // namespace cdnlog
