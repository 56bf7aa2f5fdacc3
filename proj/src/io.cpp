#include "cdnlog/io.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "cdnlog/errors.hpp"

namespace cdnlog {

namespace {
constexpr std::size_t kBufferSize = 1 << 20;
constexpr std::size_t kBlockSize = 4 << 20;
}

LineReader::LineReader(const std::filesystem::path& path) : path_(path.string()), buf_(kBufferSize) {
  gz_ = gzopen(path_.c_str(), "rb");
  if (gz_ == nullptr) throw InputError("cannot open " + path_ + ": " + std::strerror(errno));
  gzbuffer(static_cast<gzFile>(gz_), 1 << 18);
}

LineReader::~LineReader() {
  if (gz_ != nullptr) gzclose(static_cast<gzFile>(gz_));
}

bool LineReader::fill() {
  if (eof_) return false;
  int n = gzread(static_cast<gzFile>(gz_), buf_.data(), static_cast<unsigned>(buf_.size()));
  if (n < 0) {
    int err = 0;
    const char* msg = gzerror(static_cast<gzFile>(gz_), &err);
    throw InputError(path_, line_number_ + 1, std::string("read error: ") + msg);
  }
  begin_ = 0;
  end_ = static_cast<std::size_t>(n);
  if (n == 0) eof_ = true;
  return n > 0;
}

bool LineReader::next(std::string_view& line) {
  carry_.clear();
  bool have_carry = false;
  while (true) {
    if (begin_ == end_ && !fill()) {
      if (!have_carry) return false;
      break;
    }
    const char* start = buf_.data() + begin_;
    const void* nl = std::memchr(start, '\n', end_ - begin_);
    if (nl != nullptr) {
      std::size_t len = static_cast<const char*>(nl) - start;
      if (have_carry) {
        carry_.append(start, len);
        begin_ += len + 1;
        break;
      }
      begin_ += len + 1;
      line = std::string_view(start, len);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_number_;
      return true;
    }
    carry_.append(start, end_ - begin_);
    have_carry = true;
    begin_ = end_;
  }
  line = carry_;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  ++line_number_;
  return true;
}

bool LineReader::next_batch(std::vector<std::string_view>& lines) {
  lines.clear();
  // Keep the unterminated tail of the previous block.
  std::size_t keep = used_ - tail_;
  if (tail_ > 0) std::memmove(block_.data(), block_.data() + tail_, keep);
  tail_ = 0;
  while (!eof_) {
    std::size_t want = std::max<std::size_t>(kBlockSize, keep);
    if (block_.size() < keep + want) block_.resize(keep + want);
    int n = gzread(static_cast<gzFile>(gz_), block_.data() + keep, static_cast<unsigned>(want));
    if (n < 0) {
      int err = 0;
      const char* msg = gzerror(static_cast<gzFile>(gz_), &err);
      throw InputError(path_, line_number_ + 1, std::string("read error: ") + msg);
    }
    if (n == 0) eof_ = true;
    std::size_t scan_from = keep;
    keep += static_cast<std::size_t>(n);
    if (std::memchr(block_.data() + scan_from, '\n', keep - scan_from) != nullptr) break;
  }
  used_ = keep;
  const char* base = block_.data();
  std::size_t pos = 0;
  while (pos < keep) {
    const void* nl = std::memchr(base + pos, '\n', keep - pos);
    if (nl == nullptr && !eof_) break;
    std::size_t end = nl ? static_cast<std::size_t>(static_cast<const char*>(nl) - base) : keep;
    std::string_view line(base + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    ++line_number_;
    pos = end + 1;
  }
  tail_ = std::min(pos, keep);
  return !lines.empty();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  LineReader reader(path);
  std::vector<std::string> lines;
  std::string_view line;
  while (reader.next(line)) lines.emplace_back(line);
  return lines;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw InputError("cannot write " + tmp.string() + ": " + std::strerror(errno));
  const char* p = contents.data();
  std::size_t left = contents.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      int e = errno;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw InputError("write failed for " + tmp.string() + ": " + std::strerror(e));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw InputError("cannot flush " + tmp.string());
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    int e = errno;
    ::unlink(tmp.c_str());
    throw InputError("cannot rename onto " + path.string() + ": " + std::strerror(e));
  }
}

std::string csv_escape(std::string_view field) {
  if (!csv_needs_quotes(field)) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void csv_append_row(std::string& out, const std::vector<std::string_view>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out += ',';
    if (!csv_needs_quotes(fields[i])) {
      out += fields[i];
    } else {
      out += csv_escape(fields[i]);
    }
  }
  out += '\n';
}

bool csv_split(std::string_view line, std::vector<std::string>& out) {
  out.clear();
  std::string field;
  std::size_t i = 0;
  while (true) {
    field.clear();
    if (i < line.size() && line[i] == '"') {
      ++i;
      while (true) {
        if (i >= line.size()) return false;
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        field += line[i++];
      }
      if (i < line.size() && line[i] != ',') return false;
    } else {
      auto comma = line.find(',', i);
      std::size_t end = comma == std::string_view::npos ? line.size() : comma;
      field.assign(line.substr(i, end - i));
      i = end;
    }
    out.push_back(field);
    if (i >= line.size()) break;
    ++i;  // skip ','
    if (i == line.size()) {
      out.emplace_back();
      break;
    }
  }
  return true;
}

}  // namespace cdnlog
