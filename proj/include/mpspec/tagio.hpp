#pragma once

// Quantization of avalanche times to FPGA ticks and the binary time-tag
// stream format.
//
// Layout (little-endian, no padding):
//   header, 16 bytes:
//     0  char[4]  magic "TTAG"
//     4  u16      version (1)
//     6  u8       channel_count
//     7  u8       reserved (0)
//     8  u32      tick_ps
//     12 u32      reserved (0)
//   record, 9 bytes each:
//     0  u8       channel
//     1  u64      ticks
// Records are non-decreasing in ticks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mpspec/detector.hpp"
#include "mpspec/error.hpp"

namespace mpspec {

inline constexpr std::uint32_t kDefaultTickPs = 156;
inline constexpr std::size_t kHeaderBytes = 16;
inline constexpr std::size_t kRecordBytes = 9;

struct TimeTag {
  std::uint8_t channel;
  std::uint64_t ticks;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
  friend auto operator<=>(const TimeTag& a, const TimeTag& b) {
    if (auto c = a.ticks <=> b.ticks; c != 0) return c;
    return a.channel <=> b.channel;
  }
};

struct StreamHeader {
  static constexpr std::array<char, 4> kMagic{'T', 'T', 'A', 'G'};
  static constexpr std::uint16_t kVersion = 1;

  std::uint8_t channel_count = 32;
  std::uint32_t tick_ps = kDefaultTickPs;
  // Not stored on disk. Filled in by read_stream once the whole file is
  // consumed; 0 means unknown.
  std::uint64_t record_count = 0;

  friend bool operator==(const StreamHeader& a, const StreamHeader& b) {
    return a.channel_count == b.channel_count && a.tick_ps == b.tick_ps;
  }
};

inline std::uint64_t quantize(double time_ps, std::uint32_t tick_ps) {
  if (!(time_ps >= 0)) throw ContractViolation("quantize: time must be >= 0 ps");
  if (tick_ps == 0) throw ContractViolation("quantize: tick must be > 0 ps");
  return static_cast<std::uint64_t>(std::floor(time_ps / static_cast<double>(tick_ps)));
}

// Quantized tags for a time-sorted event stream. Floor quantization is
// monotone, so the output stays sorted up to channel order within a tick,
// which is restored here.
inline std::vector<TimeTag> to_time_tags(std::span<const AvalancheEvent> events,
                                         std::uint32_t tick_ps = kDefaultTickPs) {
  std::vector<TimeTag> tags;
  tags.reserve(events.size());
  for (const auto& e : events) {
    if (e.pixel > 0xFF) throw ContractViolation("to_time_tags: pixel does not fit a channel byte");
    tags.push_back({static_cast<std::uint8_t>(e.pixel), quantize(e.time_ps, tick_ps)});
  }
  std::stable_sort(tags.begin(), tags.end());
  return tags;
}

namespace detail {

inline void put_le(char* dst, std::uint64_t v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

inline std::uint64_t get_le(const char* src, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(src[i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::array<char, kHeaderBytes> encode_header(const StreamHeader& h) {
  std::array<char, kHeaderBytes> b{};
  std::memcpy(b.data(), StreamHeader::kMagic.data(), 4);
  detail::put_le(b.data() + 4, StreamHeader::kVersion, 2);
  detail::put_le(b.data() + 6, h.channel_count, 1);
  detail::put_le(b.data() + 8, h.tick_ps, 4);
  return b;
}

inline void write_stream(std::ostream& os, const StreamHeader& header, std::span<const TimeTag> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i].channel >= header.channel_count)
      throw ContractViolation("write_stream: channel " + std::to_string(tags[i].channel) +
                              " >= channel_count " + std::to_string(header.channel_count));
    if (i > 0 && tags[i].ticks < tags[i - 1].ticks)
      throw ContractViolation("write_stream: tags not sorted by ticks at record " + std::to_string(i));
  }
  const auto h = encode_header(header);
  os.write(h.data(), h.size());

  constexpr std::size_t kBatch = 4096;
  std::vector<char> buf(kBatch * kRecordBytes);
  for (std::size_t i = 0; i < tags.size(); i += kBatch) {
    const std::size_t n = std::min(kBatch, tags.size() - i);
    for (std::size_t j = 0; j < n; ++j) {
      char* rec = buf.data() + j * kRecordBytes;
      rec[0] = static_cast<char>(tags[i + j].channel);
      detail::put_le(rec + 1, tags[i + j].ticks, 8);
    }
    os.write(buf.data(), static_cast<std::streamsize>(n * kRecordBytes));
  }
}

inline std::vector<char> write_stream(const StreamHeader& header, std::span<const TimeTag> tags) {
  std::ostringstream os(std::ios::binary);
  write_stream(os, header, tags);
  const std::string s = std::move(os).str();
  return {s.begin(), s.end()};
}

// "-" writes to standard output.
inline void write_stream_file(const std::string& path, const StreamHeader& header,
                              std::span<const TimeTag> tags) {
  if (path == "-") {
    write_stream(std::cout, header, tags);
    std::cout.flush();
    if (!std::cout) throw IoError(path, "write to standard output failed");
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path, "cannot open for writing");
  write_stream(os, header, tags);
  os.flush();
  if (!os) throw IoError(path, "write failed");
}

// Sequential reader. Tags are decoded lazily in file order; ordering and
// channel range are checked as records are consumed.
class StreamReader {
 public:
  explicit StreamReader(std::istream& is) : is_(&is) { read_header(); }

  // "-" reads standard input.
  explicit StreamReader(const std::string& path) : path_(path) {
    if (path == "-") {
      is_ = &std::cin;
    } else {
      owned_ = std::make_unique<std::ifstream>(path, std::ios::binary);
      if (!*owned_) throw IoError(path, "cannot open for reading");
      is_ = owned_.get();
    }
    read_header();
  }

  const StreamHeader& header() const { return header_; }

  std::optional<TimeTag> next() {
    char rec[kRecordBytes];
    is_->read(rec, kRecordBytes);
    const auto got = static_cast<std::size_t>(is_->gcount());
    if (got == 0) {
      if (is_->bad()) throw IoError(path_, "read failed");
      header_.record_count = count_;
      return std::nullopt;
    }
    if (got < kRecordBytes)
      throw FormatError(offset_, "truncated record (" + std::to_string(got) + " of 9 bytes)");
    TimeTag t{static_cast<std::uint8_t>(rec[0]), detail::get_le(rec + 1, 8)};
    if (t.channel >= header_.channel_count)
      throw IntegrityError("record " + std::to_string(count_) + ": channel " +
                           std::to_string(t.channel) + " >= channel_count " +
                           std::to_string(header_.channel_count));
    if (count_ > 0 && t.ticks < last_ticks_)
      throw IntegrityError("record " + std::to_string(count_) + " at byte " + std::to_string(offset_) +
                           ": ticks decrease (" + std::to_string(t.ticks) + " after " +
                           std::to_string(last_ticks_) + ")");
    last_ticks_ = t.ticks;
    offset_ += kRecordBytes;
    ++count_;
    return t;
  }

  std::vector<TimeTag> read_all() {
    std::vector<TimeTag> out;
    while (auto t = next()) out.push_back(*t);
    return out;
  }

 private:
  void read_header() {
    char b[kHeaderBytes];
    is_->read(b, kHeaderBytes);
    const auto got = static_cast<std::size_t>(is_->gcount());
    if (got < kHeaderBytes)
      throw FormatError(0, "truncated header (" + std::to_string(got) + " of 16 bytes)");
    if (std::memcmp(b, StreamHeader::kMagic.data(), 4) != 0)
      throw FormatError(0, "bad magic, expected \"TTAG\"");
    const auto version = detail::get_le(b + 4, 2);
    if (version != StreamHeader::kVersion)
      throw FormatError(4, "unsupported version " + std::to_string(version));
    header_.channel_count = static_cast<std::uint8_t>(b[6]);
    header_.tick_ps = static_cast<std::uint32_t>(detail::get_le(b + 8, 4));
    if (header_.tick_ps == 0) throw FormatError(8, "tick_ps must be > 0");
    offset_ = kHeaderBytes;
  }

  std::unique_ptr<std::ifstream> owned_;
  std::istream* is_ = nullptr;
  std::string path_ = "<stream>";
  StreamHeader header_;
  std::uint64_t offset_ = 0;
  std::uint64_t count_ = 0;
  std::uint64_t last_ticks_ = 0;
};

struct TagStream {
  StreamHeader header;
  std::vector<TimeTag> tags;
};

inline TagStream read_stream(std::istream& is) {
  StreamReader r(is);
  auto tags = r.read_all();
  return {r.header(), std::move(tags)};
}

inline TagStream read_stream(std::span<const char> bytes) {
  std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
  return read_stream(is);
}

inline TagStream read_stream_file(const std::string& path) {
  StreamReader r(path);
  auto tags = r.read_all();
  return {r.header(), std::move(tags)};
}

// k-way merge ordered by (ticks, channel); ties beyond that keep input order.
inline std::vector<TimeTag> merge_streams(std::span<const std::vector<TimeTag>> streams) {
  struct Head {
    TimeTag tag;
    std::size_t stream;
    std::size_t pos;
    bool operator>(const Head& o) const {
      if (tag != o.tag) return tag > o.tag;
      if (stream != o.stream) return stream > o.stream;
      return pos > o.pos;
    }
  };
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
  std::size_t total = 0;
  for (std::size_t s = 0; s < streams.size(); ++s) {
    total += streams[s].size();
    if (!streams[s].empty()) heap.push({streams[s][0], s, 0});
  }
  std::vector<TimeTag> out;
  out.reserve(total);
  while (!heap.empty()) {
    Head h = heap.top();
    heap.pop();
    out.push_back(h.tag);
    const auto& src = streams[h.stream];
    if (h.pos + 1 < src.size()) {
      const TimeTag& nxt = src[h.pos + 1];
      if (nxt.ticks < h.tag.ticks)
        throw IntegrityError("merge_streams: input " + std::to_string(h.stream) +
                             " not sorted at record " + std::to_string(h.pos + 1));
      heap.push({nxt, h.stream, h.pos + 1});
    }
  }
  return out;
}

}  // namespace mpspec
