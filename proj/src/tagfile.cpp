#include "ptag/tagfile.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptag {

namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error(path.string() + ": " + why);
}

}  // namespace

void write_tagfile(const std::filesystem::path& path, const TagStream& s) {
  const auto violations = validate_stream(s);
  if (!violations.empty())
    throw std::invalid_argument("refusing to write invalid stream: " +
                                violations.front().rule);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(path, "cannot open for writing");

  std::array<std::uint8_t, kTagfileHeaderSize> header{};
  std::memcpy(header.data(), "PTAG", 4);
  put_u16(header.data() + 4, kTagfileVersion);
  put_u32(header.data() + 6, s.resolution_ps);
  put_u64(header.data() + 10, s.tags.size());
  put_u64(header.data() + 18, s.duration_ps);
  f.write(reinterpret_cast<const char*>(header.data()), header.size());

  constexpr std::size_t kBatch = 8192;
  std::vector<std::uint8_t> buf(kBatch * kTagfileRecordSize);
  std::size_t in_buf = 0;
  for (const TimeTag& t : s.tags) {
    std::uint8_t* p = buf.data() + in_buf * kTagfileRecordSize;
    put_u64(p, t.time_ps);
    p[8] = static_cast<std::uint8_t>(t.channel);
    p[9] = 0;
    if (++in_buf == kBatch) {
      f.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(in_buf * kTagfileRecordSize));
      in_buf = 0;
    }
  }
  if (in_buf > 0)
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(in_buf * kTagfileRecordSize));
  f.flush();
  if (!f) fail(path, "write failed");
}

TagStream read_tagfile(const std::filesystem::path& path) {
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) fail(path, "cannot stat: " + ec.message());

  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open for reading");

  if (file_size < kTagfileHeaderSize) fail(path, "truncated header");
  std::array<std::uint8_t, kTagfileHeaderSize> header{};
  f.read(reinterpret_cast<char*>(header.data()), header.size());
  if (!f) fail(path, "truncated header");

  if (std::memcmp(header.data(), "PTAG", 4) != 0) fail(path, "bad magic");
  const std::uint16_t version = get_u16(header.data() + 4);
  if (version != kTagfileVersion)
    fail(path, "unsupported version " + std::to_string(version));

  TagStream s;
  s.resolution_ps = get_u32(header.data() + 6);
  const std::uint64_t count = get_u64(header.data() + 10);
  s.duration_ps = get_u64(header.data() + 18);
  if (s.resolution_ps == 0) fail(path, "zero resolution");

  const std::uint64_t expected =
      kTagfileHeaderSize + count * kTagfileRecordSize;
  if (file_size < expected) fail(path, "truncated records");
  if (file_size > expected) fail(path, "trailing bytes after records");

  s.tags.reserve(count);
  constexpr std::size_t kBatch = 8192;
  std::vector<std::uint8_t> buf(kBatch * kTagfileRecordSize);
  std::uint64_t remaining = count;
  std::uint64_t prev_time = 0;
  bool first = true;
  while (remaining > 0) {
    const std::size_t take =
        static_cast<std::size_t>(std::min<std::uint64_t>(remaining, kBatch));
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(take * kTagfileRecordSize));
    if (!f) fail(path, "truncated records");
    for (std::size_t k = 0; k < take; ++k) {
      const std::uint8_t* p = buf.data() + k * kTagfileRecordSize;
      TimeTag t;
      t.time_ps = get_u64(p);
      const std::uint8_t ch = p[8];
      if (ch > 3) fail(path, "unknown channel " + std::to_string(ch));
      if (p[9] != 0) fail(path, "nonzero reserved byte");
      t.channel = static_cast<Channel>(ch);
      if (!first && t.time_ps < prev_time) fail(path, "records not sorted by time");
      if (t.time_ps > s.duration_ps) fail(path, "record beyond declared duration");
      if (t.time_ps % s.resolution_ps != 0)
        fail(path, "timestamp off the resolution grid");
      prev_time = t.time_ps;
      first = false;
      s.tags.push_back(t);
    }
    remaining -= take;
  }
  return s;
}

}  // namespace ptag
