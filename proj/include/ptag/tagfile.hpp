#pragma once

#include <cstdint>
#include <filesystem>

#include "ptag/types.hpp"

namespace ptag {

/// Binary tag-file layout, little-endian throughout:
///   offset 0   "PTAG"            magic
///   offset 4   u16 version       currently 1
///   offset 6   u32 resolution_ps
///   offset 10  u64 record_count
///   offset 18  u64 duration_ps
///   offset 26  records, 10 bytes each: u64 time_ps, u8 channel, u8 reserved
/// Records are sorted by time; reserved bytes are zero.
inline constexpr std::uint16_t kTagfileVersion = 1;
inline constexpr std::size_t kTagfileHeaderSize = 26;
inline constexpr std::size_t kTagfileRecordSize = 10;

/// Writes a stream; throws std::runtime_error on I/O failure and
/// std::invalid_argument if the stream violates its own invariants.
void write_tagfile(const std::filesystem::path& path, const TagStream& s);

/// Reads and fully validates a tag file: magic, version, exact size vs the
/// declared record count, sorted times within the declared duration, known
/// channels, zero reserved bytes, resolution-aligned timestamps.
TagStream read_tagfile(const std::filesystem::path& path);

}  // namespace ptag
