#include "neuroflag/dataset/dataset_file.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "neuroflag/binary_io.hpp"
#include "neuroflag/error.hpp"

namespace neuroflag::dataset {

namespace {

constexpr std::size_t kFixedHeaderBytes = 92;
constexpr std::size_t kConditionEntryBytes = 16;
constexpr std::size_t kRecordMetaBytes = 16;

std::vector<std::uint8_t> encode_prefix(const DatasetHeader& h, std::span<const WindowMeta> records) {
  io::ByteWriter w;
  w.raw(std::string_view(kDatasetMagic, 4));
  w.u16(kDatasetVersion);
  w.u16(static_cast<std::uint16_t>(h.kind));
  w.u64(h.record_count);
  w.u32(h.frames_per_record);
  w.u32(h.rows);
  w.u32(h.cols);
  w.u32(h.coords);
  for (std::size_t a = 0; a < 3; ++a) {
    w.f64(h.transform.offset[a]);
    w.f64(h.transform.scale[a]);
  }
  w.u64(h.fingerprint);
  w.u32(static_cast<std::uint32_t>(h.conditions.size()));
  for (const auto& c : h.conditions) {
    w.u8(static_cast<std::uint8_t>(c.condition));
    w.zeros(7);
    w.f64(c.strength);
  }
  for (const auto& r : records) {
    w.u8(static_cast<std::uint8_t>(r.condition));
    w.zeros(7);
    w.u64(r.source_step);
  }
  return w.take();
}

cloth::WindCondition read_condition(io::ByteReader& r) {
  const auto v = r.u8();
  if (v > static_cast<std::uint8_t>(cloth::WindCondition::none)) r.fail("unknown wind condition id " + std::to_string(v));
  return static_cast<cloth::WindCondition>(v);
}

}  // namespace

void write_dataset_file(const std::string& path, const DatasetHeader& header, std::span<const WindowMeta> records,
                        std::span<const float> payload) {
  if (records.size() != header.record_count) throw UsageError("dataset file: record metadata count mismatch");
  if (payload.size() != header.payload_floats()) throw UsageError("dataset file: payload length mismatch");
  const auto prefix = encode_prefix(header, records);

  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size_bytes()));
    } else {
      io::ByteWriter w;
      w.f32s(payload);
      out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
    }
    if (!out) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

DatasetFile read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path + " for reading");
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);

  const auto read_bytes = [&](std::vector<std::uint8_t>& buf, std::size_t n) {
    const std::size_t old = buf.size();
    buf.resize(old + n);
    in.read(reinterpret_cast<char*>(buf.data() + old), static_cast<std::streamsize>(n));
    buf.resize(old + static_cast<std::size_t>(in.gcount()));
  };

  std::vector<std::uint8_t> head;
  read_bytes(head, kFixedHeaderBytes);
  io::ByteReader r(head);
  DatasetFile file;
  auto& h = file.header;

  if (head.size() < 4 || std::memcmp(head.data(), kDatasetMagic, 4) != 0) {
    if (head.size() < 4) r.fail("file too short for NFLG magic");
    throw FormatError("bad magic, expected NFLG", 0);
  }
  r.skip(4);
  const auto version = r.u16();
  if (version != kDatasetVersion) throw FormatError("unsupported NFLG version " + std::to_string(version), 4);
  const auto kind = r.u16();
  if (kind != static_cast<std::uint16_t>(DatasetKind::frames) && kind != static_cast<std::uint16_t>(DatasetKind::windows)) {
    throw FormatError("unknown NFLG kind " + std::to_string(kind), 6);
  }
  h.kind = static_cast<DatasetKind>(kind);
  h.record_count = r.u64();
  h.frames_per_record = r.u32();
  h.rows = r.u32();
  h.cols = r.u32();
  h.coords = r.u32();
  if (h.coords != 3 || h.rows == 0 || h.cols == 0 || h.frames_per_record == 0) {
    throw FormatError("invalid NFLG shape fields", 16);
  }
  for (std::size_t a = 0; a < 3; ++a) {
    h.transform.offset[a] = r.f64();
    h.transform.scale[a] = r.f64();
  }
  h.fingerprint = r.u64();
  const auto n_conditions = r.u32();
  if (n_conditions > 3) throw FormatError("too many wind conditions", 88);

  // Condition table and per-record metadata.
  const std::uint64_t meta_bytes = n_conditions * kConditionEntryBytes + h.record_count * kRecordMetaBytes;
  if (meta_bytes > file_size - head.size()) {
    throw FormatError("file truncated in record metadata", file_size);
  }
  read_bytes(head, static_cast<std::size_t>(meta_bytes));
  io::ByteReader mr(head);
  mr.skip(kFixedHeaderBytes);
  for (std::uint32_t c = 0; c < n_conditions; ++c) {
    const auto cond = read_condition(mr);
    mr.skip(7);
    h.conditions.push_back(ConditionEntry{cond, mr.f64()});
  }
  file.records.reserve(static_cast<std::size_t>(h.record_count));
  for (std::uint64_t k = 0; k < h.record_count; ++k) {
    const auto cond = read_condition(mr);
    mr.skip(7);
    file.records.push_back(WindowMeta{cond, mr.u64()});
  }

  const std::uint64_t payload_offset = head.size();
  const std::uint64_t expected = h.payload_floats() * 4;
  const std::uint64_t available = file_size - payload_offset;
  if (available < expected) {
    throw FormatError("payload truncated: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(available),
                      file_size);
  }
  if (available > expected) throw FormatError("trailing bytes after payload", payload_offset + expected);

  file.payload.resize(static_cast<std::size_t>(h.payload_floats()));
  in.read(reinterpret_cast<char*>(file.payload.data()), static_cast<std::streamsize>(expected));
  if (static_cast<std::uint64_t>(in.gcount()) != expected) {
    throw FormatError("short read in payload", payload_offset + static_cast<std::uint64_t>(in.gcount()));
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& v : file.payload) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      v = std::bit_cast<float>((u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24));
    }
  }
  return file;
}

void save_windows(const std::string& path, const WindowSet& windows, std::uint64_t fingerprint,
                  const std::vector<ConditionEntry>& conditions, std::span<const std::size_t> indices) {
  DatasetHeader h;
  h.kind = DatasetKind::windows;
  h.frames_per_record = static_cast<std::uint32_t>(windows.history_len() + 1);
  h.rows = static_cast<std::uint32_t>(windows.rows());
  h.cols = static_cast<std::uint32_t>(windows.cols());
  h.transform = windows.transform();
  h.fingerprint = fingerprint;
  h.conditions = conditions;
  if (indices.empty()) {
    h.record_count = windows.size();
    write_dataset_file(path, h, windows.metas(), windows.payload());
    return;
  }
  const auto sub = windows.subset(indices);
  h.record_count = sub.size();
  write_dataset_file(path, h, sub.metas(), sub.payload());
}

WindowSet load_windows(const std::string& path, DatasetHeader* header) {
  auto file = read_dataset_file(path);
  if (file.header.kind != DatasetKind::windows) throw FormatError(path + " holds frames, not windows", 6);
  if (header) *header = file.header;
  const auto& h = file.header;
  return WindowSet::from_packed(h.frames_per_record - 1, h.rows, h.cols, h.transform, std::move(file.payload),
                                std::move(file.records));
}

void save_frames(const std::string& path, const FrameSequence& frames, std::uint64_t fingerprint, double strength) {
  DatasetHeader h;
  h.kind = DatasetKind::frames;
  h.record_count = frames.size();
  h.frames_per_record = 1;
  h.rows = static_cast<std::uint32_t>(frames.rows);
  h.cols = static_cast<std::uint32_t>(frames.cols);
  h.transform = NormalizationTransform::identity();
  h.fingerprint = fingerprint;
  h.conditions = {ConditionEntry{frames.condition, strength}};
  std::vector<WindowMeta> records(frames.size());
  for (std::size_t k = 0; k < records.size(); ++k) records[k] = WindowMeta{frames.condition, frames.first_step + k};
  write_dataset_file(path, h, records, frames.xyz);
}

FrameSequence load_frames(const std::string& path, DatasetHeader* header) {
  auto file = read_dataset_file(path);
  if (file.header.kind != DatasetKind::frames) throw FormatError(path + " holds windows, not frames", 6);
  if (header) *header = file.header;
  FrameSequence seq;
  seq.rows = file.header.rows;
  seq.cols = file.header.cols;
  seq.condition = file.header.conditions.empty() ? cloth::WindCondition::none : file.header.conditions.front().condition;
  seq.first_step = file.records.empty() ? 0 : file.records.front().source_step;
  seq.xyz = std::move(file.payload);
  return seq;
}

}  // namespace neuroflag::dataset
