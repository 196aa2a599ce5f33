#include "neuroflag/model/checkpoint.hpp"

#include <cstring>

#include "neuroflag/binary_io.hpp"
#include "neuroflag/error.hpp"

namespace neuroflag::model {

namespace {

constexpr const char* kMomentPrefix[2] = {"adam.m/", "adam.v/"};

struct Entry {
  std::string name;
  tensor::Shape shape;
  std::uint64_t offset = 0;
};

void put_config(io::ByteWriter& w, const ModelConfig& c) {
  for (std::size_t v : {c.grid_rows, c.grid_cols, c.coords, c.history_len, c.projection_dim, c.num_heads,
                        c.num_layers, c.mlp_expansion}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.f64(c.dropout_rate);
  w.f64(c.layer_norm_eps);
}

ModelConfig get_config(io::ByteReader& r) {
  ModelConfig c;
  for (std::size_t* v : {&c.grid_rows, &c.grid_cols, &c.coords, &c.history_len, &c.projection_dim, &c.num_heads,
                         &c.num_layers, &c.mlp_expansion}) {
    *v = r.u32();
  }
  c.dropout_rate = r.f64();
  c.layer_norm_eps = r.f64();
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const auto& params = ckpt.params;
  const bool has_opt = !ckpt.optimizer.empty();
  if (has_opt && (ckpt.optimizer.m.size() != params.size() || ckpt.optimizer.v.size() != params.size())) {
    throw UsageError("checkpoint: optimizer state does not match the parameter list");
  }

  std::vector<Entry> entries;
  std::vector<std::span<const float>> chunks;
  std::uint64_t offset = 0;
  const auto push = [&](std::string name, const tensor::Shape& shape, std::span<const float> values) {
    if (values.size() != tensor::shape_numel(shape)) throw UsageError("checkpoint: buffer size mismatch for " + name);
    entries.push_back(Entry{std::move(name), shape, offset});
    chunks.push_back(values);
    offset += values.size();
  };
  for (std::size_t i = 0; i < params.size(); ++i) push(params.names()[i], params.tensors()[i].shape(), params.tensors()[i].data());
  if (has_opt) {
    for (int which = 0; which < 2; ++which) {
      const auto& moments = which == 0 ? ckpt.optimizer.m : ckpt.optimizer.v;
      for (std::size_t i = 0; i < params.size(); ++i) {
        push(kMomentPrefix[which] + params.names()[i], params.tensors()[i].shape(), moments[i]);
      }
    }
  }

  io::ByteWriter w;
  w.raw(std::string_view(kCheckpointMagic, 4));
  w.u16(kCheckpointVersion);
  w.u16(0);
  put_config(w, ckpt.config);
  w.u64(ckpt.step);
  w.u64(ckpt.train_fingerprint);
  w.str(ckpt.rng_state);
  w.u8(has_opt ? 1 : 0);
  w.zeros(7);
  w.u64(ckpt.optimizer.t);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.u64(d);
    w.u64(e.offset);
  }
  w.u64(offset);
  for (const auto& c : chunks) w.f32s(c);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("bad magic, expected NFCK", 0);
  }
  r.skip(4);
  const auto version = r.u16();
  if (version != kCheckpointVersion) throw FormatError("unsupported NFCK version " + std::to_string(version), 4);
  r.skip(2);

  Checkpoint ckpt;
  const auto config_pos = r.position();
  ckpt.config = get_config(r);
  try {
    ckpt.config.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid stored model config: ") + e.what(), config_pos);
  }
  ckpt.step = r.u64();
  ckpt.train_fingerprint = r.u64();
  ckpt.rng_state = r.str();
  const auto has_opt = r.u8();
  if (has_opt > 1) r.fail("invalid optimizer flag");
  r.skip(7);
  const auto opt_t = r.u64();

  const auto layout = parameter_layout(ckpt.config);
  const std::size_t expected_entries = layout.size() * (has_opt ? 3 : 1);
  const auto n_entries = r.u32();
  if (n_entries != expected_entries) {
    r.fail("tensor directory has " + std::to_string(n_entries) + " entries, expected " +
           std::to_string(expected_entries));
  }
  std::vector<Entry> entries(n_entries);
  std::uint64_t running = 0;
  for (std::uint32_t k = 0; k < n_entries; ++k) {
    const auto entry_pos = r.position();
    auto& e = entries[k];
    e.name = r.str();
    const auto rank = r.u32();
    if (rank > 8) r.fail("implausible tensor rank");
    e.shape.resize(rank);
    for (auto& d : e.shape) d = static_cast<std::size_t>(r.u64());
    e.offset = r.u64();
    const auto& [want_base, want_shape] = layout[k % layout.size()];
    const std::string want = k < layout.size() ? want_base : kMomentPrefix[k / layout.size() - 1] + want_base;
    if (e.name != want || e.shape != want_shape) {
      throw FormatError("tensor directory entry '" + e.name + "' " + tensor::shape_str(e.shape) + " where '" + want +
                            "' " + tensor::shape_str(want_shape) + " was expected",
                        entry_pos);
    }
    if (e.offset != running) r.fail("tensor offsets are not contiguous");
    running += tensor::shape_numel(e.shape);
  }
  const auto count_pos = r.position();
  const auto total = r.u64();
  if (total != running) throw FormatError("payload count disagrees with tensor directory", count_pos);
  if (r.remaining() != total * 4) {
    if (r.remaining() < total * 4) throw FormatError("payload truncated", bytes.size());
    throw FormatError("trailing bytes after payload", r.position() + total * 4);
  }

  for (std::size_t i = 0; i < layout.size(); ++i) {
    auto values = r.f32s(tensor::shape_numel(layout[i].second));
    ckpt.params.add(layout[i].first, tensor::Tensor::from_data(layout[i].second, std::move(values), true));
  }
  if (has_opt) {
    ckpt.optimizer.t = opt_t;
    for (auto* moments : {&ckpt.optimizer.m, &ckpt.optimizer.v}) {
      for (const auto& [name, shape] : layout) moments->push_back(r.f32s(tensor::shape_numel(shape)));
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig* expected) {
  auto ckpt = decode_checkpoint(io::read_file(path));
  if (expected != nullptr && !(ckpt.config == *expected)) {
    throw ConfigMismatchError("checkpoint " + path + " was written for config {" + ckpt.config.describe() +
                              "} but {" + expected->describe() + "} was requested");
  }
  return ckpt;
}

}  // namespace neuroflag::model
