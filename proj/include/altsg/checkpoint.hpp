#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "altsg/config.hpp"
#include "altsg/data.hpp"
#include "altsg/optim.hpp"
#include "altsg/tensor.hpp"

namespace altsg {

// Versioned little-endian checkpoint: magic header, embedded resolved config
// and vocabulary, run bookkeeping, then named (dtype, shape, payload) tensor
// records. Everything needed for a bit-identical resume.

namespace ckpt_io {

constexpr char kMagic[8] = {'A', 'L', 'T', 'S', 'G', 'C', 'K', '\x01'};
constexpr std::uint32_t kVersion = 1;

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
template <class T>
void write_pod(std::ostream& os, T v) {
  write_bytes(os, &v, sizeof(T));
}
inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw DataError("checkpoint: truncated file");
}
template <class T>
T read_pod(std::istream& is) {
  T v;
  read_bytes(is, &v, sizeof(T));
  return v;
}
inline std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is);
  std::string s(n, '\0');
  if (n) read_bytes(is, s.data(), n);
  return s;
}

template <class Scalar>
void write_tensor_record(std::ostream& os, const std::string& name, const Tensor<Scalar>& t) {
  write_string(os, name);
  write_pod<std::uint8_t>(os, sizeof(Scalar));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t i = 0; i < t.rank(); ++i) write_pod<std::uint64_t>(os, t.dim(i));
  write_bytes(os, t.data(), t.size() * sizeof(Scalar));
}

template <class Scalar>
std::pair<std::string, Tensor<Scalar>> read_tensor_record(std::istream& is) {
  std::string name = read_string(is);
  const auto esize = read_pod<std::uint8_t>(is);
  if (esize != sizeof(Scalar)) throw DataError("checkpoint: element size mismatch in record " + name);
  const auto rank = read_pod<std::uint32_t>(is);
  typename Tensor<Scalar>::Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(read_pod<std::uint64_t>(is));
  Tensor<Scalar> t(shape);
  read_bytes(is, t.data(), t.size() * sizeof(Scalar));
  return {std::move(name), std::move(t)};
}

}  // namespace ckpt_io

template <class Scalar>
struct CheckpointData {
  std::uint64_t config_hash = 0;
  std::string config_text;  // canonical key=value form, enough to rebuild the run
  std::vector<std::string> vocab_tokens;
  std::uint8_t vocab_mode = 0;  // 0 char, 1 word
  std::uint32_t epochs_done = 0;
  double best_val_ppl = 0;
  std::uint32_t best_val_epoch = 0;
  RestartSchedule sched;
  std::uint64_t rng_raw = 0;
  std::map<std::string, Tensor<Scalar>> tensors;
  std::vector<std::int64_t> adam_base_t, adam_meta_t;
};

template <class Scalar>
void save_checkpoint(const std::string& path, const CheckpointData<Scalar>& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  ckpt_io::write_bytes(os, ckpt_io::kMagic, sizeof(ckpt_io::kMagic));
  ckpt_io::write_pod<std::uint32_t>(os, ckpt_io::kVersion);
  ckpt_io::write_pod<std::uint64_t>(os, d.config_hash);
  ckpt_io::write_string(os, d.config_text);
  ckpt_io::write_pod<std::uint8_t>(os, d.vocab_mode);
  ckpt_io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.vocab_tokens.size()));
  for (const auto& t : d.vocab_tokens) ckpt_io::write_string(os, t);
  ckpt_io::write_pod<std::uint32_t>(os, d.epochs_done);
  ckpt_io::write_pod<double>(os, d.best_val_ppl);
  ckpt_io::write_pod<std::uint32_t>(os, d.best_val_epoch);
  ckpt_io::write_pod<std::int64_t>(os, d.sched.e_base);
  ckpt_io::write_pod<std::int64_t>(os, d.sched.run_index);
  ckpt_io::write_pod<std::int64_t>(os, d.sched.e_cur);
  ckpt_io::write_pod<double>(os, d.sched.eta_min);
  ckpt_io::write_pod<double>(os, d.sched.eta_max);
  ckpt_io::write_pod<std::uint64_t>(os, d.rng_raw);

  ckpt_io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.adam_base_t.size()));
  for (auto t : d.adam_base_t) ckpt_io::write_pod<std::int64_t>(os, t);
  ckpt_io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.adam_meta_t.size()));
  for (auto t : d.adam_meta_t) ckpt_io::write_pod<std::int64_t>(os, t);

  ckpt_io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.tensors.size()));
  for (const auto& [name, t] : d.tensors) ckpt_io::write_tensor_record(os, name, t);
  if (!os) throw DataError("checkpoint write failed: " + path);
}

template <class Scalar>
CheckpointData<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  ckpt_io::read_bytes(is, magic, 8);
  if (std::memcmp(magic, ckpt_io::kMagic, 8) != 0) throw DataError("not a checkpoint file: " + path);
  const auto version = ckpt_io::read_pod<std::uint32_t>(is);
  if (version != ckpt_io::kVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));

  CheckpointData<Scalar> d;
  d.config_hash = ckpt_io::read_pod<std::uint64_t>(is);
  d.config_text = ckpt_io::read_string(is);
  d.vocab_mode = ckpt_io::read_pod<std::uint8_t>(is);
  const auto nvocab = ckpt_io::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nvocab; ++i) d.vocab_tokens.push_back(ckpt_io::read_string(is));
  d.epochs_done = ckpt_io::read_pod<std::uint32_t>(is);
  d.best_val_ppl = ckpt_io::read_pod<double>(is);
  d.best_val_epoch = ckpt_io::read_pod<std::uint32_t>(is);
  d.sched.e_base = ckpt_io::read_pod<std::int64_t>(is);
  d.sched.run_index = ckpt_io::read_pod<std::int64_t>(is);
  d.sched.e_cur = ckpt_io::read_pod<std::int64_t>(is);
  d.sched.eta_min = ckpt_io::read_pod<double>(is);
  d.sched.eta_max = ckpt_io::read_pod<double>(is);
  d.rng_raw = ckpt_io::read_pod<std::uint64_t>(is);

  const auto nbt = ckpt_io::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nbt; ++i) d.adam_base_t.push_back(ckpt_io::read_pod<std::int64_t>(is));
  const auto nmt = ckpt_io::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nmt; ++i) d.adam_meta_t.push_back(ckpt_io::read_pod<std::int64_t>(is));

  const auto nrec = ckpt_io::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nrec; ++i) {
    auto [name, t] = ckpt_io::read_tensor_record<Scalar>(is);
    d.tensors.emplace(std::move(name), std::move(t));
  }
  return d;
}

/// Peek at the element width of a checkpoint without loading records.
inline int checkpoint_precision(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  ckpt_io::read_bytes(is, magic, 8);
  if (std::memcmp(magic, ckpt_io::kMagic, 8) != 0) throw DataError("not a checkpoint file: " + path);
  (void)ckpt_io::read_pod<std::uint32_t>(is);
  (void)ckpt_io::read_pod<std::uint64_t>(is);
  std::string cfg = ckpt_io::read_string(is);
  ExperimentConfig c;
  // The embedded text is canonical, but paths may legitimately be empty here.
  apply_config_text(c, cfg);
  return static_cast<int>(c.precision);
}

}  // namespace altsg
