#pragma once

// Checkpoint container: magic "RACT", version u32, then repeated records of
// (name length u32, UTF-8 name, dtype u8, rank u32, dims u64 x rank, raw
// little-endian values). Optimizer state lives under the "opt/" name prefix.

#include "radiant/adam.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace radiant {

struct CheckpointRecord {
  uint8_t dtype = 0;  // 0 = f32, 1 = f64
  Shape dims;
  std::vector<double> data;  // widened on load, narrowed on use
};

using Checkpoint = std::map<std::string, CheckpointRecord>;

namespace detail {

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace detail

inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write("RACT", 4);
  detail::write_pod<uint32_t>(os, kCheckpointVersion);
  for (const auto& [name, rec] : ckpt) {
    detail::write_pod<uint32_t>(os, uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    detail::write_pod<uint8_t>(os, rec.dtype);
    detail::write_pod<uint32_t>(os, uint32_t(rec.dims.size()));
    for (auto d : rec.dims) detail::write_pod<uint64_t>(os, uint64_t(d));
    if (rec.dtype == 0) {
      for (double v : rec.data) detail::write_pod<float>(os, float(v));
    } else {
      for (double v : rec.data) detail::write_pod<double>(os, v);
    }
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "RACT", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = detail::read_pod<uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ckpt;
  while (is.peek() != EOF) {
    uint32_t len = detail::read_pod<uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    CheckpointRecord rec;
    rec.dtype = detail::read_pod<uint8_t>(is);
    uint32_t rank = detail::read_pod<uint32_t>(is);
    Eigen::Index n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      rec.dims.push_back(Eigen::Index(detail::read_pod<uint64_t>(is)));
      n *= rec.dims.back();
    }
    rec.data.resize(size_t(n));
    for (Eigen::Index i = 0; i < n; ++i)
      rec.data[size_t(i)] = rec.dtype == 0 ? double(detail::read_pod<float>(is))
                                           : detail::read_pod<double>(is);
    ckpt[name] = std::move(rec);
  }
  return ckpt;
}

template <class S>
Checkpoint snapshot_params(const ParamStore<S>& ps, Adam<S>* opt = nullptr) {
  Checkpoint ckpt;
  uint8_t dtype = std::is_same_v<S, double> ? 1 : 0;
  auto put = [&](const std::string& name, const Shape& dims, const ArrayX<S>& v) {
    CheckpointRecord rec;
    rec.dtype = dtype;
    rec.dims = dims;
    rec.data.assign(v.data(), v.data() + v.size());
    ckpt[name] = std::move(rec);
  };
  for (const auto& p : ps.all()) put(p.name(), p.shape(), p.value());
  if (opt) {
    for (size_t i = 0; i < opt->params().size(); ++i) {
      const auto& p = opt->params()[i];
      put("opt/m1/" + p.name(), p.shape(), opt->moment1(i));
      put("opt/m2/" + p.name(), p.shape(), opt->moment2(i));
    }
    CheckpointRecord step;
    step.dtype = dtype;
    step.dims = {1};
    step.data = {double(opt->step_count())};
    ckpt["opt/step"] = std::move(step);
  }
  return ckpt;
}

template <class S>
void restore_params(const Checkpoint& ckpt, ParamStore<S>& ps, Adam<S>* opt = nullptr) {
  for (auto& p : const_cast<std::vector<Tensor<S>>&>(ps.all())) {
    auto it = ckpt.find(p.name());
    if (it == ckpt.end()) throw std::runtime_error("checkpoint: missing parameter " + p.name());
    if (Eigen::Index(it->second.data.size()) != p.numel())
      throw std::runtime_error("checkpoint: size mismatch for " + p.name());
    for (Eigen::Index i = 0; i < p.numel(); ++i) p.value()[i] = S(it->second.data[size_t(i)]);
  }
  if (opt) {
    for (size_t i = 0; i < opt->params().size(); ++i) {
      const auto& p = opt->params()[i];
      auto m1 = ckpt.find("opt/m1/" + p.name());
      auto m2 = ckpt.find("opt/m2/" + p.name());
      if (m1 == ckpt.end() || m2 == ckpt.end()) continue;
      for (Eigen::Index j = 0; j < p.numel(); ++j) {
        opt->moment1(i)[j] = S(m1->second.data[size_t(j)]);
        opt->moment2(i)[j] = S(m2->second.data[size_t(j)]);
      }
    }
    auto st = ckpt.find("opt/step");
    if (st != ckpt.end()) opt->set_step(int64_t(st->second.data[0]));
  }
}

}  // namespace radiant
