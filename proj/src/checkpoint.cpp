// SPDX-License-Identifier: Apache-2.0

#include "qfw/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <stdexcept>

namespace qfw {

namespace {

constexpr char kMagic[8] = {'Q', 'F', 'W', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_vector(std::ostream& os, const RVector& v) {
  put<std::uint64_t>(os, std::uint64_t(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size()) * 8);
}

RVector get_vector(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  const Eigen::Index size = Eigen::Index(n);
  RVector v(size);
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(n) * 8);
  if (!is) throw std::runtime_error("checkpoint: truncated parameter blob");
  return v;
}

void write_common(std::ostream& os, int kind, const std::vector<int>& arch, std::uint64_t scenario_hash,
                  long epoch, const RVector& params, const net::AdamState& adam) {
  os.write(kMagic, 8);
  put<std::uint32_t>(os, 1);  // schema version
  put<std::uint32_t>(os, std::uint32_t(kind));
  put<std::uint32_t>(os, std::uint32_t(arch.size()));
  for (int a : arch) put<std::int32_t>(os, a);
  put<std::uint64_t>(os, scenario_hash);
  put<std::int64_t>(os, epoch);
  put_vector(os, params);
  put<std::uint8_t>(os, adam.m.size() > 0 ? 1 : 0);
  if (adam.m.size() > 0) {
    put_vector(os, adam.m);
    put_vector(os, adam.v);
    put<double>(os, adam.eta);
    put<double>(os, adam.beta1);
    put<double>(os, adam.beta2);
    put<std::uint8_t>(os, adam.bias_correction ? 1 : 0);
    put<std::int64_t>(os, adam.step);
  }
}

void atomic_save(const std::string& path, const std::function<void(std::ostream&)>& writer) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp);
    writer(os);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("checkpoint: rename failed for " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const net::Mlp& net, const net::AdamState& adam,
                     std::uint64_t scenario_hash, long epoch) {
  atomic_save(path, [&](std::ostream& os) {
    write_common(os, 0, net.sizes(), scenario_hash, epoch, net.params(), adam);
  });
}

void save_checkpoint(const std::string& path, const net::Lstm& net, const net::AdamState& adam,
                     std::uint64_t scenario_hash, long epoch) {
  atomic_save(path, [&](std::ostream& os) {
    write_common(os, 1, net.arch(), scenario_hash, epoch, net.params(), adam);
  });
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto version = get<std::uint32_t>(is);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported schema version");
  const auto kind = get<std::uint32_t>(is);
  const auto arch_len = get<std::uint32_t>(is);
  std::vector<int> arch(arch_len);
  for (auto& a : arch) a = get<std::int32_t>(is);
  LoadedCheckpoint out;
  out.meta.kind = kind == 0 ? "mlp" : "lstm";
  out.meta.arch = arch;
  out.meta.scenario_hash = get<std::uint64_t>(is);
  out.meta.epoch = long(get<std::int64_t>(is));
  RVector params = get_vector(is);
  const auto has_adam = get<std::uint8_t>(is);
  if (has_adam) {
    out.adam.m = get_vector(is);
    out.adam.v = get_vector(is);
    out.adam.eta = get<double>(is);
    out.adam.beta1 = get<double>(is);
    out.adam.beta2 = get<double>(is);
    out.adam.bias_correction = get<std::uint8_t>(is) != 0;
    out.adam.step = long(get<std::int64_t>(is));
  }
  if (kind == 0) {
    out.mlp = net::Mlp(arch);
    if (out.mlp.param_count() != params.size())
      throw std::runtime_error("checkpoint: parameter count does not match architecture");
    out.mlp.params() = params;
  } else if (kind == 1) {
    if (arch.size() != 4 || arch[1] != arch[2])
      throw std::runtime_error("checkpoint: malformed recurrent architecture");
    out.lstm = net::Lstm(arch[0], arch[1], arch[3]);
    if (out.lstm.param_count() != params.size())
      throw std::runtime_error("checkpoint: parameter count does not match architecture");
    out.lstm.params() = params;
  } else {
    throw std::runtime_error("checkpoint: unknown network kind");
  }
  return out;
}

CheckpointMeta peek_checkpoint(const std::string& path) { return load_checkpoint(path).meta; }

void serialize_superoperator(const Matrix& superop, std::ostream& os) {
  put<std::uint64_t>(os, std::uint64_t(superop.rows()));
  put<std::uint64_t>(os, std::uint64_t(superop.cols()));
  for (Eigen::Index r = 0; r < superop.rows(); ++r)
    for (Eigen::Index c = 0; c < superop.cols(); ++c) {
      put<double>(os, superop(r, c).real());
      put<double>(os, superop(r, c).imag());
    }
}

Matrix deserialize_superoperator(std::istream& is) {
  const Eigen::Index rows = Eigen::Index(get<std::uint64_t>(is));
  const Eigen::Index cols = Eigen::Index(get<std::uint64_t>(is));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double re = get<double>(is);
      const double im = get<double>(is);
      m(r, c) = Complex(re, im);
    }
  return m;
}

}  // namespace qfw
