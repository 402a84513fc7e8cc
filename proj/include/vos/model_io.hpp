#pragma once

// Binary model file.
//
//   magic      8 bytes  "VOSMODL\0"
//   version    u32
//   d_x, d_z1, d_z2    u64 each
//   trained    u8
//   kinds      d_x x u8
//   columns    u32 count, then (u32 length, bytes) each
//   scaler     u8 present; if 1: d_x f64 means, d_x f64 stddevs, d_x u8 flags
//   networks   enc1, enc2, dec1, dec2; each: u32 layers, then per layer
//              u32 out, u32 in, u8 activation, out*in f64 (row-major), out f64 bias
//
// Integers and IEEE-754 doubles are little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vos/dataset.hpp"
#include "vos/errors.hpp"
#include "vos/vos_model.hpp"

namespace vos {

inline constexpr std::array<char, 8> kModelMagic = {'V', 'O', 'S', 'M', 'O', 'D', 'L', '\0'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

/// A model plus what is needed to map samples back to the input CSV space.
struct ModelBundle {
  VosModel model;
  std::vector<std::string> columns;
  std::optional<ScalerParams> scaler;

  friend bool operator==(const ModelBundle& a, const ModelBundle& b) {
    return a.model == b.model && a.columns == b.columns && a.scaler == b.scaler;
  }
};

namespace detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
  void uint(T v) {
    auto u = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.put(static_cast<char>(u & 0xFF));
      u >>= 8;
    }
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void str(const std::string& s) {
    uint(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  template <typename T>
  T uint() {
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) throw ConfigError("model file truncated");
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return static_cast<T>(u);
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw ConfigError("model file truncated");
  }
  std::string str() {
    const auto n = uint<std::uint32_t>();
    if (n > (1u << 20)) throw ConfigError("model file: implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::istream& in_;
};

inline void write_net(BinaryWriter& w, const DenseNet& net) {
  w.uint(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    w.uint(static_cast<std::uint32_t>(l.out_dim()));
    w.uint(static_cast<std::uint32_t>(l.in_dim()));
    w.uint(static_cast<std::uint8_t>(l.activation));
    for (double v : l.weights.data()) w.f64(v);
    for (double v : l.bias) w.f64(v);
  }
}

inline DenseNet read_net(BinaryReader& r) {
  const auto n_layers = r.uint<std::uint32_t>();
  if (n_layers == 0 || n_layers > 64) throw ConfigError("model file: invalid layer count");
  std::vector<DenseLayer> layers;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const auto out = r.uint<std::uint32_t>();
    const auto in = r.uint<std::uint32_t>();
    const auto act = r.uint<std::uint8_t>();
    if (out == 0 || in == 0 || out > 100000 || in > 100000) throw ConfigError("model file: invalid layer shape");
    if (act > static_cast<std::uint8_t>(Activation::kSigmoid)) throw ConfigError("model file: unknown activation");
    DenseLayer l;
    l.weights = Matrix(out, in);
    l.bias.resize(out);
    l.activation = static_cast<Activation>(act);
    for (double& v : l.weights.data()) v = r.f64();
    for (double& v : l.bias) v = r.f64();
    layers.push_back(std::move(l));
  }
  try {
    return DenseNet(std::move(layers));
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
}

}  // namespace detail

inline void write_model(std::ostream& out, const ModelBundle& bundle) {
  const auto& m = bundle.model;
  m.check();
  detail::BinaryWriter w(out);
  w.bytes(kModelMagic.data(), kModelMagic.size());
  w.uint(kModelFormatVersion);
  w.uint(static_cast<std::uint64_t>(m.dims.d_x));
  w.uint(static_cast<std::uint64_t>(m.dims.d_z1));
  w.uint(static_cast<std::uint64_t>(m.dims.d_z2));
  w.uint(static_cast<std::uint8_t>(m.trained ? 1 : 0));
  for (FeatureKind k : m.kinds) w.uint(static_cast<std::uint8_t>(k));
  w.uint(static_cast<std::uint32_t>(bundle.columns.size()));
  for (const auto& c : bundle.columns) w.str(c);
  w.uint(static_cast<std::uint8_t>(bundle.scaler ? 1 : 0));
  if (bundle.scaler) {
    const auto& s = *bundle.scaler;
    if (s.dims() != m.dims.d_x) throw ShapeError("write_model: scaler width does not match d_x");
    for (double v : s.mean) w.f64(v);
    for (double v : s.stddev) w.f64(v);
    for (bool b : s.scaled) w.uint(static_cast<std::uint8_t>(b ? 1 : 0));
  }
  for (const DenseNet* n : {&m.enc1, &m.enc2, &m.dec1, &m.dec2}) detail::write_net(w, *n);
}

inline ModelBundle read_model(std::istream& in) {
  detail::BinaryReader r(in);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kModelMagic) throw ConfigError("not a VOS model file (bad magic)");
  const auto version = r.uint<std::uint32_t>();
  if (version != kModelFormatVersion)
    throw ConfigError("unsupported model format version " + std::to_string(version));
  ModelBundle b;
  auto& m = b.model;
  m.dims.d_x = r.uint<std::uint64_t>();
  m.dims.d_z1 = r.uint<std::uint64_t>();
  m.dims.d_z2 = r.uint<std::uint64_t>();
  if (m.dims.d_x == 0 || m.dims.d_x > 100000 || m.dims.d_z1 == 0 || m.dims.d_z2 == 0)
    throw ConfigError("model file: invalid dimensions");
  m.trained = r.uint<std::uint8_t>() != 0;
  m.kinds.resize(m.dims.d_x);
  for (auto& k : m.kinds) {
    const auto v = r.uint<std::uint8_t>();
    if (v > 1) throw ConfigError("model file: unknown feature kind");
    k = static_cast<FeatureKind>(v);
  }
  const auto n_cols = r.uint<std::uint32_t>();
  if (n_cols != 0 && n_cols != m.dims.d_x) throw ConfigError("model file: column count does not match d_x");
  for (std::uint32_t i = 0; i < n_cols; ++i) b.columns.push_back(r.str());
  if (r.uint<std::uint8_t>() != 0) {
    ScalerParams s;
    s.mean.resize(m.dims.d_x);
    s.stddev.resize(m.dims.d_x);
    s.scaled.resize(m.dims.d_x);
    for (double& v : s.mean) v = r.f64();
    for (double& v : s.stddev) v = r.f64();
    for (std::size_t j = 0; j < m.dims.d_x; ++j) s.scaled[j] = r.uint<std::uint8_t>() != 0;
    b.scaler = std::move(s);
  }
  m.enc1 = detail::read_net(r);
  m.enc2 = detail::read_net(r);
  m.dec1 = detail::read_net(r);
  m.dec2 = detail::read_net(r);
  try {
    m.check();
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model file: ") + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ConfigError("model file: trailing bytes");
  return b;
}

inline void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
  detail::atomic_write(path, [&](std::ostream& out) { write_model(out, bundle); }, true);
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file " + path.string());
  return read_model(in);
}

}  // namespace vos
