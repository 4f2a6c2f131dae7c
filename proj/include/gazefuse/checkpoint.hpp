#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/parameters.hpp"

namespace gazefuse {

// Binary checkpoint layout (all integers little-endian):
//
//   8 bytes   magic "GZFCKPT\0"
//   u32       format version (1)
//   u64       header byte length, then that many bytes of "key=value\n"
//             lines sorted by key (seed, precision, hyperparameters)
//   u64       tensor count, then per tensor:
//               u32 name length, name bytes (UTF-8)
//               u32 rank, rank x u64 dims
//               product(dims) x IEEE-754 binary64 values, row-major
//
// Values are stored as raw bit patterns, so save -> load is bit-exact.

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  static constexpr char kMagic[8] = {'G', 'Z', 'F', 'C', 'K', 'P', 'T', '\0'};
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> header;
  std::vector<StoredTensor> tensors;

  void add(const std::string& name, const Tensor& t) { tensors.push_back({name, t.shape(), t.to_vector()}); }

  void add_all(const ParameterSet& params, const std::string& prefix = "") {
    for (const auto& p : params) add(prefix + p.name, p.tensor);
  }

  const StoredTensor* find(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }

  const StoredTensor& get(const std::string& name) const {
    if (const auto* t = find(name)) return *t;
    throw IoError("checkpoint has no tensor '" + name + "'");
  }

  const std::string& header_value(const std::string& key) const {
    auto it = header.find(key);
    if (it == header.end()) throw IoError("checkpoint header lacks '" + key + "'");
    return it->second;
  }

  /// Copies stored values into matching parameters; every parameter must be present.
  void load_into(ParameterSet& params, const std::string& prefix = "") const {
    for (auto& p : params) {
      const auto& st = get(prefix + p.name);
      if (st.shape != p.tensor.shape()) {
        throw IoError("checkpoint tensor '" + st.name + "' has shape " + shape_string(st.shape) +
                      ", model expects " + shape_string(p.tensor.shape()));
      }
      auto dst = p.tensor.mutable_data();
      std::copy(st.values.begin(), st.values.end(), dst.begin());
    }
  }

  std::vector<char> serialize() const {
    std::vector<char> out(kMagic, kMagic + 8);
    put_u32(out, kVersion);
    std::string text;
    for (const auto& [k, v] : header) {
      if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
        throw IoError("checkpoint header entries may not contain '=' in keys or newlines");
      }
      text += k + "=" + v + "\n";
    }
    put_u64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    put_u64(out, tensors.size());
    for (const auto& t : tensors) {
      if (shape_size(t.shape) != t.values.size()) throw IoError("checkpoint tensor '" + t.name + "' is inconsistent");
      put_u32(out, static_cast<std::uint32_t>(t.name.size()));
      out.insert(out.end(), t.name.begin(), t.name.end());
      put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) put_u64(out, d);
      for (double v : t.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
  }

  static Checkpoint deserialize(const std::vector<char>& bytes) {
    Reader r{bytes};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw IoError("not a checkpoint file (bad magic)");
    r.pos = 8;
    if (r.u32() != kVersion) throw IoError("unsupported checkpoint version");
    Checkpoint ck;
    const auto text = r.str(r.u64());
    std::size_t start = 0;
    while (start < text.size()) {
      auto nl = text.find('\n', start);
      if (nl == std::string::npos) throw IoError("checkpoint header is truncated");
      const auto line = text.substr(start, nl - start);
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw IoError("malformed checkpoint header line");
      ck.header[line.substr(0, eq)] = line.substr(eq + 1);
      start = nl + 1;
    }
    const auto count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
      StoredTensor t;
      t.name = r.str(r.u32());
      const auto rank = r.u32();
      for (std::uint32_t k = 0; k < rank; ++k) t.shape.push_back(static_cast<std::size_t>(r.u64()));
      const auto n = shape_size(t.shape);
      if (n > (bytes.size() - r.pos) / 8) throw IoError("checkpoint tensor '" + t.name + "' is truncated");
      t.values.resize(n);
      for (auto& v : t.values) v = std::bit_cast<double>(r.u64());
      ck.tensors.push_back(std::move(t));
    }
    if (r.pos != bytes.size()) throw IoError("trailing bytes after checkpoint payload");
    return ck;
  }

  void save(const std::string& path) const {
    const auto bytes = serialize();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing '" + path + "'");
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  static void put_u32(std::vector<char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  static void put_u64(std::vector<char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  struct Reader {
    const std::vector<char>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
      if (bytes.size() - pos < n) throw IoError("checkpoint is truncated");
    }
    std::uint64_t u64() {
      need(8);
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      pos += 8;
      return v;
    }
    std::uint32_t u32() {
      need(4);
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      pos += 4;
      return v;
    }
    std::string str(std::uint64_t n) {
      need(n);
      std::string s(bytes.data() + pos, n);
      pos += n;
      return s;
    }
  };
};

}  // namespace gazefuse
