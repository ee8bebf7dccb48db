#pragma once

// Flat binary file of named float64 blobs plus a text manifest:
//
//   hett-checkpoint 1
//   meta <key> <value>
//   blob <name> <dims, comma separated> <byte offset> <byte count> <fnv1a-64 hex>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hett/error.hpp"
#include "hett/tensor.hpp"

namespace hett::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are stored little-endian");

inline constexpr int kCheckpointVersion = 1;

struct Blob {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<Blob> blobs;

  const Blob* find(const std::string& name) const {
    for (const auto& b : blobs) {
      if (b.name == name) return &b;
    }
    return nullptr;
  }
  const Blob& require(const std::string& name) const {
    if (const Blob* b = find(name)) return *b;
    throw data_error("checkpoint has no blob named " + name);
  }
  const std::string& meta_value(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw data_error("checkpoint has no meta key " + key);
    return it->second;
  }
};

inline std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string manifest_path(const std::string& path) { return path + ".manifest"; }

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ostringstream manifest;
  manifest << "hett-checkpoint " << kCheckpointVersion << '\n';
  for (const auto& [k, v] : ck.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw invariant_error("checkpoint meta key/value contains whitespace: " + k);
    manifest << "meta " << k << ' ' << v << '\n';
  }
  std::string bytes;
  for (const auto& b : ck.blobs) {
    if (b.name.find_first_of(" \n") != std::string::npos) throw invariant_error("blob name contains whitespace: " + b.name);
    if (numel(b.shape) != b.values.size()) throw invariant_error("blob " + b.name + " shape does not match its values");
    const std::size_t offset = bytes.size();
    const std::size_t count = b.values.size() * sizeof(double);
    bytes.append(reinterpret_cast<const char*>(b.values.data()), count);
    manifest << "blob " << b.name << ' ';
    for (std::size_t i = 0; i < b.shape.size(); ++i) manifest << (i ? "," : "") << b.shape[i];
    if (b.shape.empty()) manifest << '-';
    manifest << ' ' << offset << ' ' << count << ' ' << std::hex << std::setw(16) << std::setfill('0')
             << fnv1a(bytes.data() + offset, count) << std::dec << std::setfill(' ') << '\n';
  }
  std::ofstream bin(path, std::ios::binary | std::ios::trunc);
  if (!bin) throw data_error("cannot write checkpoint " + path);
  bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  std::ofstream man(manifest_path(path), std::ios::binary | std::ios::trunc);
  if (!man) throw data_error("cannot write checkpoint manifest " + manifest_path(path));
  man << manifest.str();
  if (!bin || !man) throw data_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream man(manifest_path(path), std::ios::binary);
  if (!man) throw data_error("cannot read checkpoint manifest " + manifest_path(path));
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw data_error("cannot read checkpoint " + path);
  std::ostringstream raw;
  raw << bin.rdbuf();
  const std::string bytes = raw.str();

  Checkpoint ck;
  std::string line;
  int n = 0;
  while (std::getline(man, line)) {
    ++n;
    std::istringstream in(line);
    std::string tag;
    in >> tag;
    auto fail = [&](const std::string& msg) { return data_error(manifest_path(path) + ":" + std::to_string(n) + ": " + msg); };
    if (n == 1) {
      int version = 0;
      if (tag != "hett-checkpoint" || !(in >> version)) throw fail("not a checkpoint manifest");
      if (version != kCheckpointVersion) throw fail("unsupported checkpoint version " + std::to_string(version));
      continue;
    }
    if (tag.empty()) continue;
    if (tag == "meta") {
      std::string k, v;
      in >> k;
      std::getline(in >> std::ws, v);
      ck.meta[k] = v;
    } else if (tag == "blob") {
      Blob b;
      std::string dims, sum;
      std::size_t offset = 0, count = 0;
      if (!(in >> b.name >> dims >> offset >> count >> sum)) throw fail("malformed blob line");
      if (dims != "-") {
        std::istringstream ds(dims);
        std::string d;
        while (std::getline(ds, d, ',')) {
          int v = 0;
          const auto r = std::from_chars(d.data(), d.data() + d.size(), v);
          if (r.ec != std::errc() || r.ptr != d.data() + d.size() || v < 0) throw fail("bad shape " + dims);
          b.shape.push_back(v);
        }
      }
      if (offset + count > bytes.size() || count != numel(b.shape) * sizeof(double)) throw fail("blob " + b.name + " out of range");
      std::ostringstream hex;
      hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(bytes.data() + offset, count);
      if (hex.str() != sum) throw fail("checksum mismatch for blob " + b.name);
      b.values.resize(count / sizeof(double));
      std::memcpy(b.values.data(), bytes.data() + offset, count);
      ck.blobs.push_back(std::move(b));
    } else {
      throw fail("unknown manifest entry " + tag);
    }
  }
  if (n == 0) throw data_error("empty checkpoint manifest " + manifest_path(path));
  return ck;
}

}  // namespace hett::nn
