#include "rfim/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace rfim {

namespace {

std::filesystem::path with_ext(const std::filesystem::path& base, const char* ext) {
  return std::filesystem::path(base.string() + ext);
}

void write_meta(const std::filesystem::path& base, const SnapshotMeta& m) {
  nlohmann::json j;
  j["kind"] = m.kind;
  j["count"] = m.count;
  j["mesh"] = m.mesh;
  j["seed"] = m.seed;
  j["replica"] = m.replica;
  if (m.kind == "spins") {
    j["sweep"] = m.sweep;
    j["encoding"] = "packed bits, LSB first, set = -1";
  } else {
    j["law"] = m.law;
    j["encoding"] = "float64 little-endian";
  }
  write_file_atomic(with_ext(base, ".json"), j.dump(2) + "\n");
}

SnapshotMeta read_meta(const std::filesystem::path& base, const std::string& kind) {
  const nlohmann::json j = nlohmann::json::parse(read_file(with_ext(base, ".json")));
  SnapshotMeta m;
  m.kind = j.at("kind").get<std::string>();
  require(m.kind == kind, Errc::IoError, "snapshot kind is " + m.kind + ", expected " + kind);
  m.count = j.at("count").get<Index>();
  m.mesh = j.at("mesh").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.replica = j.at("replica").get<std::uint64_t>();
  if (j.contains("sweep")) m.sweep = j["sweep"].get<std::int64_t>();
  if (j.contains("law")) m.law = j["law"].get<std::string>();
  return m;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), Errc::IoError, "cannot write " + tmp.string());
    os.write(content.data(), std::streamsize(content.size()));
    require(static_cast<bool>(os), Errc::IoError, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string content_hash(const std::string& data) {
  std::uint64_t h1 = 0xcbf29ce484222325ULL, h2 = 0x84222325cbf29ce4ULL;
  for (unsigned char c : data) {
    h1 = (h1 ^ c) * 0x100000001b3ULL;
    h2 = mix64(h2 ^ (c + 0x9e37ULL));
  }
  h1 = mix64(h1 ^ data.size());
  h2 = mix64(h2 + h1);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(h1),
                static_cast<unsigned long long>(h2));
  return buf;
}

void write_disorder_snapshot(const std::filesystem::path& base, const VectorX& omega, SnapshotMeta meta) {
  std::string bytes(std::size_t(omega.size()) * 8, '\0');
  for (Index i = 0; i < omega.size(); ++i) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(omega(i));
    for (int b = 0; b < 8; ++b) bytes[std::size_t(i) * 8 + b] = char((u >> (8 * b)) & 0xff);
  }
  write_file_atomic(with_ext(base, ".bin"), bytes);
  meta.kind = "disorder";
  meta.count = omega.size();
  write_meta(base, meta);
}

VectorX read_disorder_snapshot(const std::filesystem::path& base, SnapshotMeta* meta) {
  const SnapshotMeta m = read_meta(base, "disorder");
  const std::string bytes = read_file(with_ext(base, ".bin"));
  require(bytes.size() == std::size_t(m.count) * 8, Errc::IoError, "disorder snapshot size mismatch");
  VectorX w(m.count);
  for (Index i = 0; i < m.count; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= std::uint64_t(static_cast<unsigned char>(bytes[std::size_t(i) * 8 + b])) << (8 * b);
    w(i) = std::bit_cast<double>(u);
  }
  if (meta) *meta = m;
  return w;
}

void write_spin_snapshot(const std::filesystem::path& base, const SpinVector& spins, SnapshotMeta meta) {
  std::string bytes(std::size_t((spins.size() + 7) / 8), '\0');
  for (Index i = 0; i < spins.size(); ++i)
    if (spins(i) < 0) bytes[std::size_t(i / 8)] = char(static_cast<unsigned char>(bytes[std::size_t(i / 8)]) | (1u << (i % 8)));
  write_file_atomic(with_ext(base, ".bin"), bytes);
  meta.kind = "spins";
  meta.count = spins.size();
  write_meta(base, meta);
}

SpinVector read_spin_snapshot(const std::filesystem::path& base, SnapshotMeta* meta) {
  const SnapshotMeta m = read_meta(base, "spins");
  const std::string bytes = read_file(with_ext(base, ".bin"));
  require(bytes.size() == std::size_t((m.count + 7) / 8), Errc::IoError, "spin snapshot size mismatch");
  SpinVector s(m.count);
  for (Index i = 0; i < m.count; ++i)
    s(i) = (static_cast<unsigned char>(bytes[std::size_t(i / 8)]) >> (i % 8)) & 1 ? -1 : 1;
  if (meta) *meta = m;
  return s;
}

}  // namespace rfim
