// SPDX-License-Identifier: Apache-2.0
#include "cers/bag.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cers/errors.hpp"

namespace cers {

namespace {

constexpr char kMagic[4] = {'C', 'E', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  // Little-endian on-disk layout; this targets little-endian hosts.
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (in.gcount() != static_cast<std::streamsize>(sizeof value))
    throw BagIoError(BagFormatError::truncated, "ceb: truncated payload");
  return value;
}

}  // namespace

Eigen::MatrixXd EmbeddingBag::instances() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t d = 0; d < dim; ++d)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          static_cast<double>(at(i, d));
  return m;
}

void validate(const EmbeddingBag& bag) {
  if (bag.size() == 0)
    throw BagIoError(BagFormatError::zero_instances, "bag has no instances");
  if (bag.dim == 0)
    throw BagIoError(BagFormatError::zero_dim, "bag dimension is zero");
  if (bag.values.size() != bag.size() * bag.dim)
    throw DataError("bag value buffer size mismatch");
  if (bag.slide_id.size() > 0xFFFF) throw DataError("slide_id longer than 65535 bytes");
  if (bag.label && *bag.label < 0) throw DataError("bag label must be >= 0");
  for (float v : bag.values)
    if (!std::isfinite(v))
      throw BagIoError(BagFormatError::non_finite, "bag contains non-finite values");
}

void write_bag(const EmbeddingBag& bag, std::ostream& out) {
  validate(bag);
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(bag.size()));
  put(out, bag.dim);
  put(out, static_cast<std::uint16_t>(bag.slide_id.size()));
  out.write(bag.slide_id.data(), static_cast<std::streamsize>(bag.slide_id.size()));
  put(out, bag.label ? *bag.label : std::int32_t{-1});
  for (const auto& c : bag.coords) {
    put(out, c[0]);
    put(out, c[1]);
  }
  out.write(reinterpret_cast<const char*>(bag.values.data()),
            static_cast<std::streamsize>(bag.values.size() * sizeof(float)));
  if (!out) throw DataError("bag write failed");
}

EmbeddingBag read_bag(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4)
    throw BagIoError(BagFormatError::truncated, "ceb: truncated payload");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw BagIoError(BagFormatError::bad_magic, "ceb: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw BagIoError(BagFormatError::bad_version,
                     "ceb: unsupported version " + std::to_string(version));
  const auto n = get<std::uint32_t>(in);
  const auto dim = get<std::uint32_t>(in);
  if (n == 0) throw BagIoError(BagFormatError::zero_instances, "ceb: zero instances");
  if (dim == 0) throw BagIoError(BagFormatError::zero_dim, "ceb: zero dimension");

  EmbeddingBag bag;
  bag.dim = dim;
  const auto id_len = get<std::uint16_t>(in);
  bag.slide_id.resize(id_len);
  if (id_len > 0) {
    in.read(bag.slide_id.data(), id_len);
    if (in.gcount() != static_cast<std::streamsize>(id_len))
      throw BagIoError(BagFormatError::truncated, "ceb: truncated payload");
  }
  const auto label = get<std::int32_t>(in);
  if (label >= 0) bag.label = label;
  else if (label != -1) throw DataError("ceb: invalid label sentinel");

  bag.coords.resize(n);
  for (auto& c : bag.coords) {
    c[0] = get<std::int32_t>(in);
    c[1] = get<std::int32_t>(in);
  }
  bag.values.resize(static_cast<std::size_t>(n) * dim);
  in.read(reinterpret_cast<char*>(bag.values.data()),
          static_cast<std::streamsize>(bag.values.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(bag.values.size() * sizeof(float)))
    throw BagIoError(BagFormatError::truncated, "ceb: truncated payload");
  validate(bag);
  return bag;
}

void write_bag_file(const EmbeddingBag& bag, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    write_bag(bag, out);
  }
  std::filesystem::rename(tmp, path);
}

EmbeddingBag read_bag_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  EmbeddingBag bag = read_bag(in);
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError("ceb: trailing bytes after payload in " + path.string());
  return bag;
}

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << "slide_id,label,path,n_signal\n";
    for (const auto& e : entries)
      out << e.slide_id << ',' << e.label << ',' << e.path << ',' << e.n_signal << '\n';
    if (!out) throw DataError("manifest write failed");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty manifest: " + path.string());
  if (line != "slide_id,label,path,n_signal")
    throw DataError("unexpected manifest header: " + line);
  std::vector<ManifestEntry> entries;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::string field;
    if (!std::getline(ss, e.slide_id, ',')) throw DataError("bad manifest row: " + line);
    if (!std::getline(ss, field, ',')) throw DataError("bad manifest row: " + line);
    e.label = std::stoi(field);
    if (!std::getline(ss, e.path, ',')) throw DataError("bad manifest row: " + line);
    if (!std::getline(ss, field, ',')) throw DataError("bad manifest row: " + line);
    e.n_signal = std::stoi(field);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace cers
