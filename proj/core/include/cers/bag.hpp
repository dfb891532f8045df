// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace cers {

/// One slide's worth of patch embeddings: the unit of all WSI-level work.
struct EmbeddingBag {
  std::string slide_id;
  std::uint32_t dim = 0;
  std::vector<std::array<std::int32_t, 2>> coords;  // one (x, y) per instance
  std::vector<float> values;                        // N x dim, row-major
  std::optional<std::int32_t> label;

  std::size_t size() const { return coords.size(); }
  float at(std::size_t instance, std::size_t d) const {
    return values[instance * dim + d];
  }

  /// Instances as an N x D double matrix for numeric work.
  Eigen::MatrixXd instances() const;
};

/// Checks the bag invariants (N >= 1, D >= 1, sizes, finite values).
void validate(const EmbeddingBag& bag);

/// CEB1 container: magic `CEB1`, u32 version=1, u32 N, u32 D,
/// u16 slide_id length + UTF-8 bytes, i32 label (-1 = none),
/// N x 2 i32 coords, N x D little-endian f32 values.
void write_bag(const EmbeddingBag& bag, std::ostream& out);
EmbeddingBag read_bag(std::istream& in);

/// File variants. Writes are atomic (temp file + rename); reads reject
/// trailing bytes after the payload.
void write_bag_file(const EmbeddingBag& bag, const std::filesystem::path& path);
EmbeddingBag read_bag_file(const std::filesystem::path& path);

/// One `manifest.csv` row: header `slide_id,label,path,n_signal`.
struct ManifestEntry {
  std::string slide_id;
  std::int32_t label = -1;
  std::string path;     // relative to the manifest's directory
  std::int32_t n_signal = 0;
};

void write_manifest(const std::vector<ManifestEntry>& entries,
                    const std::filesystem::path& path);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace cers
