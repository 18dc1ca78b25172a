#ifndef CAMREID_DATAIO_HPP_
#define CAMREID_DATAIO_HPP_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "camreid/metrics.hpp"

namespace camreid::io {

/// Bad or missing user input. The CLI maps it to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetManifest {
  std::string name = "dataset";
  std::size_t num_cameras = 0;
  std::size_t embedding_dim = 0;
  metrics::Distance distance = metrics::Distance::kEuclidean;
  bool cross_camera_only = true;
  std::filesystem::path query;
  std::filesystem::path gallery;
};

/// Reads a manifest JSON file. Relative table paths resolve against the
/// manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

std::string manifest_json(const DatasetManifest& m);

/// Parses embedding CSV (`person_id,camera_id,split,f0,...,f{D-1}`; the
/// header line is optional). Row order is preserved. Errors name the line.
std::vector<metrics::EmbeddingRecord> parse_embeddings(
    std::istream& in, const DatasetManifest& manifest,
    const std::string& source = "<stream>");

std::vector<metrics::EmbeddingRecord> load_embeddings(
    const std::filesystem::path& path, const DatasetManifest& manifest);

/// Writes the header and one row per record; values use 9 significant digits.
void write_embeddings(std::ostream& out,
                      std::span<const metrics::EmbeddingRecord> records);

void save_embeddings(const std::filesystem::path& path,
                     std::span<const metrics::EmbeddingRecord> records);

struct QueryGallery {
  std::vector<metrics::EmbeddingRecord> queries;
  std::vector<metrics::EmbeddingRecord> gallery;
};

/// Loads both tables named by the manifest and partitions rows by their
/// split tag. A file listed twice is read once.
QueryGallery load_dataset(const DatasetManifest& manifest);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace camreid::io

#endif  // CAMREID_DATAIO_HPP_
