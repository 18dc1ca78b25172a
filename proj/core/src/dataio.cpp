#include "camreid/dataio.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace camreid::io {
namespace fs = std::filesystem;
using metrics::EmbeddingRecord;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << text;
}

DatasetManifest load_manifest(const fs::path& path) {
  const std::string text = read_file(path);
  DatasetManifest m;
  try {
    const auto doc = nlohmann::json::parse(text);
    m.name = doc.value("name", m.name);
    m.num_cameras = doc.at("num_cameras").get<std::size_t>();
    m.embedding_dim = doc.at("embedding_dim").get<std::size_t>();
    m.distance = metrics::parse_distance(doc.value("distance", std::string("euclidean")));
    m.cross_camera_only = doc.value("cross_camera_only", true);
    const fs::path base = path.parent_path();
    auto resolve = [&](const char* key) -> fs::path {
      if (!doc.contains(key)) return {};
      fs::path p = doc.at(key).get<std::string>();
      return p.is_relative() ? base / p : p;
    };
    m.query = resolve("query");
    m.gallery = resolve("gallery");
  } catch (const nlohmann::json::exception& e) {
    throw InputError("manifest " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError("manifest " + path.string() + ": " + e.what());
  }
  if (m.embedding_dim == 0) {
    throw InputError("manifest " + path.string() + ": embedding_dim must be > 0");
  }
  return m;
}

std::string manifest_json(const DatasetManifest& m) {
  nlohmann::ordered_json doc;
  doc["name"] = m.name;
  doc["num_cameras"] = m.num_cameras;
  doc["embedding_dim"] = m.embedding_dim;
  doc["distance"] = metrics::to_string(m.distance);
  doc["cross_camera_only"] = m.cross_camera_only;
  doc["query"] = m.query.generic_string();
  doc["gallery"] = m.gallery.generic_string();
  return doc.dump(2) + "\n";
}

std::vector<EmbeddingRecord> parse_embeddings(std::istream& in,
                                              const DatasetManifest& manifest,
                                              const std::string& source) {
  std::vector<EmbeddingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t dim = manifest.embedding_dim;
  auto fail = [&](const std::string& what) {
    throw InputError(source + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (line_no == 1 && !cells.empty() && trim(cells[0]) == "person_id") {
      if (cells.size() != 3 + dim) {
        fail("header has " + std::to_string(cells.size() - 3) +
             " feature columns, manifest says " + std::to_string(dim));
      }
      continue;
    }
    if (cells.size() < 3) fail("expected person_id,camera_id,split,features...");
    if (cells.size() != 3 + dim) {
      fail("vector has " + std::to_string(cells.size() - 3) +
           " components, expected " + std::to_string(dim));
    }
    EmbeddingRecord r;
    if (!parse_number(trim(cells[0]), r.person_id)) fail("bad person_id '" + cells[0] + "'");
    if (!parse_number(trim(cells[1]), r.camera_id)) fail("bad camera_id '" + cells[1] + "'");
    if (manifest.num_cameras > 0 && r.camera_id >= manifest.num_cameras) {
      fail("camera id " + std::to_string(r.camera_id) + " >= num_cameras " +
           std::to_string(manifest.num_cameras));
    }
    try {
      r.split = metrics::parse_split(trim(cells[2]));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    r.vector.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const std::string cell = trim(cells[3 + i]);
      if (!parse_number(cell, r.vector[i]) || !std::isfinite(r.vector[i])) {
        fail("bad feature value '" + cell + "' in column f" + std::to_string(i));
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<EmbeddingRecord> load_embeddings(const fs::path& path,
                                             const DatasetManifest& manifest) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embeddings file: " + path.string());
  return parse_embeddings(in, manifest, path.string());
}

void write_embeddings(std::ostream& out, std::span<const EmbeddingRecord> records) {
  const std::size_t dim = records.empty() ? 0 : records.front().vector.size();
  out << "person_id,camera_id,split";
  for (std::size_t i = 0; i < dim; ++i) out << ",f" << i;
  out << '\n';
  char buf[40];
  for (const auto& r : records) {
    out << r.person_id << ',' << r.camera_id << ',' << metrics::to_string(r.split);
    for (double v : r.vector) {
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

void save_embeddings(const fs::path& path, std::span<const EmbeddingRecord> records) {
  std::ostringstream os;
  write_embeddings(os, records);
  write_file(path, os.str());
}

QueryGallery load_dataset(const DatasetManifest& manifest) {
  if (manifest.query.empty() || manifest.gallery.empty()) {
    throw InputError("dataset needs both a query and a gallery table");
  }
  std::vector<EmbeddingRecord> rows = load_embeddings(manifest.query, manifest);
  if (fs::weakly_canonical(manifest.query) != fs::weakly_canonical(manifest.gallery)) {
    auto more = load_embeddings(manifest.gallery, manifest);
    rows.insert(rows.end(), std::make_move_iterator(more.begin()),
                std::make_move_iterator(more.end()));
  }
  QueryGallery out;
  for (auto& r : rows) {
    (r.split == metrics::Split::kQuery ? out.queries : out.gallery)
        .push_back(std::move(r));
  }
  return out;
}

}  // namespace camreid::io
