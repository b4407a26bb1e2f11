#include "stalesim/datasets.hpp"

#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>

#include "stalesim/csv.hpp"

namespace stalesim {

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated IDX header: " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

}  // namespace

IdxArray read_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file: " + path.string());
  const std::uint32_t magic = read_be32(in, path);
  std::size_t rank = 0;
  if (magic == 0x00000803u) {
    rank = 3;
  } else if (magic == 0x00000801u) {
    rank = 1;
  } else {
    throw std::runtime_error("unsupported IDX magic in " + path.string());
  }
  IdxArray out;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    out.dims.push_back(read_be32(in, path));
    count *= out.dims.back();
  }
  out.data.resize(count);
  if (!in.read(reinterpret_cast<char*>(out.data.data()), static_cast<std::streamsize>(count))) {
    throw std::runtime_error("truncated IDX payload: " + path.string());
  }
  return out;
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         int positive_label, std::size_t max_samples) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  if (img.dims.size() != 3 || lab.dims.size() != 1) throw std::runtime_error("expected rank-3 images and rank-1 labels");
  if (img.dims[0] != lab.dims[0]) throw std::runtime_error("image and label counts differ");
  std::size_t n = img.dims[0];
  if (max_samples != 0 && max_samples < n) n = max_samples;
  const std::size_t d = std::size_t{img.dims[1]} * img.dims[2];
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.labels.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = img.data[i * d + j] / 255.0;
    }
    ds.labels[static_cast<Eigen::Index>(i)] = lab.data[i] == positive_label ? 1.0 : -1.0;
  }
  return ds;
}

Dataset load_labeled_csv(const std::filesystem::path& path, double positive_label) {
  const CsvTable table = read_csv(path);
  std::vector<std::vector<std::string>> rows = table.rows;
  // read_csv treats the first line as a header; keep it when it is numeric.
  bool header_numeric = !table.header.empty();
  try {
    for (const auto& f : table.header) parse_double(f);
  } catch (const std::invalid_argument&) {
    header_numeric = false;
  }
  if (header_numeric) rows.insert(rows.begin(), table.header);
  if (rows.empty()) throw std::runtime_error("no samples in " + path.string());
  const std::size_t width = rows.front().size();
  if (width < 2) throw std::runtime_error("rows need a label and at least one feature: " + path.string());
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(i + 1) + " has a different width");
    }
    ds.labels[static_cast<Eigen::Index>(i)] = parse_double(rows[i][0]) == positive_label ? 1.0 : -1.0;
    for (std::size_t j = 1; j < width; ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = parse_double(rows[i][j]);
    }
  }
  return ds;
}

}  // namespace stalesim
