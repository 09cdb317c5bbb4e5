#include "pssl/dataset.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pssl/rng.hpp"

namespace pssl::data {

augment::Image Dataset::image(int row) const {
  check_arg(image_mode, "dataset is not in image mode");
  augment::Image img{height, width, channels, {}};
  img.pixels.resize(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index j = 0; j < features.cols(); ++j)
    img.pixels[static_cast<std::size_t>(j)] = features(row, j);
  return img;
}

void Dataset::validate() const {
  check_arg(features.rows() > 0 && features.cols() > 0, "dataset is empty");
  check_finite(features, "dataset features");
  if (!labels.empty()) {
    check_arg(static_cast<Eigen::Index>(labels.size()) == features.rows(),
              "label count does not match sample count");
    for (int y : labels)
      check_arg(y >= 0 && (class_count == 0 || y < class_count), "label out of range");
  }
  if (image_mode)
    check_arg(static_cast<Eigen::Index>(height) * width * channels == features.cols(),
              "image dimensions do not match feature width");
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset: " + path);
  std::string line;
  do {
    if (!std::getline(in, line)) throw std::invalid_argument("dataset file is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  } while (!line.empty() && line[0] == '#');

  std::vector<std::string> columns;
  {
    std::istringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) columns.push_back(cell);
  }
  bool has_label = !columns.empty() && columns.back() == "label";
  const std::size_t d = columns.size() - (has_label ? 1 : 0);
  check_arg(d >= 1, "dataset needs at least one feature column");
  for (std::size_t j = 0; j < d; ++j)
    check_arg(columns[j] == "f" + std::to_string(j),
              "dataset header must name feature columns f0..f{d-1}");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t rows = 0, lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string cell;
    std::size_t j = 0;
    while (std::getline(row, cell, ',')) {
      try {
        if (j < d) {
          values.push_back(std::stod(cell));
        } else if (has_label) {
          labels.push_back(std::stoi(cell));
        }
      } catch (const std::exception&) {
        throw std::invalid_argument("dataset: bad value at line " + std::to_string(lineno));
      }
      ++j;
    }
    check_arg(j == columns.size(), "dataset: wrong column count at line " + std::to_string(lineno));
    ++rows;
  }
  check_arg(rows > 0, "dataset has no data rows");

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * d + j];
  out.labels = std::move(labels);
  if (!out.labels.empty())
    out.class_count = *std::max_element(out.labels.begin(), out.labels.end()) + 1;
  out.validate();
  return out;
}

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::invalid_argument("truncated idx file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& features_path, const std::string& labels_path) {
  std::ifstream in(features_path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open dataset: " + features_path);
  unsigned char magic[4];
  in.read(reinterpret_cast<char*>(magic), 4);
  if (!in || magic[0] != 0 || magic[1] != 0 || magic[2] != 0x08)
    throw std::invalid_argument("not an unsigned-byte idx file: " + features_path);
  const int ndims = magic[3];
  check_arg(ndims == 3 || ndims == 4, "idx features must have 3 or 4 dimensions");
  std::vector<std::uint32_t> dims;
  for (int i = 0; i < ndims; ++i) dims.push_back(read_be_u32(in, features_path));
  const std::uint32_t n = dims[0], h = dims[1], w = dims[2];
  const std::uint32_t c = ndims == 4 ? dims[3] : 1;
  check_arg(n > 0 && h > 0 && w > 0 && c > 0, "idx dimensions must be positive");
  const std::size_t pixels = static_cast<std::size_t>(h) * w * c;
  std::vector<unsigned char> buf(pixels);
  Dataset out;
  out.image_mode = true;
  out.height = static_cast<int>(h);
  out.width = static_cast<int>(w);
  out.channels = static_cast<int>(c);
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  for (std::uint32_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!in) throw std::invalid_argument("truncated idx file: " + features_path);
    for (std::size_t j = 0; j < pixels; ++j)
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[j] / 255.0;
  }
  if (!labels_path.empty()) {
    std::ifstream lin(labels_path, std::ios::binary);
    if (!lin) throw std::invalid_argument("cannot open labels: " + labels_path);
    unsigned char lmagic[4];
    lin.read(reinterpret_cast<char*>(lmagic), 4);
    if (!lin || lmagic[0] != 0 || lmagic[1] != 0 || lmagic[2] != 0x08 || lmagic[3] != 1)
      throw std::invalid_argument("labels must be a 1-dim unsigned-byte idx file");
    const std::uint32_t ln = read_be_u32(lin, labels_path);
    check_arg(ln == n, "label count does not match sample count");
    out.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const int ch = lin.get();
      if (ch < 0) throw std::invalid_argument("truncated labels: " + labels_path);
      out.labels[i] = ch;
    }
    out.class_count = *std::max_element(out.labels.begin(), out.labels.end()) + 1;
  }
  out.validate();
  return out;
}

Dataset make_blobs(int n, int d, int k, double separation, double sigma, std::uint64_t seed) {
  check_arg(n >= k && k >= 1 && d >= 1, "make_blobs: need n >= k >= 1 and d >= 1");
  check_arg(separation >= 0.0 && sigma >= 0.0, "make_blobs: separation and sigma must be >= 0");
  RngStream stream(seed, stream_purpose::kSynth);
  Matrix centers(k, d);
  for (int c = 0; c < k; ++c) {
    Vector g(d);
    for (int j = 0; j < d; ++j) g(j) = stream.normal();
    const double norm = g.norm();
    if (norm > 0.0) g *= separation / norm;
    centers.row(c) = g.transpose();
  }
  Dataset out;
  out.features.resize(n, d);
  out.labels.resize(static_cast<std::size_t>(n));
  out.class_count = k;
  int row = 0;
  for (int c = 0; c < k; ++c) {
    const int count = n / k + (c < n % k ? 1 : 0);
    for (int i = 0; i < count; ++i, ++row) {
      for (int j = 0; j < d; ++j) out.features(row, j) = centers(c, j) + sigma * stream.normal();
      out.labels[static_cast<std::size_t>(row)] = c;
    }
  }
  out.validate();
  return out;
}

void write_csv(const Dataset& dataset, const std::string& path, const std::string& provenance) {
  check_arg(!dataset.image_mode, "write_csv: image datasets use idx files");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  if (!provenance.empty()) out << "# " << provenance << "\n";
  for (int j = 0; j < dataset.feature_dim(); ++j) out << (j ? ",f" : "f") << j;
  if (dataset.labeled()) out << ",label";
  out << "\n";
  char buf[64];
  for (int i = 0; i < dataset.size(); ++i) {
    for (int j = 0; j < dataset.feature_dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", dataset.features(i, j));
      out << (j ? "," : "") << buf;
    }
    if (dataset.labeled()) out << "," << dataset.labels[static_cast<std::size_t>(i)];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace pssl::data
