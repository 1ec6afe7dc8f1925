#include "pxmc/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

namespace pxmc {

void Dataset::validate() const {
  if (static_cast<Index>(labels.size()) != features.rows())
    throw FormatError("dataset has " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(features.rows()) + " rows");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw FormatError("label " + std::to_string(y) + " out of range");
}

Dataset Dataset::slice(Index begin, Index count) const {
  Dataset out;
  out.features = features.middleRows(begin, count);
  out.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
  out.num_classes = num_classes;
  out.split = split;
  return out;
}

Dataset two_moons(Index n, double noise_std, RngStream& rng) {
  Dataset data;
  data.features.resize(n, 2);
  data.labels.resize(static_cast<std::size_t>(n));
  data.num_classes = 2;
  const Index upper = (n + 1) / 2;
  for (Index i = 0; i < n; ++i) {
    const double angle = std::numbers::pi * rng.uniform();
    const bool first = i < upper;
    data.features(i, 0) = first ? std::cos(angle) : 1.0 - std::cos(angle);
    data.features(i, 1) = first ? std::sin(angle) : 0.5 - std::sin(angle);
    data.labels[static_cast<std::size_t>(i)] = first ? 0 : 1;
  }
  if (noise_std > 0.0) {
    for (Index i = 0; i < n; ++i) {
      double z[2];
      rng.fill_normal(z, 2);
      data.features(i, 0) += noise_std * z[0];
      data.features(i, 1) += noise_std * z[1];
    }
  }
  return data;
}

Dataset spirals(Index n, int classes, double noise_std, RngStream& rng) {
  if (classes < 1) throw ConfigError("spirals needs at least one class");
  Dataset data;
  data.features.resize(n, 2);
  data.labels.resize(static_cast<std::size_t>(n));
  data.num_classes = classes;
  for (Index i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % classes);
    const double t = rng.uniform();
    const double angle = 2.0 * std::numbers::pi * k / classes + 3.0 * std::numbers::pi * t;
    data.features(i, 0) = t * std::cos(angle);
    data.features(i, 1) = t * std::sin(angle);
    data.labels[static_cast<std::size_t>(i)] = k;
  }
  if (noise_std > 0.0) {
    for (Index i = 0; i < n; ++i) {
      double z[2];
      rng.fill_normal(z, 2);
      data.features(i, 0) += noise_std * z[0];
      data.features(i, 1) += noise_std * z[1];
    }
  }
  return data;
}

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size())
    throw FormatError(path + ": truncated header at offset " + std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

void require_magic(std::uint32_t got, std::uint32_t want, const std::string& path) {
  if (got != want) {
    std::ostringstream msg;
    msg << path << ": bad IDX magic 0x" << std::hex << got << " at offset 0 (expected 0x" << want << ")";
    throw FormatError(msg.str());
  }
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto images = read_bytes(images_path);
  const auto labels = read_bytes(labels_path);

  require_magic(read_be32(images, 0, images_path), kIdxImages, images_path);
  const std::uint32_t count = read_be32(images, 4, images_path);
  const std::uint32_t rows = read_be32(images, 8, images_path);
  const std::uint32_t cols = read_be32(images, 12, images_path);
  const std::size_t pixels = std::size_t{rows} * cols;
  if (images.size() < 16 + std::size_t{count} * pixels)
    throw FormatError(images_path + ": truncated payload, expected " + std::to_string(16 + count * pixels) +
                      " bytes, found " + std::to_string(images.size()));

  require_magic(read_be32(labels, 0, labels_path), kIdxLabels, labels_path);
  const std::uint32_t label_count = read_be32(labels, 4, labels_path);
  if (labels.size() < 8 + std::size_t{label_count})
    throw FormatError(labels_path + ": truncated payload, expected " + std::to_string(8 + label_count) +
                      " bytes, found " + std::to_string(labels.size()));
  if (label_count != count)
    throw FormatError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                      std::to_string(label_count) + " labels");

  Dataset data;
  data.features.resize(count, static_cast<Index>(pixels));
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t p = 0; p < pixels; ++p)
      data.features(static_cast<Index>(i), static_cast<Index>(p)) = images[16 + i * pixels + p] / 255.0;
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    data.labels[i] = labels[8 + i];
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = max_label + 1;
  return data;
}

void write_idx_images(const std::string& path, const std::vector<std::vector<std::uint8_t>>& pixels,
                      std::uint32_t rows, std::uint32_t cols) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  put_be32(out, kIdxImages);
  put_be32(out, static_cast<std::uint32_t>(pixels.size()));
  put_be32(out, rows);
  put_be32(out, cols);
  for (const auto& image : pixels) {
    if (image.size() != std::size_t{rows} * cols) throw ShapeError("IDX image has the wrong pixel count");
    out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  }
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  put_be32(out, kIdxLabels);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_double(std::string_view field, double& out) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size() && !field.empty();
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_commas(line);
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && parse_double(fields[i], values[i]);
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;  // header
      throw FormatError(path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (fields.size() < 2) throw FormatError(path + ":" + std::to_string(line_no) + ": need features and a label");
    if (width == 0) width = fields.size();
    if (fields.size() != width) throw FormatError(path + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(values));
  }
  Dataset data;
  data.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(width == 0 ? 0 : width - 1));
  data.labels.resize(rows.size());
  int max_label = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j + 1 < width; ++j) data.features(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    const double label = rows[i][width - 1];
    if (label < 0 || label != std::floor(label))
      throw FormatError(path + ": label must be a non-negative integer");
    data.labels[i] = static_cast<int>(label);
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = max_label + 1;
  return data;
}

Standardization standardize(Dataset& data) {
  Standardization st;
  const double n = static_cast<double>(data.size());
  st.mean = data.features.colwise().mean().transpose();
  st.scale.resize(data.dim());
  for (Index j = 0; j < data.dim(); ++j) {
    const double var = (data.features.col(j).array() - st.mean(j)).square().sum() / n;
    st.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  apply_standardization(data, st);
  return st;
}

void apply_standardization(Dataset& data, const Standardization& st) {
  if (st.mean.size() != data.dim()) throw ShapeError("standardization width mismatch");
  data.features.rowwise() -= st.mean.transpose();
  data.features.array().rowwise() /= st.scale.transpose().array();
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, Index train_count) {
  if (train_count < 0 || train_count > data.size()) throw ConfigError("split size out of range");
  Dataset train = data.slice(0, train_count);
  Dataset valid = data.slice(train_count, data.size() - train_count);
  train.split = "train";
  valid.split = "validation";
  return {std::move(train), std::move(valid)};
}

BatchIterator::BatchIterator(const Dataset& data, Index batch_size, RngStream rng)
    : data_(&data), batch_size_(batch_size), rng_(rng) {
  if (batch_size <= 0 || batch_size > data.size()) throw ConfigError("batch size must be in [1, N]");
  order_.resize(static_cast<std::size_t>(data.size()));
  reshuffle();
}

void BatchIterator::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<Index>(i);
  for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.index(i)]);
  cursor_ = 0;
}

Index BatchIterator::batches_per_epoch() const { return (data_->size() + batch_size_ - 1) / batch_size_; }

std::vector<Index> BatchIterator::next_indices() {
  if (cursor_ >= static_cast<Index>(order_.size())) {
    ++epoch_;
    reshuffle();
  }
  const Index count = std::min(batch_size_, static_cast<Index>(order_.size()) - cursor_);
  std::vector<Index> idx(order_.begin() + cursor_, order_.begin() + cursor_ + count);
  cursor_ += count;
  return idx;
}

Batch BatchIterator::next() {
  const auto idx = next_indices();
  Batch b;
  b.x.resize(static_cast<Index>(idx.size()), data_->dim());
  b.y.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    b.x.row(static_cast<Index>(i)) = data_->features.row(idx[i]);
    b.y[i] = data_->labels[static_cast<std::size_t>(idx[i])];
  }
  return b;
}

}  // namespace pxmc
