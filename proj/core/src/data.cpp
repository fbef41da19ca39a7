#include "dec/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string_view>

#include "dec/errors.hpp"

namespace dec {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& source, const char* field) {
  if (offset + 4 > bytes.size())
    throw FormatError(source + ": truncated IDX header reading " + field,
                      FormatError::Position::ByteOffset, bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(const std::vector<std::uint8_t>& bytes, std::uint32_t expected,
                 const std::string& source) {
  const std::uint32_t magic = read_be32(bytes, 0, source, "magic");
  if (magic != expected) {
    std::ostringstream msg;
    msg << source << ": bad IDX magic 0x" << std::hex << std::setw(8) << std::setfill('0') << magic
        << ", expected 0x" << std::setw(8) << expected;
    throw FormatError(msg.str(), FormatError::Position::ByteOffset, 0);
  }
}

void check_payload(const std::vector<std::uint8_t>& bytes, std::size_t header, std::size_t payload,
                   const std::string& source) {
  if (bytes.size() < header + payload)
    throw FormatError(source + ": truncated IDX payload (expected " +
                          std::to_string(header + payload) + " bytes, found " +
                          std::to_string(bytes.size()) + ")",
                      FormatError::Position::ByteOffset, bytes.size());
  if (bytes.size() > header + payload)
    throw FormatError(source + ": trailing bytes after IDX payload",
                      FormatError::Position::ByteOffset, header + payload);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_real(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

std::size_t Dataset::class_count() const {
  if (!labels || labels->empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

void Dataset::validate() const {
  if (!labels) return;
  if (labels->size() != features.rows())
    throw ArgumentError("Dataset: label count != row count");
  for (int l : *labels)
    if (l < 0) throw ArgumentError("Dataset: negative label");
}

Matrix parse_idx_images(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  check_magic(bytes, kIdxImagesMagic, source);
  const std::size_t count = read_be32(bytes, 4, source, "image count");
  const std::size_t rows = read_be32(bytes, 8, source, "row count");
  const std::size_t cols = read_be32(bytes, 12, source, "column count");
  const std::size_t dim = rows * cols;
  check_payload(bytes, 16, count * dim, source);
  Matrix out(count, dim);
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(bytes[16 + i]) / 255.0;
  return out;
}

std::vector<int> parse_idx_labels(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  check_magic(bytes, kIdxLabelsMagic, source);
  const std::size_t count = read_be32(bytes, 4, source, "label count");
  check_payload(bytes, 8, count, source);
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = bytes[8 + i];
  return labels;
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels) {
  Dataset ds;
  ds.name = images.filename().string();
  ds.features = parse_idx_images(read_file(images), images.string());
  if (labels) {
    auto l = parse_idx_labels(read_file(*labels), labels->string());
    if (l.size() != ds.features.rows())
      throw FormatError(labels->string() + ": label count " + std::to_string(l.size()) +
                            " != image count " + std::to_string(ds.features.rows()),
                        FormatError::Position::ByteOffset, 4);
    ds.labels = std::move(l);
  }
  return ds;
}

Dataset parse_csv(std::istream& in, std::optional<std::size_t> label_column,
                  const std::string& name) {
  Dataset ds;
  ds.name = name;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  bool first_content = true;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);

    bool numeric = true;
    std::vector<double> parsed(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c)
      if (!parse_real(fields[c], parsed[c])) {
        numeric = false;
        break;
      }
    if (first_content) {
      first_content = false;
      width = fields.size();
      if (label_column && *label_column >= width)
        throw FormatError(name + ": label column " + std::to_string(*label_column) +
                              " out of range",
                          FormatError::Position::Line, line_no);
      if (!numeric) continue;  // header row
    }
    if (fields.size() != width)
      throw FormatError(name + ": expected " + std::to_string(width) + " fields, found " +
                            std::to_string(fields.size()),
                        FormatError::Position::Line, line_no);
    if (!numeric) throw FormatError(name + ": non-numeric cell", FormatError::Position::Line, line_no);

    for (std::size_t c = 0; c < width; ++c) {
      if (label_column && c == *label_column) {
        const double l = parsed[c];
        if (l != std::floor(l) || l < 0.0 || l > 2147483647.0)
          throw FormatError(name + ": label is not a non-negative integer",
                            FormatError::Position::Line, line_no);
        labels.push_back(static_cast<int>(l));
      } else {
        values.push_back(parsed[c]);
      }
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(name + ": no data rows", FormatError::Position::Line, line_no);
  const std::size_t cols = width - (label_column ? 1 : 0);
  if (cols == 0) throw FormatError(name + ": no feature columns", FormatError::Position::Line, 1);
  ds.features = Matrix(rows, cols, std::move(values));
  if (label_column) ds.labels = std::move(labels);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::optional<std::size_t> label_column) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  auto ds = parse_csv(in, label_column, path.string());
  ds.name = path.filename().string();
  return ds;
}

void write_csv(std::ostream& out, const Matrix& features, const std::optional<std::vector<int>>& labels,
               bool header) {
  if (labels && labels->size() != features.rows())
    throw ArgumentError("write_csv: label count != row count");
  if (header) {
    for (std::size_t c = 0; c < features.cols(); ++c) out << (c ? "," : "") << "x" << c;
    if (labels) out << ",label";
    out << '\n';
  }
  out << std::setprecision(17);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto row = features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    if (labels) out << ',' << (*labels)[r];
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Matrix& features,
               const std::optional<std::vector<int>>& labels, bool header) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  write_csv(out, features, labels, header);
}

double normalization_scale(const Matrix& features) {
  if (features.rows() == 0 || features.cols() == 0)
    throw DegenerateDataError("normalize: empty dataset");
  double total = 0.0;
  for (double v : features.values()) total += v * v;
  const double mean = total / static_cast<double>(features.rows()) /
                      static_cast<double>(features.cols());
  if (!(mean > 0.0)) throw DegenerateDataError("normalize: all-zero dataset");
  return 1.0 / std::sqrt(mean);
}

NormalizedDataset normalize(Dataset dataset) {
  const double s = normalization_scale(dataset.features);
  for (double& v : dataset.features.values()) v *= s;
  return {std::move(dataset), s};
}

double retention_probability(std::size_t cls, std::size_t class_count, double r_min) {
  if (!(r_min > 0.0 && r_min <= 1.0)) throw ArgumentError("r_min must lie in (0, 1]");
  if (class_count <= 1) return 1.0;
  return r_min + static_cast<double>(cls) * (1.0 - r_min) / static_cast<double>(class_count - 1);
}

Dataset imbalanced_subsample(const Dataset& dataset, double r_min, Rng& rng) {
  if (!dataset.labels) throw ArgumentError("imbalanced_subsample: dataset has no labels");
  if (!(r_min > 0.0 && r_min <= 1.0)) throw ArgumentError("r_min must lie in (0, 1]");
  dataset.validate();
  const std::size_t classes = dataset.class_count();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const double p = retention_probability(static_cast<std::size_t>((*dataset.labels)[i]), classes, r_min);
    if (rng.uniform() < p) keep.push_back(i);
  }
  Dataset out = subset(dataset, keep);
  out.name = dataset.name + "-imbalanced";
  return out;
}

Dataset make_blobs(std::size_t n, std::size_t k, std::size_t dim, double center_separation,
                   double sigma, std::uint64_t seed) {
  if (n == 0 || k == 0 || dim == 0) throw ArgumentError("make_blobs: n, k and dim must be positive");
  if (!(center_separation > 0.0)) throw ArgumentError("make_blobs: separation must be positive");
  if (!(sigma >= 0.0)) throw ArgumentError("make_blobs: sigma must be non-negative");

  Rng rng(seed);
  Matrix centers(k, dim);
  double spread = center_separation;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > 0 && attempt % 100 == 0) spread *= 1.5;
      for (double& v : centers.row(c)) v = rng.normal(0.0, spread);
      bool ok = true;
      for (std::size_t o = 0; o < c && ok; ++o)
        ok = squared_distance(centers.row(c), centers.row(o)) >= center_separation * center_separation;
      if (ok) break;
    }
  }
  Dataset ds;
  ds.name = "blobs";
  ds.features = Matrix(n, dim);
  ds.labels = std::vector<int>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    (*ds.labels)[i] = static_cast<int>(c);
    auto row = ds.features.row(i);
    for (std::size_t d = 0; d < dim; ++d) row[d] = centers(c, d) + sigma * rng.normal();
  }
  return ds;
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.name = dataset.name;
  out.features = dataset.features.gather_rows(rows);
  if (dataset.labels) {
    std::vector<int> l(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) l[i] = (*dataset.labels)[rows[i]];
    out.labels = std::move(l);
  }
  return out;
}

DatasetSplit split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ArgumentError("split: train_fraction must lie in (0, 1)");
  const std::size_t n = dataset.size();
  if (n < 2) throw ArgumentError("split: need at least two rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_index(i + 1))]);

  auto train_n = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  train_n = std::clamp<std::size_t>(train_n, 1, n - 1);

  DatasetSplit out;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_n));
  out.validation_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(train_n), order.end());
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.validation_rows.begin(), out.validation_rows.end());
  out.train = subset(dataset, out.train_rows);
  out.validation = subset(dataset, out.validation_rows);
  out.train.name = dataset.name + "-train";
  out.validation.name = dataset.name + "-validation";
  return out;
}

Dataset concatenate(const Dataset& first, const Dataset& second) {
  require_shape(first.dim() == second.dim(), "concatenate: feature dims differ");
  if (first.has_labels() != second.has_labels())
    throw ArgumentError("concatenate: only one dataset has labels");
  std::vector<double> values(first.features.storage());
  values.insert(values.end(), second.features.storage().begin(), second.features.storage().end());
  Dataset out;
  out.name = first.name + "+" + second.name;
  out.features = Matrix(first.size() + second.size(), first.dim(), std::move(values));
  if (first.labels) {
    std::vector<int> l = *first.labels;
    l.insert(l.end(), second.labels->begin(), second.labels->end());
    out.labels = std::move(l);
  }
  return out;
}

}  // namespace dec
