#include "dec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dec/errors.hpp"

namespace dec {

namespace {

constexpr char kMagic[8] = {'D', 'E', 'C', 'K', 'P', 'T', '\0', '\0'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void count(std::size_t v) {
    if (v > 0xffffffffu) throw ArgumentError("checkpoint: dimension too large");
    u32(static_cast<std::uint32_t>(v));
  }
  std::vector<std::uint8_t> finish() {
    u64(fnv1a64(bytes_));
    return std::move(bytes_);
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size())
      throw FormatError(source_ + ": truncated checkpoint reading " + what,
                        FormatError::Position::ByteOffset, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw FormatError(source_ + ": " + what, FormatError::Position::ByteOffset, at);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void header(Writer& w, CheckpointKind kind) {
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kind));
}

void write_layers(Writer& w, const std::vector<DenseLayer>& layers) {
  w.count(layers.size());
  for (const auto& l : layers) {
    w.count(l.in_dim());
    w.count(l.out_dim());
    w.u8(l.activation == Activation::ReLU ? 0 : 1);
    for (double v : l.weights.values()) w.f64(v);
    for (double v : l.bias) w.f64(v);
  }
}

std::vector<DenseLayer> read_layers(Reader& r) {
  const std::uint32_t count = r.u32("layer count");
  std::vector<DenseLayer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const std::size_t in = r.u32("layer in_dim");
    const std::size_t out = r.u32("layer out_dim");
    if (in == 0 || out == 0) r.fail("zero layer dimension", at);
    const std::size_t tag_at = r.offset();
    const auto tag = r.u8("activation tag");
    if (tag > 1) r.fail("unknown activation tag " + std::to_string(tag), tag_at);
    if (in * out >= r.remaining()) r.fail("truncated checkpoint reading layer parameters", at);
    r.need((in * out + out) * 8, "layer parameters");
    DenseLayer layer{Matrix(out, in), std::vector<double>(out), tag == 0 ? Activation::ReLU
                                                                         : Activation::Identity};
    for (double& v : layer.weights.values()) v = r.f64("weights");
    for (double& v : layer.bias) v = r.f64("bias");
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace

const std::vector<DenseLayer>& Checkpoint::encoder() const {
  if (model) return model->encoder;
  if (autoencoder) return autoencoder->encoder();
  throw ArgumentError("Checkpoint: empty");
}

std::vector<std::uint8_t> serialize(const StackedAutoencoder& sae) {
  sae.validate();
  Writer w;
  header(w, CheckpointKind::Autoencoder);
  write_layers(w, sae.encoder());
  write_layers(w, sae.decoder());
  return w.finish();
}

std::vector<std::uint8_t> serialize(const DecModel& model) {
  model.validate();
  Writer w;
  header(w, CheckpointKind::ClusteringModel);
  write_layers(w, model.encoder);
  w.count(model.centroids.rows());
  w.count(model.centroids.cols());
  w.f64(model.alpha);
  for (double v : model.centroids.values()) w.f64(v);
  return w.finish();
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes, const std::string& source) {
  Reader r(bytes, source);
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) r.fail("bad checkpoint magic", 0);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8("magic");

  const std::size_t version_at = r.offset();
  const auto version = r.u32("version");
  if (version != kCheckpointVersion)
    r.fail("unsupported checkpoint version " + std::to_string(version), version_at);
  const std::size_t kind_at = r.offset();
  const auto kind = r.u32("kind");

  Checkpoint ckpt;
  try {
    if (kind == static_cast<std::uint32_t>(CheckpointKind::Autoencoder)) {
      ckpt.kind = CheckpointKind::Autoencoder;
      auto enc = read_layers(r);
      auto dec = read_layers(r);
      ckpt.autoencoder = StackedAutoencoder(std::move(enc), std::move(dec));
    } else if (kind == static_cast<std::uint32_t>(CheckpointKind::ClusteringModel)) {
      ckpt.kind = CheckpointKind::ClusteringModel;
      DecModel model;
      model.encoder = read_layers(r);
      const std::size_t k = r.u32("cluster count");
      const std::size_t dim = r.u32("centroid dim");
      model.alpha = r.f64("alpha");
      if (k * dim >= r.remaining()) r.fail("truncated checkpoint reading centroids", r.offset());
      r.need(k * dim * 8, "centroids");
      model.centroids = Matrix(k, dim);
      for (double& v : model.centroids.values()) v = r.f64("centroids");
      model.validate();
      ckpt.model = std::move(model);
    } else {
      r.fail("unknown checkpoint kind " + std::to_string(kind), kind_at);
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    r.fail(std::string("inconsistent checkpoint: ") + e.what(), r.offset());
  }

  const std::size_t payload_end = r.offset();
  const auto stored = r.u64("checksum");
  if (stored != fnv1a64(bytes.first(payload_end))) r.fail("checksum mismatch", payload_end);
  if (r.offset() != bytes.size()) r.fail("trailing bytes after checkpoint", r.offset());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const StackedAutoencoder& sae) {
  write_file_atomic(path, serialize(sae));
}

void save_checkpoint(const std::filesystem::path& path, const DecModel& model) {
  write_file_atomic(path, serialize(model));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize(bytes, path.string());
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return fnv1a64(bytes);
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ArgumentError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace dec
