#include "caed/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "caed/error.hpp"

namespace caed {

namespace fs = std::filesystem;

Dataset Dataset::head(std::size_t count) const {
  if (count == 0 || count >= size()) return *this;
  Dataset out = *this;
  out.scenes = scenes.leftCols(static_cast<Eigen::Index>(count));
  if (!labels.empty()) out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

namespace {

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

// Little-endian writer/reader for the RAW and checkpoint containers.
class ByteWriter {
 public:
  void bytes(const char* magic) { buf_.append(magic, 4); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) buf_.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
  }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> data) : data_(std::move(data)) {}

  void expect_magic(const char* magic) {
    need(4);
    if (std::memcmp(data_.data() + pos_, magic, 4) != 0) {
      throw FormatError(std::string("bad magic: expected '") + magic + "'");
    }
    pos_ += 4;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{data_[pos_ + k]} << (8 * k);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= std::uint64_t{data_[pos_ + k]} << (8 * k);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("file is truncated");
  }
  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kRawVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

void write_raw_block(ByteWriter& w, const CodedApertureSet& ca) {
  w.bytes("APTR");
  w.u32(kRawVersion);
  w.u32(static_cast<std::uint32_t>(ca.shots()));
  w.u32(static_cast<std::uint32_t>(ca.rows()));
  w.u32(static_cast<std::uint32_t>(ca.cols()));
  w.u32(static_cast<std::uint32_t>(ca.planes()));
  for (double v : ca.data()) w.f64(v);
}

CodedApertureSet read_raw_block(ByteReader& r) {
  r.expect_magic("APTR");
  const auto version = r.u32();
  if (version != kRawVersion) throw FormatError("unsupported RAW version " + std::to_string(version));
  CaShape shape;
  shape.shots = r.u32();
  shape.rows = r.u32();
  shape.cols = r.u32();
  shape.planes = r.u32();
  if (shape.shots == 0 || shape.rows == 0 || shape.cols == 0 || shape.planes == 0) {
    throw FormatError("RAW header has a zero dimension");
  }
  if (r.remaining() / 8 < shape.size()) throw FormatError("RAW payload is shorter than its header declares");
  std::vector<double> values(shape.size());
  for (double& v : values) v = r.f64();
  return CodedApertureSet(shape, std::move(values));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_csv_row(const std::string& line, const fs::path& path) {
  std::vector<double> row;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str()) throw FormatError("non-numeric CSV cell in " + path.string());
    row.push_back(v);
  }
  return row;
}

// Reads one CSV plane; returns rows of values.
std::vector<std::vector<double>> read_csv_plane(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_csv_row(line, path));
  }
  if (rows.empty()) throw FormatError("empty CSV plane " + path.string());
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw FormatError("ragged CSV plane " + path.string());
  }
  return rows;
}

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<unsigned char> pixels;
};

PgmImage read_pgm(const fs::path& path) {
  const auto data = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < data.size() && !std::isspace(data[pos])) t.push_back(static_cast<char>(data[pos++]));
    return t;
  };
  if (token() != "P5") throw FormatError("not a binary PGM (P5): " + path.string());
  PgmImage img;
  img.width = std::stoul(token());
  img.height = std::stoul(token());
  if (token() != "255") throw FormatError("PGM maxval must be 255: " + path.string());
  ++pos;  // single whitespace after maxval
  if (data.size() < pos + img.width * img.height) throw FormatError("PGM pixel data is truncated");
  img.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(pos),
                    data.begin() + static_cast<std::ptrdiff_t>(pos + img.width * img.height));
  return img;
}

}  // namespace

Dataset load_mnist_idx(const fs::path& images_path, const fs::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  if (images.size() < 16) throw FormatError("IDX image file is truncated");
  if (labels.size() < 8) throw FormatError("IDX label file is truncated");
  if (read_be32(images, 0) != 0x00000803) throw FormatError("bad magic in IDX image file");
  if (read_be32(labels, 0) != 0x00000801) throw FormatError("bad magic in IDX label file");
  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  if (images.size() != 16 + count * rows * cols) {
    throw FormatError("IDX image file size " + std::to_string(images.size()) + " does not match header (" +
                      std::to_string(16 + count * rows * cols) + " bytes)");
  }
  if (labels.size() != 8 + label_count) throw FormatError("IDX label file size does not match header");
  if (count != label_count) {
    throw FormatError("IDX image count " + std::to_string(count) + " differs from label count " +
                      std::to_string(label_count));
  }
  Dataset ds;
  ds.rows = rows;
  ds.cols = cols;
  ds.bands = 1;
  const std::size_t n = rows * cols;
  ds.scenes.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k)
    for (std::size_t p = 0; p < n; ++p)
      ds.scenes(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = images[16 + k * n + p] / 255.0;
  ds.labels.resize(count);
  for (std::size_t k = 0; k < count; ++k) ds.labels[k] = labels[8 + k];
  return ds;
}

std::vector<double> gen_synthetic_cube(std::size_t rows, std::size_t cols, std::size_t bands, std::size_t blobs,
                                       Rng& rng) {
  if (rows == 0 || cols == 0 || bands == 0) throw ShapeError("cube dimensions must be >= 1");
  std::vector<double> cube(rows * cols * bands, 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Widths of at least two samples keep neighbouring differences well below 0.5.
  const double min_spatial = 2.0 + 0.15 * static_cast<double>(std::min(rows, cols));
  const double min_spectral = 2.0 + 0.15 * static_cast<double>(bands);
  for (std::size_t b = 0; b < blobs; ++b) {
    const double ci = unit(rng) * static_cast<double>(rows - 1);
    const double cj = unit(rng) * static_cast<double>(cols - 1);
    const double cl = unit(rng) * static_cast<double>(bands - 1);
    const double si = min_spatial * (1.0 + unit(rng));
    const double sj = min_spatial * (1.0 + unit(rng));
    const double sl = min_spectral * (1.0 + unit(rng));
    const double amp = 0.3 + 0.5 * unit(rng);
    for (std::size_t i = 0; i < rows; ++i) {
      const double gi = std::exp(-0.5 * std::pow((static_cast<double>(i) - ci) / si, 2));
      for (std::size_t j = 0; j < cols; ++j) {
        const double gj = std::exp(-0.5 * std::pow((static_cast<double>(j) - cj) / sj, 2));
        for (std::size_t l = 0; l < bands; ++l) {
          const double gl = std::exp(-0.5 * std::pow((static_cast<double>(l) - cl) / sl, 2));
          cube[(i * cols + j) * bands + l] += amp * gi * gj * gl;
        }
      }
    }
  }
  for (double& v : cube) v = std::clamp(v, 0.0, 1.0);
  return cube;
}

Dataset synthetic_dataset(std::size_t count, std::size_t rows, std::size_t cols, std::size_t bands,
                          std::size_t blobs, Rng& rng) {
  Dataset ds;
  ds.rows = rows;
  ds.cols = cols;
  ds.bands = bands;
  ds.scenes.resize(static_cast<Eigen::Index>(rows * cols * bands), static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const auto cube = gen_synthetic_cube(rows, cols, bands, blobs, rng);
    ds.scenes.col(static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::VectorXd>(cube.data(), static_cast<Eigen::Index>(cube.size()));
  }
  return ds;
}

CaFormat format_for_path(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return CaFormat::Csv;
  if (ext == ".pgm") return CaFormat::Pgm;
  return CaFormat::Raw;
}

fs::path plane_file(const fs::path& path, std::size_t shot, std::size_t plane) {
  const std::string ext = path.extension().empty() ? std::string(".csv") : path.extension().string();
  fs::path out = path;
  out.replace_filename(path.stem().string() + "_s" + std::to_string(shot) + "_l" + std::to_string(plane) + ext);
  return out;
}

void save_ca(const fs::path& path, const CodedApertureSet& ca, CaFormat format) {
  switch (format) {
    case CaFormat::Raw: {
      ByteWriter w;
      write_raw_block(w, ca);
      write_file(path, w.str());
      return;
    }
    case CaFormat::Csv: {
      for (std::size_t s = 0; s < ca.shots(); ++s)
        for (std::size_t l = 0; l < ca.planes(); ++l) {
          std::string text;
          for (std::size_t i = 0; i < ca.rows(); ++i) {
            for (std::size_t j = 0; j < ca.cols(); ++j) {
              if (j) text += ',';
              text += format_double(ca.at(s, i, j, l));
            }
            text += '\n';
          }
          write_file(plane_file(path, s, l), text);
        }
      return;
    }
    case CaFormat::Pgm: {
      for (std::size_t s = 0; s < ca.shots(); ++s)
        for (std::size_t l = 0; l < ca.planes(); ++l) {
          std::string bytes = "P5\n" + std::to_string(ca.cols()) + " " + std::to_string(ca.rows()) + "\n255\n";
          for (std::size_t i = 0; i < ca.rows(); ++i)
            for (std::size_t j = 0; j < ca.cols(); ++j) {
              const double v = std::clamp(ca.at(s, i, j, l), 0.0, 1.0);
              bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
            }
          write_file(plane_file(path, s, l), bytes);
        }
      return;
    }
  }
}

CodedApertureSet load_ca(const fs::path& path, CaFormat format) {
  if (format == CaFormat::Raw) {
    ByteReader r(read_file(path));
    CodedApertureSet ca = read_raw_block(r);
    if (r.remaining() != 0) throw FormatError("RAW file has trailing bytes: " + path.string());
    return ca;
  }
  std::size_t shots = 0;
  while (fs::exists(plane_file(path, shots, 0))) ++shots;
  if (shots == 0) throw FormatError("no aperture planes found for " + path.string());
  std::size_t planes = 0;
  while (fs::exists(plane_file(path, 0, planes))) ++planes;

  std::vector<std::vector<double>> per_plane;  // (s, l) order
  std::size_t rows = 0, cols = 0;
  for (std::size_t s = 0; s < shots; ++s)
    for (std::size_t l = 0; l < planes; ++l) {
      const fs::path file = plane_file(path, s, l);
      std::vector<double> flat;
      std::size_t r = 0, c = 0;
      if (format == CaFormat::Csv) {
        const auto grid = read_csv_plane(file);
        r = grid.size();
        c = grid.front().size();
        for (const auto& row : grid) flat.insert(flat.end(), row.begin(), row.end());
      } else {
        const auto img = read_pgm(file);
        r = img.height;
        c = img.width;
        for (unsigned char p : img.pixels) flat.push_back(p / 255.0);
      }
      if (s == 0 && l == 0) {
        rows = r;
        cols = c;
      } else if (r != rows || c != cols) {
        throw FormatError("aperture plane " + file.string() + " has a different size");
      }
      per_plane.push_back(std::move(flat));
    }
  CodedApertureSet ca({shots, rows, cols, planes});
  for (std::size_t s = 0; s < shots; ++s)
    for (std::size_t l = 0; l < planes; ++l) {
      const auto& flat = per_plane[s * planes + l];
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) ca.at(s, i, j, l) = flat[i * cols + j];
    }
  return ca;
}

CodedApertureSet load_pgm_image(const fs::path& path) {
  const auto img = read_pgm(path);
  std::vector<double> values;
  values.reserve(img.pixels.size());
  for (unsigned char p : img.pixels) values.push_back(p / 255.0);
  return CodedApertureSet({1, img.height, img.width, 1}, std::move(values));
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  ByteWriter w;
  write_raw_block(w, ckpt.ca);
  w.bytes("APTD");
  w.u32(kCheckpointVersion);
  w.u32(ckpt.sensing == SensingKind::Spc ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(ckpt.bands));
  w.u32(ckpt.task == TaskKind::Reconstruction ? 0 : 1);
  w.f64(ckpt.input_scale);
  const auto& layers = ckpt.net.layers();
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& layer : layers) {
    w.u32(static_cast<std::uint32_t>(layer.outputs()));
    w.u32(static_cast<std::uint32_t>(layer.inputs()));
    w.u32(static_cast<std::uint32_t>(layer.activation));
  }
  for (double v : ckpt.net.parameters()) w.f64(v);
  write_file(path, w.str());
}

Checkpoint load_checkpoint(const fs::path& path) {
  ByteReader r(read_file(path));
  Checkpoint ckpt;
  ckpt.ca = read_raw_block(r);
  r.expect_magic("APTD");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto sensing = r.u32();
  if (sensing > 1) throw FormatError("unknown sensing kind in checkpoint");
  ckpt.sensing = sensing == 0 ? SensingKind::Spc : SensingKind::Cassi;
  ckpt.bands = r.u32();
  const auto task = r.u32();
  if (task > 1) throw FormatError("unknown task kind in checkpoint");
  ckpt.task = task == 0 ? TaskKind::Reconstruction : TaskKind::Classification;
  ckpt.input_scale = r.f64();
  const auto count = r.u32();
  if (count == 0) throw FormatError("checkpoint has no decoder layers");
  std::vector<DenseLayer> layers;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto out = r.u32();
    const auto in = r.u32();
    const auto act = r.u32();
    if (act > static_cast<std::uint32_t>(Activation::Softmax)) throw FormatError("unknown activation in checkpoint");
    layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out), static_cast<Activation>(act)});
  }
  std::size_t total = 0;
  for (const auto& l : layers) total += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  if (r.remaining() != total * 8) throw FormatError("checkpoint parameter block size mismatch");
  std::vector<double> theta(total);
  for (double& v : theta) v = r.f64();
  try {
    ckpt.net = DecoderNetwork(std::move(layers));
  } catch (const Error& e) {
    throw FormatError(std::string("invalid decoder in checkpoint: ") + e.what());
  }
  ckpt.net.set_parameters(theta);
  return ckpt;
}

SensingModel sensing_for(const Checkpoint& ckpt) {
  if (ckpt.sensing == SensingKind::Spc) return SensingModel::spc(ckpt.ca.shots(), ckpt.ca.rows(), ckpt.ca.cols());
  return SensingModel::cassi(ckpt.ca.shots(), ckpt.ca.rows(), ckpt.ca.cols(), ckpt.bands);
}

}  // namespace caed
