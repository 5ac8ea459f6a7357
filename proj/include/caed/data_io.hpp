#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

#include "caed/ca_model.hpp"
#include "caed/decoder.hpp"
#include "caed/sensing.hpp"

namespace caed {

enum class TaskKind { Reconstruction, Classification };
enum class Split { Train, Test };

/// Scenes stored column-wise (scene_size x count), values in [0, 1]. Cubes
/// use the band index fastest: entry (i, j, l) sits at (i * cols + j) * bands + l.
struct Dataset {
  Eigen::MatrixXd scenes;
  std::vector<int> labels;  // empty for reconstruction-only data
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t bands = 1;
  Split split = Split::Train;

  std::size_t size() const { return static_cast<std::size_t>(scenes.cols()); }
  std::size_t scene_size() const { return rows * cols * bands; }
  std::span<const double> scene(std::size_t k) const {
    return {scenes.data() + k * scene_size(), scene_size()};
  }

  /// First `count` samples (all when count is 0 or exceeds the size).
  Dataset head(std::size_t count) const;
};

/// Parses an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled by 1/255.
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Sum of `blobs` separable Gaussian bumps (spatial x spectral), clamped to [0, 1].
std::vector<double> gen_synthetic_cube(std::size_t rows, std::size_t cols, std::size_t bands,
                                       std::size_t blobs, Rng& rng);

Dataset synthetic_dataset(std::size_t count, std::size_t rows, std::size_t cols, std::size_t bands,
                          std::size_t blobs, Rng& rng);

enum class CaFormat { Csv, Pgm, Raw };

/// Format implied by the file extension (.csv, .pgm, anything else is RAW).
CaFormat format_for_path(const std::filesystem::path& path);

/// RAW: "APTR", u32 version, u32 S, M, N, L (little-endian), then float64
/// little-endian values in storage order.
/// CSV/PGM: one file per (shot, plane) named <stem>_s<s>_l<l>.<ext> next to `path`.
void save_ca(const std::filesystem::path& path, const CodedApertureSet& ca, CaFormat format);
CodedApertureSet load_ca(const std::filesystem::path& path, CaFormat format);

/// File written for (shot, plane) by the CSV and PGM writers.
std::filesystem::path plane_file(const std::filesystem::path& path, std::size_t shot, std::size_t plane);

/// Reads a single binary PGM (P5, maxval 255) into a 1 x rows x cols x 1 array scaled by 1/255.
CodedApertureSet load_pgm_image(const std::filesystem::path& path);

/// Trained system: acquisition aperture, decoder and the metadata needed to
/// rebuild the sensing model.
struct Checkpoint {
  CodedApertureSet ca;
  DecoderNetwork net;
  SensingKind sensing = SensingKind::Spc;
  std::size_t bands = 1;
  TaskKind task = TaskKind::Classification;
  double input_scale = 1.0;

  bool operator==(const Checkpoint&) const = default;
};

/// RAW aperture block followed by "APTD", u32 version, u32 sensing kind,
/// bands, task, float64 input scale, u32 layer count, per-layer (outputs, inputs, activation) and the
/// float64 parameters in DecoderNetwork::parameters() order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

SensingModel sensing_for(const Checkpoint& checkpoint);

}  // namespace caed
