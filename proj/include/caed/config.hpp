#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "caed/ca_model.hpp"
#include "caed/data_io.hpp"
#include "caed/decoder.hpp"
#include "caed/sensing.hpp"
#include "caed/trainer.hpp"

namespace caed {

struct TaskDescription {
  TaskKind kind = TaskKind::Classification;
  std::vector<std::size_t> hidden;
  Activation hidden_activation = Activation::Relu;
  std::size_t classes = 10;
};

struct SensingDescription {
  SensingKind kind = SensingKind::Spc;
  std::size_t shots = 1;
  std::size_t rows = 28;
  std::size_t cols = 28;
  std::size_t bands = 1;
};

struct CaDescription {
  ParamKind param = ParamKind::Dense;
  std::size_t kernel_rows = 0;  // Kronecker/Colored tile size
  std::size_t kernel_cols = 0;
  std::size_t filters = 0;      // Colored only
  CaInit init = CaInit::Binary01;
};

struct DatasetDescription {
  std::string kind = "mnist";  // "mnist" or "synthetic"
  std::string dir = "data/mnist";
  std::size_t train = 0;  // 0 keeps every sample (mnist) or picks the default count (synthetic)
  std::size_t test = 0;
  std::size_t blobs = 3;
};

/// Everything a run needs: the model description plus the training setup.
struct ExperimentConfig {
  TaskDescription task;
  SensingDescription sensing;
  CaDescription ca;
  TrainConfig train;
  DatasetDescription dataset;
};

/// Parses a JSON document. Throws ConfigError naming the offending key path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON with every default spelled out; parse_config(to_json(c))
/// reproduces c.
std::string to_json(const ExperimentConfig& config);

/// Independent generator stream derived from a run seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

SensingModel make_sensing(const ExperimentConfig& config);
CaParameterization make_parameterization(const ExperimentConfig& config, Rng& rng);
DecoderNetwork make_network(const ExperimentConfig& config, const SensingModel& sensing, Rng& rng);

struct Datasets {
  Dataset train;
  Dataset test;
};

/// MNIST paths are resolved against `data_dir` when given, else against the
/// configured directory.
Datasets load_datasets(const ExperimentConfig& config, const std::optional<std::filesystem::path>& data_dir);

}  // namespace caed
