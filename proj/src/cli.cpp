#include "caed/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "caed/config.hpp"
#include "caed/data_io.hpp"
#include "caed/error.hpp"
#include "caed/metrics.hpp"
#include "caed/trainer.hpp"

namespace caed {

namespace fs = std::filesystem;

namespace {

constexpr double kGradcheckLimit = 1e-4;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

std::vector<double> parse_levels(const std::string& spec) {
  std::vector<double> levels;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw DomainError("cannot parse level '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) throw DomainError("cannot parse level '" + item + "'");
    levels.push_back(v);
  }
  if (levels.empty()) throw DomainError("no levels given");
  return levels;
}

MetricReport report_for(const Checkpoint& ckpt, const Dataset& test, double peak, const std::vector<double>& levels) {
  const SensingModel sensing = sensing_for(ckpt);
  if (test.scene_size() != sensing.scene_size()) throw ShapeError("dataset scenes do not match the checkpoint");
  const Eigen::MatrixXd outputs = predict(ckpt.ca, sensing, ckpt.net, ckpt.input_scale, test.scenes);
  MetricReport report;
  if (ckpt.task == TaskKind::Classification) {
    if (test.labels.size() != test.size()) throw ShapeError("classification evaluation needs labels");
    report.accuracy = dataset_accuracy(outputs, test.labels);
  } else {
    double psnr_sum = 0.0;
    std::size_t psnr_count = 0;
    double sam_sum = 0.0;
    std::size_t sam_count = 0;
    const std::size_t bands = test.bands;
    for (std::size_t k = 0; k < test.size(); ++k) {
      const auto ref = test.scene(k);
      const std::span<const double> est{outputs.col(static_cast<Eigen::Index>(k)).data(), ref.size()};
      const double p = psnr(ref, est, peak);
      if (std::isfinite(p)) {
        psnr_sum += p;
        ++psnr_count;
      }
      if (bands > 1) {
        for (std::size_t px = 0; px < test.rows * test.cols; ++px) {
          const auto a = ref.subspan(px * bands, bands);
          const auto b = est.subspan(px * bands, bands);
          const bool zero_a = std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
          const bool zero_b = std::all_of(b.begin(), b.end(), [](double v) { return v == 0.0; });
          if (zero_a || zero_b) continue;
          sam_sum += sam(a, b);
          ++sam_count;
        }
      }
    }
    if (psnr_count) report.psnr_db = psnr_sum / static_cast<double>(psnr_count);
    if (sam_count) report.sam_radians = sam_sum / static_cast<double>(sam_count);
  }
  report.binarization_residual = binarization_residual(ckpt.ca, levels);
  if (ckpt.ca.shots() >= 2) report.correlation_value = correlation_value(ckpt.ca);
  report.compression_ratio = compression_ratio(sensing);
  for (std::size_t s = 0; s < ckpt.ca.shots(); ++s) report.transmittance.push_back(transmittance_of(ckpt.ca, s));
  return report;
}

int cmd_design(const std::string& config_path, const std::string& out_dir, const std::optional<std::string>& data_dir,
               bool quiet, std::ostream& out) {
  const ExperimentConfig cfg = load_config(config_path);
  const Datasets data = load_datasets(cfg, data_dir ? std::optional<fs::path>(*data_dir) : std::nullopt);
  const SensingModel sensing = make_sensing(cfg);
  Rng init_rng(stream_seed(cfg.train.seed, 1));
  CaParameterization param = make_parameterization(cfg, init_rng);
  DecoderNetwork net = make_network(cfg, sensing, init_rng);

  TrainResult result = train_e2e(cfg.train, data.train, std::move(param), sensing, std::move(net), quiet ? nullptr : &out);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  Checkpoint ckpt{acquisition_ca(cfg.train, result.param), result.net, cfg.sensing.kind, cfg.sensing.bands,
                  cfg.task.kind, cfg.train.input_scale};
  save_checkpoint(dir / "checkpoint.bin", ckpt);
  write_text(dir / "history.csv", result.history.csv());
  save_ca(dir / "ca.raw", ckpt.ca, CaFormat::Raw);
  save_ca(dir / "ca.pgm", ckpt.ca, CaFormat::Pgm);
  write_text(dir / "config.json", to_json(cfg));

  const MetricReport report = report_for(ckpt, data.test, 1.0, cfg.train.levels_for_residual());
  write_text(dir / "metrics.csv", MetricReport::csv_header() + "\n" + report.csv_row("test") + "\n");
  if (report.accuracy) out << "test accuracy " << *report.accuracy << '\n';
  if (report.psnr_db) out << "test psnr " << *report.psnr_db << " dB\n";
  return 0;
}

Dataset evaluation_set(const std::string& spec, const std::optional<std::string>& data_dir) {
  const fs::path path(spec);
  if (fs::is_directory(path)) {
    Dataset ds = load_mnist_idx(path / "t10k-images-idx3-ubyte", path / "t10k-labels-idx1-ubyte");
    ds.split = Split::Test;
    return ds;
  }
  if (path.extension() == ".json") {
    return load_datasets(load_config(path), data_dir ? std::optional<fs::path>(*data_dir) : std::nullopt).test;
  }
  throw ConfigError("--dataset must be a directory of MNIST IDX files or a config .json: " + spec);
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& dataset, const std::string& out_dir,
                 const std::optional<std::string>& data_dir, double peak, const std::string& levels,
                 std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Dataset test = evaluation_set(dataset, data_dir);
  const MetricReport report = report_for(ckpt, test, peak, parse_levels(levels));
  const std::string csv = MetricReport::csv_header() + "\n" + report.csv_row("test") + "\n";
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "metrics.csv", csv);
  out << csv;
  return 0;
}

int cmd_gradcheck(const std::string& config_path, const std::optional<std::string>& data_dir, std::size_t samples,
                  std::ostream& out) {
  const ExperimentConfig cfg = load_config(config_path);
  const Datasets data = load_datasets(cfg, data_dir ? std::optional<fs::path>(*data_dir) : std::nullopt);
  const SensingModel sensing = make_sensing(cfg);
  Rng init_rng(stream_seed(cfg.train.seed, 1));
  const CaParameterization param = make_parameterization(cfg, init_rng);
  const DecoderNetwork net = make_network(cfg, sensing, init_rng);
  const Dataset batch = data.train.head(samples);

  const auto report = gradient_check(cfg.train, sensing, param, net, batch.scenes, batch.labels);
  bool ok = true;
  out << "group,size,max_rel_error\n";
  for (const auto& g : report) {
    char line[128];
    std::snprintf(line, sizeof line, "%s,%zu,%.3e\n", g.name.c_str(), g.size, g.max_rel_error);
    out << line;
    ok = ok && g.max_rel_error <= kGradcheckLimit;
  }
  return ok ? 0 : 1;
}

int cmd_simulate(const std::string& ca_path, const std::string& scene_path, const std::string& snr,
                 const std::string& out_path, const std::optional<std::string>& sensing_kind, std::uint64_t seed) {
  const CodedApertureSet ca = load_ca(ca_path, format_for_path(ca_path));
  const CodedApertureSet scene = format_for_path(scene_path) == CaFormat::Pgm
                                     ? load_pgm_image(scene_path)
                                     : load_ca(scene_path, format_for_path(scene_path));
  if (scene.shots() != 1) throw ShapeError("scene file must hold a single M x N x L cube");
  std::string kind = sensing_kind.value_or(scene.planes() > 1 ? "cassi" : "spc");
  const SensingModel model = kind == "spc"
                                 ? SensingModel::spc(ca.shots(), scene.rows(), scene.cols())
                                 : SensingModel::cassi(ca.shots(), scene.rows(), scene.cols(), scene.planes());
  if (kind == "spc" && scene.planes() != 1) throw ShapeError("spc needs a single-band scene");

  std::optional<double> snr_db;
  if (snr != "none") {
    std::size_t used = 0;
    try {
      snr_db = std::stod(snr, &used);
    } catch (const std::exception&) {
      throw DomainError("--snr must be a number or 'none'");
    }
    if (used != snr.size()) throw DomainError("--snr must be a number or 'none'");
  }
  const Measurement g = forward(model, ca, scene.data());
  Rng rng(seed);
  std::vector<double> values;
  for (std::size_t s = 0; s < g.shots; ++s) {
    const auto noisy = add_measurement_noise(g.shot(s), snr_db, rng);
    values.insert(values.end(), noisy.begin(), noisy.end());
  }
  const CaShape shape = model.kind() == SensingKind::Spc ? CaShape{g.shots, 1, 1, 1}
                                                          : CaShape{g.shots, model.rows(), model.detector_cols(), 1};
  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_ca(out, CodedApertureSet(shape, std::move(values)), format_for_path(out));
  return 0;
}

int cmd_export(const std::string& checkpoint_path, const std::string& levels, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const CodedApertureSet q = quantize_for_export(ckpt.ca, parse_levels(levels));
  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_ca(out, q, format_for_path(out));
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coded-aperture and decoder design"};
  app.require_subcommand(1);

  std::string config, out_dir, checkpoint, dataset, levels = "0,1", ca, scene, snr = "none", out_file;
  std::optional<std::string> data_dir, sensing_kind;
  bool quiet = false;
  double peak = 1.0;
  std::size_t samples = 4;
  std::uint64_t seed = 0;

  auto* design = app.add_subcommand("design", "Train aperture and decoder from a config");
  design->add_option("--config", config, "Config JSON")->required();
  design->add_option("--out", out_dir, "Output directory")->required();
  design->add_option("--data-dir", data_dir, "Directory holding the MNIST IDX files");
  design->add_flag("--quiet", quiet, "Suppress per-epoch progress");

  auto* evaluate = app.add_subcommand("evaluate", "Metrics of a checkpoint on a test split");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--dataset", dataset, "MNIST directory or config JSON")->required();
  evaluate->add_option("--out", out_dir, "Output directory")->required();
  evaluate->add_option("--data-dir", data_dir, "MNIST directory used by a config dataset");
  evaluate->add_option("--peak", peak, "PSNR peak value");
  evaluate->add_option("--levels", levels, "Levels for the binarization residual");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  gradcheck->add_option("--config", config, "Config JSON")->required();
  gradcheck->add_option("--data-dir", data_dir, "Directory holding the MNIST IDX files");
  gradcheck->add_option("--samples", samples, "Batch size of the check")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "Measurements of a scene through an aperture");
  simulate->add_option("--ca", ca, "Aperture file (.raw or .csv)")->required();
  simulate->add_option("--scene", scene, "Scene file (.raw cube or .pgm image)")->required();
  simulate->add_option("--snr", snr, "SNR in dB, or 'none'");
  simulate->add_option("--out", out_file, "Measurement file (.raw or .csv)")->required();
  simulate->add_option("--sensing", sensing_kind, "spc or cassi")->check(CLI::IsMember({"spc", "cassi"}));
  simulate->add_option("--seed", seed, "Noise seed");

  auto* exporter = app.add_subcommand("export", "Quantized aperture files from a checkpoint");
  exporter->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  exporter->add_option("--levels", levels, "Comma-separated levels");
  exporter->add_option("--out", out_file, "Output file (.raw, .csv or .pgm)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*design) return cmd_design(config, out_dir, data_dir, quiet, out);
    if (*evaluate) return cmd_evaluate(checkpoint, dataset, out_dir, data_dir, peak, levels, out);
    if (*gradcheck) return cmd_gradcheck(config, data_dir, samples, out);
    if (*simulate) return cmd_simulate(ca, scene, snr, out_file, sensing_kind, seed);
    if (*exporter) return cmd_export(checkpoint, levels, out_file);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace caed
