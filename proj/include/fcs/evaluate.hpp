#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fcs/corpus.hpp"
#include "fcs/model.hpp"
#include "fcs/reference.hpp"

namespace fcs {

struct MetricsRow {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  double blockiness = 0.0;
  double achieved_rate = 0.0;
};

/// Published mean of the method this architecture stands in for, and our
/// mean minus it.
struct ReferenceDelta {
  Method method = Method::Proposed;
  double published_psnr = 0.0;
  double delta_psnr = 0.0;
  std::optional<double> published_ssim;
  std::optional<double> delta_ssim;
};

struct MetricsReport {
  std::string arch;
  double rate = 0.0;
  std::vector<MetricsRow> rows;
  MetricsRow mean;  // name "mean"
  std::optional<ReferenceDelta> reference;
  /// Set when reference deltas were left out.
  std::string note;
};

struct EvalOptions {
  std::size_t blockiness_grid = kDefaultBlockSize;
  /// Reconstructions are clamped to [0, 1] before scoring.
  bool clamp = true;
  /// When set, writes <dir>/<name>_recon.pgm and <name>_pair.pgm (original | recon).
  std::filesystem::path reconstruction_dir;
};

/// Arithmetic means of the rows; name "mean".
MetricsRow mean_row(const std::vector<MetricsRow>& rows);

/// Scores `model` on every image. An empty corpus raises ConfigError.
MetricsReport evaluate(Model& model, const std::vector<NamedImage>& corpus, const EvalOptions& options = {});

nlohmann::json to_json(const MetricsReport& report);
/// name,psnr,ssim,blockiness,achieved_rate with a trailing mean row.
std::string to_csv(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& json_path,
                  const std::filesystem::path& csv_path);

/// One mean row per report, labelled `labels[i]`.
std::string comparison_csv(const std::vector<MetricsReport>& reports, const std::vector<std::string>& labels);
nlohmann::json comparison_json(const std::vector<MetricsReport>& reports, const std::vector<std::string>& labels);

}  // namespace fcs
