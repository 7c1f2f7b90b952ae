#include "fcs/evaluate.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fcs/errors.hpp"
#include "fcs/image_io.hpp"
#include "fcs/metrics.hpp"

namespace fcs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Tensor side_by_side(const Tensor& a, const Tensor& b, std::size_t gap = 2) {
  const Shape s = a.shape();
  Tensor out(Shape{1, 1, s.h, 2 * s.w + gap}, 1.0);
  for (std::size_t i = 0; i < s.h; ++i)
    for (std::size_t j = 0; j < s.w; ++j) {
      out.at(0, 0, i, j) = a.at(0, 0, i, j);
      out.at(0, 0, i, s.w + gap + j) = b.at(0, 0, i, j);
    }
  return out;
}

json row_json(const MetricsRow& r) {
  return {{"name", r.name},
          {"psnr", r.psnr},
          {"ssim", r.ssim},
          {"blockiness", r.blockiness},
          {"achieved_rate", r.achieved_rate}};
}

void csv_row(std::ostream& out, const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f\n", r.name.c_str(), r.psnr, r.ssim, r.blockiness,
                r.achieved_rate);
  out << buf;
}

}  // namespace

MetricsRow mean_row(const std::vector<MetricsRow>& rows) {
  MetricsRow m;
  m.name = "mean";
  if (rows.empty()) return m;
  for (const MetricsRow& r : rows) {
    m.psnr += r.psnr;
    m.ssim += r.ssim;
    m.blockiness += r.blockiness;
    m.achieved_rate += r.achieved_rate;
  }
  const double n = static_cast<double>(rows.size());
  m.psnr /= n;
  m.ssim /= n;
  m.blockiness /= n;
  m.achieved_rate /= n;
  return m;
}

MetricsReport evaluate(Model& model, const std::vector<NamedImage>& corpus, const EvalOptions& options) {
  if (corpus.empty()) throw ConfigError("test corpus is empty");
  MetricsReport report;
  report.arch = std::string(arch_name(model.arch()));
  report.rate = model.config().rate;

  for (const NamedImage& img : corpus) {
    Tensor recon = reconstruct(model, img.image);
    if (options.clamp) recon = clamp(recon, 0.0, 1.0);
    const Shape s = img.image.shape();
    MetricsRow row;
    row.name = img.name;
    row.psnr = psnr(recon, img.image);
    row.ssim = ssim(recon, img.image);
    row.blockiness = blockiness_index(recon, options.blockiness_grid);
    row.achieved_rate = achieved_rate(model.measurer(), s.h, s.w);
    report.rows.push_back(row);
    if (!options.reconstruction_dir.empty()) {
      write_pgm(options.reconstruction_dir / (img.name + "_recon.pgm"), recon);
      write_pgm(options.reconstruction_dir / (img.name + "_pair.pgm"), side_by_side(img.image, recon));
    }
  }
  report.mean = mean_row(report.rows);

  if (has_published_reference(report.rate)) {
    const PublishedTable table = published_reference(report.rate);
    ReferenceDelta d;
    d.method = reference_method(model.arch());
    d.published_psnr = table.psnr(d.method);
    d.delta_psnr = report.mean.psnr - d.published_psnr;
    d.published_ssim = table.ssim(d.method);
    if (d.published_ssim) d.delta_ssim = report.mean.ssim - *d.published_ssim;
    report.reference = d;
  } else {
    report.note = "no published reference at this rate; deltas omitted";
  }
  return report;
}

json to_json(const MetricsReport& report) {
  json rows = json::array();
  for (const MetricsRow& r : report.rows) rows.push_back(row_json(r));
  json doc = {{"arch", report.arch}, {"rate", report.rate}, {"rows", rows}, {"mean", row_json(report.mean)}};
  if (report.reference) {
    const ReferenceDelta& d = *report.reference;
    json ref = {{"method", std::string(method_name(d.method))},
                {"published_mean_psnr", d.published_psnr},
                {"delta_psnr", d.delta_psnr}};
    if (d.published_ssim) {
      ref["published_mean_ssim"] = *d.published_ssim;
      ref["delta_ssim"] = *d.delta_ssim;
    }
    doc["reference"] = ref;
  }
  if (!report.note.empty()) doc["note"] = report.note;
  return doc;
}

std::string to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "name,psnr,ssim,blockiness,achieved_rate\n";
  for (const MetricsRow& r : report.rows) csv_row(out, r);
  csv_row(out, report.mean);
  return out.str();
}

void write_report(const MetricsReport& report, const fs::path& json_path, const fs::path& csv_path) {
  auto write = [](const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
  };
  if (!json_path.empty()) write(json_path, to_json(report).dump(2) + "\n");
  if (!csv_path.empty()) write(csv_path, to_csv(report));
}

std::string comparison_csv(const std::vector<MetricsReport>& reports, const std::vector<std::string>& labels) {
  std::ostringstream out;
  out << "label,arch,rate,psnr,ssim,blockiness,achieved_rate,published_psnr\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const MetricsReport& r = reports[i];
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.6f,%.6f,%.6f,%.6f,", labels.at(i).c_str(), r.arch.c_str(), r.rate,
                  r.mean.psnr, r.mean.ssim, r.mean.blockiness, r.mean.achieved_rate);
    out << buf;
    if (r.reference) {
      std::snprintf(buf, sizeof buf, "%.2f", r.reference->published_psnr);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

json comparison_json(const std::vector<MetricsReport>& reports, const std::vector<std::string>& labels) {
  json rows = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    json row = to_json(reports[i]);
    row.erase("rows");
    row["label"] = labels.at(i);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fcs
