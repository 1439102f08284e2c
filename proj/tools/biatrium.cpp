// biatrium: command-line front end for the bi-atrial segmentation toolkit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "biatrium/biatrium.hpp"

namespace fs = std::filesystem;
using namespace biatrium;

namespace {

Index3 triple(const std::vector<int>& v, const char* what) {
  if (v.size() != 3) throw Error(Errc::invalid_argument, std::string(what) + " needs exactly 3 values");
  return {v[0], v[1], v[2]};
}

std::vector<int> as_vec(const Index3& v) { return {v[0], v[1], v[2]}; }

void write_any(const Volume& v, const fs::path& path) { write_volume(v, path, wants_gzip(path)); }
void write_any(const LabelMap& m, const fs::path& path) { write_volume(m, path, wants_gzip(path)); }

ClassMap parse_class_map(const std::string& spec) {
  if (spec.empty()) return {};
  ClassMap cm;
  cm.entries.clear();
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto end = std::min(spec.find(',', start), spec.size());
    const std::string item = spec.substr(start, end - start);
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(Errc::invalid_argument, "class map entry '" + item + "' needs name=code");
    cm.entries.push_back({item.substr(0, eq), static_cast<std::uint8_t>(std::stoi(item.substr(eq + 1)))});
    start = end + 1;
  }
  cm.validate();
  return cm;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage bi-atrial segmentation toolkit"};
  app.require_subcommand(1);

  // enhance
  auto* enhance = app.add_subcommand("enhance", "MCLAHE contrast enhancement");
  std::string enh_in, enh_out;
  std::vector<int> enh_kernel;
  MclaheParams enh_params;
  enhance->add_option("--in", enh_in, "input volume (.nii/.nii.gz)")->required();
  enhance->add_option("--out", enh_out, "output volume")->required();
  enhance->add_option("--kernel", enh_kernel, "tile size x,y,z (default: dim/8)")->delimiter(',')->expected(3);
  enhance->add_option("--bins", enh_params.n_bins, "histogram bins")->capture_default_str();
  enhance->add_option("--clip", enh_params.clip_limit, "clip limit in (0,1]")->capture_default_str();
  enhance->callback([&] {
    if (!enh_kernel.empty()) enh_params.kernel_size = triple(enh_kernel, "--kernel");
    write_any(mclahe(read_volume(enh_in), enh_params), enh_out);
  });

  // standardize
  auto* standardize_cmd = app.add_subcommand("standardize", "center pad/crop to a fixed shape");
  std::string std_in, std_out, std_placement;
  std::vector<int> std_shape = as_vec(kStandardShape);
  float std_fill = 0.0f;
  standardize_cmd->add_option("--in", std_in)->required();
  standardize_cmd->add_option("--out", std_out)->required();
  standardize_cmd->add_option("--shape", std_shape, "target x,y,z")->delimiter(',')->expected(3);
  standardize_cmd->add_option("--fill", std_fill, "padding value")->capture_default_str();
  standardize_cmd->add_option("--placement", std_placement, "placement sidecar to write");
  standardize_cmd->callback([&] {
    auto [v, p] = standardize(read_volume(std_in), triple(std_shape, "--shape"), std_fill);
    write_any(v, std_out);
    if (!std_placement.empty()) write_placement(p, std_placement);
    std::cout << placement_to_json(p).dump() << '\n';
  });

  // downsample
  auto* down = app.add_subcommand("downsample", "block-mean downsampling");
  std::string down_in, down_out;
  std::vector<int> down_factors = as_vec(kCoarseFactors);
  down->add_option("--in", down_in)->required();
  down->add_option("--out", down_out)->required();
  down->add_option("--factors", down_factors, "integer factors x,y,z")->delimiter(',')->expected(3);
  down->callback([&] { write_any(downsample_mean(read_volume(down_in), triple(down_factors, "--factors")), down_out); });

  // bbox
  auto* bbox_cmd = app.add_subcommand("bbox", "tight bounding box of mask foreground");
  std::string bbox_in;
  std::vector<int> bbox_classes;
  bbox_cmd->add_option("--in", bbox_in, "label map")->required();
  bbox_cmd->add_option("--classes", bbox_classes, "positive class codes (default: any nonzero)")->delimiter(',');
  bbox_cmd->callback([&] {
    const LabelMap m = read_label_map(bbox_in);
    std::vector<std::uint8_t> cls(bbox_classes.begin(), bbox_classes.end());
    const BBox b = cls.empty() ? bbox_from_mask(m, [](std::uint8_t v) { return v != 0; }) : bbox_from_mask(m, cls);
    std::cout << nlohmann::json{{"lo", b.lo}, {"hi", b.hi}}.dump() << '\n';
  });

  // crop-roi
  auto* crop = app.add_subcommand("crop-roi", "crop a fixed window around a center or a coarse mask");
  std::string crop_in, crop_out, crop_placement, crop_mask;
  std::vector<int> crop_center, crop_window_shape = as_vec(kFineWindow), crop_factors = as_vec(kCoarseFactors);
  int crop_margin = 8;
  bool crop_labels = false;
  crop->add_option("--in", crop_in)->required();
  crop->add_option("--out", crop_out)->required();
  auto* center_opt = crop->add_option("--center", crop_center, "window center x,y,z")->delimiter(',')->expected(3);
  crop->add_option("--coarse-mask", crop_mask, "coarse mask whose box sets the center")->excludes(center_opt);
  crop->add_option("--factors", crop_factors, "coarse-to-input factors")->delimiter(',')->expected(3);
  crop->add_option("--margin", crop_margin, "box margin in input voxels")->capture_default_str();
  crop->add_option("--window", crop_window_shape, "window x,y,z")->delimiter(',')->expected(3);
  crop->add_option("--placement", crop_placement, "placement sidecar to write");
  crop->add_flag("--labels", crop_labels, "input is a label map");
  crop->callback([&] {
    const Shape3 window = triple(crop_window_shape, "--window");
    Shape3 parent_shape;
    LabelMap labels;
    Volume vol;
    if (crop_labels) {
      labels = read_label_map(crop_in);
      parent_shape = labels.shape();
    } else {
      vol = read_volume(crop_in);
      parent_shape = vol.shape();
    }
    Index3 center{parent_shape[0] / 2, parent_shape[1] / 2, parent_shape[2] / 2};
    if (!crop_center.empty()) {
      center = triple(crop_center, "--center");
    } else if (!crop_mask.empty()) {
      const LabelMap coarse = read_label_map(crop_mask);
      const BBox b = bbox_from_mask(coarse, [](std::uint8_t v) { return v != 0; });
      center = scale_bbox(b, triple(crop_factors, "--factors"), crop_margin, parent_shape).center();
    }
    const Placement p = window_placement(parent_shape, center, window);
    if (crop_labels) write_any(extract<std::uint8_t>(labels, p, 0), crop_out);
    else write_any(extract(vol, p, 0.0f), crop_out);
    if (!crop_placement.empty()) write_placement(p, crop_placement);
    std::cout << placement_to_json(p).dump() << '\n';
  });

  // stitch
  auto* stitch_cmd = app.add_subcommand("stitch", "place a cropped label map back into its parent grid(s)");
  std::string stitch_in, stitch_out;
  std::vector<std::string> stitch_placements;
  stitch_cmd->add_option("--in", stitch_in, "child label map")->required();
  stitch_cmd->add_option("--placement", stitch_placements, "placement sidecar(s), innermost first")->required();
  stitch_cmd->add_option("--out", stitch_out)->required();
  stitch_cmd->callback([&] {
    LabelMap m = read_label_map(stitch_in);
    for (const auto& p : stitch_placements) m = stitch(m, read_placement(p));
    write_any(m, stitch_out);
  });

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "per-class Dice and HD95");
  std::string ev_pred, ev_gt, ev_csv, ev_case = "case", ev_classes;
  bool ev_percent = false, ev_full = false;
  eval->add_option("--pred", ev_pred)->required();
  eval->add_option("--gt", ev_gt)->required();
  eval->add_option("--csv", ev_csv, "output CSV (default: stdout)");
  eval->add_option("--case-id", ev_case)->capture_default_str();
  eval->add_option("--classes", ev_classes, "name=code,... (default wall=1,right_atrium=2,left_atrium=3)");
  eval->add_flag("--percent", ev_percent, "report Dice in percent");
  eval->add_flag("--full-region", ev_full, "distances over full regions instead of surfaces");
  eval->callback([&] {
    const auto report = evaluate_case(read_label_map(ev_pred), read_label_map(ev_gt), parse_class_map(ev_classes),
                                      ev_case, ev_full ? PointMode::full_region : PointMode::surface);
    if (ev_csv.empty()) {
      write_metric_csv(std::cout, report, ev_percent);
    } else {
      std::ofstream out(ev_csv);
      if (!out) throw Error(Errc::io, "cannot open '" + ev_csv + "'");
      write_metric_csv(out, report, ev_percent);
    }
  });

  // loss
  auto* loss = app.add_subcommand("loss", "asymmetric loss over probability volumes");
  std::vector<std::string> loss_probs;
  std::string loss_gt;
  AsymLossParams loss_params;
  loss->add_option("--probs", loss_probs, "one probability volume per class (or one foreground channel)");
  loss->add_option("--gt", loss_gt, "label map");
  loss->add_option("--gamma-pos", loss_params.gamma_pos)->capture_default_str();
  loss->add_option("--gamma-neg", loss_params.gamma_neg)->capture_default_str();
  loss->add_option("--margin", loss_params.margin)->capture_default_str();
  loss->add_option("--eps", loss_params.eps)->capture_default_str();
  auto* grad = loss->add_subcommand("grad-check", "finite-difference check of the analytic gradient");
  std::size_t gc_samples = 1000;
  std::uint64_t gc_seed = 7;
  grad->add_option("--samples", gc_samples)->capture_default_str();
  grad->add_option("--seed", gc_seed)->capture_default_str();
  int exit_status = 0;
  grad->callback([&] {
    const auto r = grad_check(gc_samples, gc_seed);
    std::printf("samples=%zu failures=%zu max_rel_error=%.3e\n", r.samples, r.failures, r.max_rel_error);
    if (r.failures != 0) exit_status = 1;
  });
  loss->callback([&] {
    if (grad->parsed()) return;
    if (loss_probs.empty() || loss_gt.empty()) throw CLI::RequiredError("--probs and --gt");
    std::vector<Volume> probs;
    for (const auto& p : loss_probs) probs.push_back(read_volume(p));
    std::printf("%.17g\n", volume_loss(probs, read_label_map(loss_gt), loss_params));
  });

  // run
  auto* run = app.add_subcommand("run", "run the full pipeline from a JSON config");
  std::string run_config;
  int run_workers = 0;
  run->add_option("--config", run_config)->required();
  run->add_option("--workers", run_workers, "parallel cases (overrides config)");
  run->callback([&] {
    auto cfg = read_pipeline_config(run_config);
    if (run_workers > 0) cfg.workers = run_workers;
    const auto result = run_pipeline(cfg);
    for (const auto& c : result.cases) {
      std::cout << c.case_id << ": " << c.status();
      if (!c.ok) std::cout << " (" << c.error << ")";
      std::cout << '\n';
    }
    std::cout << "summary: " << result.summary_csv.string() << '\n';
    if (!result.all_ok()) exit_status = 1;
  });

  // phantom
  auto* phantom = app.add_subcommand("phantom", "generate a synthetic atrium phantom");
  std::string ph_spec, ph_out;
  phantom->add_option("--spec", ph_spec, "phantom spec JSON (omit for defaults)");
  phantom->add_option("--out", ph_out, "output directory")->required();
  phantom->callback([&] {
    PhantomSpec spec;
    if (!ph_spec.empty()) {
      std::ifstream in(ph_spec);
      if (!in) throw Error(Errc::io, "cannot open '" + ph_spec + "'");
      spec = phantom_spec_from_json(nlohmann::json::parse(in));
    }
    const auto [image, gt] = generate_phantom(spec);
    fs::create_directories(ph_out);
    write_volume(image, fs::path(ph_out) / "image.nii.gz", true);
    write_volume(gt, fs::path(ph_out) / "gt.nii.gz", true);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "biatrium: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "biatrium: " << e.what() << '\n';
    return 2;
  }
  return exit_status;
}
