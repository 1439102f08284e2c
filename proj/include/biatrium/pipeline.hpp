#pragma once

// Three-stage driver: enhance + standardize, coarse ROI on a block-averaged
// grid, fine multi-class segmentation in a fixed window, stitched back to the
// input grid.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "biatrium/backend.hpp"
#include "biatrium/error.hpp"
#include "biatrium/geometry.hpp"
#include "biatrium/grid.hpp"
#include "biatrium/mclahe.hpp"
#include "biatrium/metrics.hpp"
#include "biatrium/nifti.hpp"
#include "biatrium/placement_io.hpp"
#include "biatrium/report.hpp"

namespace biatrium {

struct CaseInput {
  std::string id;
  fs::path image;
  std::optional<fs::path> ground_truth;
};

struct PipelineConfig {
  std::vector<CaseInput> cases;
  fs::path output_dir = "out";
  Shape3 standard_shape = kStandardShape;
  Index3 coarse_factors = kCoarseFactors;
  Shape3 fine_window = kFineWindow;
  std::optional<MclaheParams> mclahe = MclaheParams{};  // nullopt disables enhancement
  BackendSpec coarse_backend;
  BackendSpec fine_backend;
  ClassMap class_map;
  int bbox_margin_vox = 8;
  int workers = 1;

  Shape3 coarse_shape() const {
    return {standard_shape[0] / coarse_factors[0], standard_shape[1] / coarse_factors[1],
            standard_shape[2] / coarse_factors[2]};
  }

  void validate() const {
    auto fail = [](const std::string& key, const std::string& msg) { throw Error(Errc::bad_config, key + ": " + msg); };
    for (int i = 0; i < 3; ++i) {
      if (standard_shape[i] < 1) fail("standard_shape", "must be positive");
      if (fine_window[i] < 1) fail("fine_window", "must be positive");
      if (coarse_factors[i] < 1) fail("coarse_factors", "must be positive");
      if (standard_shape[i] % coarse_factors[i] != 0) fail("coarse_factors", "must divide standard_shape");
    }
    if (bbox_margin_vox < 0) fail("bbox_margin_vox", "must be >= 0");
    if (workers < 1) fail("workers", "must be >= 1");
    if (mclahe) mclahe->validate();
    coarse_backend.validate();
    fine_backend.validate();
    class_map.validate();
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const std::string key = "cases[" + std::to_string(i) + "]";
      if (cases[i].id.empty()) fail(key + ".id", "must be non-empty");
      if (cases[i].id.find_first_of("/\\") != std::string::npos) fail(key + ".id", "must not contain path separators");
      for (std::size_t j = 0; j < i; ++j)
        if (cases[j].id == cases[i].id) fail(key + ".id", "duplicate case id '" + cases[i].id + "'");
    }
  }
};

namespace detail {

// Reads a JSON config while tracking the key path for error messages and
// rejecting unknown keys.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw Error(Errc::bad_config, path_ + ": " + msg); }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.push_back(key);
    return j_.contains(key);
  }

  const nlohmann::json& at(const std::string& key) {
    if (!has(key)) throw Error(Errc::bad_config, key_path(key) + ": missing required key");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    try {
      return at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::bad_config, key_path(key) + ": wrong type");
    }
  }

  template <typename T>
  void maybe(const std::string& key, T& out) {
    if (has(key)) out = get<T>(key);
  }

  void reject_unknown() const {
    for (const auto& [k, _] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
        throw Error(Errc::bad_config, key_path(k) + ": unknown key");
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

inline BackendSpec parse_backend(const nlohmann::json& j, const std::string& where, const fs::path& base) {
  ConfigReader r(j, where);
  BackendSpec spec;
  const auto kind = r.get<std::string>("kind");
  if (kind == "external-command") {
    spec.kind = BackendKind::external_command;
    spec.command_template = r.get<std::string>("command");
    r.maybe("timeout_s", spec.timeout_s);
  } else if (kind == "threshold") {
    spec.kind = BackendKind::threshold;
    r.maybe("threshold", spec.threshold);
  } else if (kind == "copy-file") {
    spec.kind = BackendKind::copy_file;
    spec.source_path = resolve(base, r.get<std::string>("source_path")).string();
  } else {
    throw Error(Errc::bad_config, r.key_path("kind") + ": unknown backend kind '" + kind + "'");
  }
  r.reject_unknown();
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(Errc::bad_config, where + ": " + e.what());
  }
  return spec;
}

}  // namespace detail

// Relative paths resolve against `base_dir`.
inline PipelineConfig parse_pipeline_config(const nlohmann::json& j, const fs::path& base_dir = {}) {
  detail::ConfigReader r(j, "config");
  PipelineConfig cfg;

  const auto& cases = r.at("cases");
  if (!cases.is_array()) throw Error(Errc::bad_config, "config.cases: expected an array");
  for (std::size_t i = 0; i < cases.size(); ++i) {
    detail::ConfigReader c(cases[i], "config.cases[" + std::to_string(i) + "]");
    CaseInput in;
    in.id = c.get<std::string>("id");
    in.image = detail::resolve(base_dir, c.get<std::string>("image"));
    if (c.has("gt")) in.ground_truth = detail::resolve(base_dir, c.get<std::string>("gt"));
    c.reject_unknown();
    cfg.cases.push_back(std::move(in));
  }
  cfg.output_dir = detail::resolve(base_dir, r.get<std::string>("output_dir"));
  r.maybe("standard_shape", cfg.standard_shape);
  r.maybe("coarse_factors", cfg.coarse_factors);
  r.maybe("fine_window", cfg.fine_window);
  r.maybe("bbox_margin_vox", cfg.bbox_margin_vox);
  r.maybe("workers", cfg.workers);

  if (r.has("mclahe")) {
    const auto& m = r.at("mclahe");
    if (m.is_boolean()) {
      if (!m.get<bool>()) cfg.mclahe.reset();
    } else {
      detail::ConfigReader mr(m, "config.mclahe");
      MclaheParams p;
      if (mr.has("kernel_size")) p.kernel_size = mr.get<Index3>("kernel_size");
      mr.maybe("n_bins", p.n_bins);
      mr.maybe("clip_limit", p.clip_limit);
      mr.reject_unknown();
      cfg.mclahe = p;
    }
  }
  cfg.coarse_backend = detail::parse_backend(r.at("coarse_backend"), "config.coarse_backend", base_dir);
  cfg.fine_backend = detail::parse_backend(r.at("fine_backend"), "config.fine_backend", base_dir);

  if (r.has("class_map")) {
    const auto& cm = r.at("class_map");
    if (!cm.is_array()) throw Error(Errc::bad_config, "config.class_map: expected an array of {name, code}");
    cfg.class_map.entries.clear();
    for (std::size_t i = 0; i < cm.size(); ++i) {
      detail::ConfigReader e(cm[i], "config.class_map[" + std::to_string(i) + "]");
      const auto code = e.get<int>("code");
      if (code < 1 || code > 255) e.fail("code must lie in 1..255");
      cfg.class_map.entries.push_back({e.get<std::string>("name"), static_cast<std::uint8_t>(code)});
      e.reject_unknown();
    }
  }
  r.reject_unknown();
  cfg.validate();
  return cfg;
}

inline PipelineConfig read_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_config, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_pipeline_config(j, path.parent_path());
}

struct CaseResult {
  std::string case_id;
  bool ok = false;
  std::string error;
  std::vector<std::string> flags;  // e.g. "coarse_empty", "roi_exceeds_window"
  fs::path mask_path;
  Placement standardize_placement;
  Placement crop_placement;
  std::optional<BBox> roi_box;  // on the standard grid, margin included
  std::map<std::string, double> timings_ms;
  int coarse_exit_code = 0;
  int fine_exit_code = 0;
  std::optional<MetricReport> metrics;

  std::string status() const {
    if (!ok) return "failed";
    return std::find(flags.begin(), flags.end(), "coarse_empty") != flags.end() ? "ok_fallback" : "ok";
  }
};

struct PipelineResult {
  std::vector<CaseResult> cases;
  fs::path summary_csv;
  bool all_ok() const {
    return std::all_of(cases.begin(), cases.end(), [](const CaseResult& c) { return c.ok; });
  }
};

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}
  template <typename Fn>
  auto operator()(const std::string& stage, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      std::map<std::string, double>& sink;
      std::string stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        sink[stage] += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
    } rec{sink_, stage, t0};
    return fn();
  }

 private:
  std::map<std::string, double>& sink_;
};

inline nlohmann::json case_result_json(const CaseResult& r) {
  nlohmann::json j;
  j["case_id"] = r.case_id;
  j["status"] = r.status();
  if (!r.ok) j["error"] = r.error;
  j["flags"] = r.flags;
  if (r.ok) {
    j["mask"] = r.mask_path.filename().string();
    j["standardize_placement"] = placement_to_json(r.standardize_placement);
    j["crop_placement"] = placement_to_json(r.crop_placement);
    if (r.roi_box) j["roi_box"] = {{"lo", r.roi_box->lo}, {"hi", r.roi_box->hi}};
    j["coarse_backend_exit"] = r.coarse_exit_code;
    j["fine_backend_exit"] = r.fine_exit_code;
  }
  return j;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open '" + path.string() + "' for writing");
  out << text;
}

}  // namespace detail

// Runs all three stages for one case; failures are captured in the result.
inline CaseResult run_case(const PipelineConfig& cfg, const CaseInput& input) {
  CaseResult res;
  res.case_id = input.id;
  const fs::path case_dir = cfg.output_dir / input.id;
  detail::StageTimer timed(res.timings_ms);
  try {
    fs::create_directories(case_dir);
    const Volume original = timed("read", [&] { return read_volume(input.image); });
    require_finite(original);

    const Volume enhanced =
        timed("mclahe", [&] { return cfg.mclahe ? mclahe(original, *cfg.mclahe) : original; });

    auto [standard, std_place] = timed("standardize", [&] { return standardize(enhanced, cfg.standard_shape, 0.0f); });
    res.standardize_placement = std_place;

    const Volume coarse = timed("downsample", [&] { return downsample_mean(standard, cfg.coarse_factors); });

    // Reference masks (copy-file backends) live on the original input grid.
    const auto to_standard = [&](const LabelMap& m) { return extract<std::uint8_t>(m, std_place, 0); };
    BackendContext coarse_ctx{input.id, [&](const LabelMap& m) {
                                return downsample_any(to_standard(m), cfg.coarse_factors,
                                                      [](std::uint8_t v) { return v != 0; });
                              },
                              "coarse"};
    const auto coarse_out = timed("coarse_backend", [&] {
      return invoke_backend(cfg.coarse_backend, coarse, cfg.coarse_shape(), coarse_ctx);
    });
    res.coarse_exit_code = coarse_out.exit_code;
    write_volume(coarse_out.labels, case_dir / "coarse_mask.nii.gz", true);

    const Index3 center = timed("roi", [&] {
      try {
        const BBox coarse_box = bbox_from_mask(coarse_out.labels, [](std::uint8_t v) { return v != 0; });
        const BBox roi = scale_bbox(coarse_box, cfg.coarse_factors, cfg.bbox_margin_vox, cfg.standard_shape);
        res.roi_box = roi;
        const auto ext = roi.extent();
        for (int i = 0; i < 3; ++i)
          if (ext[i] > cfg.fine_window[i]) {
            res.flags.push_back("roi_exceeds_window");
            break;
          }
        return roi.center();
      } catch (const Error& e) {
        if (e.code() != Errc::no_foreground) throw;
        res.flags.push_back("coarse_empty");
        return Index3{cfg.standard_shape[0] / 2, cfg.standard_shape[1] / 2, cfg.standard_shape[2] / 2};
      }
    });

    auto [fine, crop_place] = crop_window(standard, center, cfg.fine_window, 0.0f);
    res.crop_placement = crop_place;

    BackendContext fine_ctx{input.id,
                            [&](const LabelMap& m) { return extract<std::uint8_t>(to_standard(m), crop_place, 0); },
                            "fine"};
    const auto fine_out = timed("fine_backend", [&] {
      return invoke_backend(cfg.fine_backend, fine, cfg.fine_window, fine_ctx);
    });
    res.fine_exit_code = fine_out.exit_code;
    require_labels_in(fine_out.labels, cfg.class_map, "fine backend output");

    LabelMap full = timed("stitch", [&] {
      LabelMap on_standard = stitch(fine_out.labels, crop_place);
      LabelMap on_input = stitch(on_standard, std_place);
      on_input.set_spacing(original.spacing());
      on_input.set_orientation(original.orientation());
      return on_input;
    });

    timed("write", [&] {
      res.mask_path = case_dir / "mask.nii.gz";
      write_volume(full, res.mask_path, true);
      write_placement(std_place, case_dir / "standardize_placement.json");
      write_placement(crop_place, case_dir / "crop_placement.json");
      return 0;
    });

    if (input.ground_truth) {
      res.metrics = timed("evaluate", [&] {
        const LabelMap gt = read_label_map(*input.ground_truth);
        return evaluate_case(full, gt, cfg.class_map, input.id);
      });
      detail::write_text(case_dir / "metrics.csv", metric_csv(*res.metrics, false));
    }
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  try {
    detail::write_text(case_dir / "result.json", detail::case_result_json(res).dump(2) + "\n");
    detail::write_text(case_dir / "timings.json", nlohmann::json(res.timings_ms).dump(2) + "\n");
  } catch (const std::exception& e) {
    if (res.ok) {
      res.ok = false;
      res.error = e.what();
    }
  }
  return res;
}

inline std::string summary_column_prefix(const std::string& class_name) {
  if (class_name == "right_atrium") return "ra";
  if (class_name == "left_atrium") return "la";
  return class_name;
}

inline std::string summary_csv(const PipelineConfig& cfg, const PipelineResult& result) {
  std::string out = "case_id,status";
  for (const auto& e : cfg.class_map.entries) {
    const auto p = summary_column_prefix(e.name);
    out += "," + p + "_dice," + p + "_hd95";
  }
  out += '\n';
  for (const auto& c : result.cases) {
    out += c.case_id + "," + c.status();
    for (const auto& e : cfg.class_map.entries) {
      const MetricRow* row = c.metrics ? c.metrics->find(c.case_id, e.name) : nullptr;
      if (row) out += "," + format_number(row->dice.value) + "," + format_number(row->hd95.mm);
      else out += ",,";
    }
    out += '\n';
  }
  return out;
}

// Processes every case on up to cfg.workers threads and writes summary.csv.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  PipelineResult result;
  result.cases.resize(cfg.cases.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cfg.cases.size();) result.cases[i] = run_case(cfg, cfg.cases[i]);
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), cfg.cases.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  result.summary_csv = cfg.output_dir / "summary.csv";
  detail::write_text(result.summary_csv, summary_csv(cfg, result));
  return result;
}

}  // namespace biatrium
