// fpcd: command-line front end for radio-map building, survey simulation,
// change injection, localization, change detection, labeling and evaluation.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "fpcd/fpcd.hpp"
#include "fpcd/io/benchmark.hpp"
#include "fpcd/io/config.hpp"
#include "fpcd/io/csv.hpp"
#include "fpcd/io/manifest.hpp"
#include "fpcd/io/rfm_archive.hpp"
#include "fpcd/io/uji.hpp"

namespace fs = std::filesystem;
using fpcd::io::format_number;
using Json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kParse = 2, kNumerical = 3 };

struct Options {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::vector<std::string> sets;
  unsigned threads = 1;
  std::string input;
  std::string rfm;
  std::string labels;
  std::string uji;
  int floor = 3;
};

/// The run being executed: resolved configuration plus output bookkeeping.
struct Run {
  std::string command;
  const Options& opt;
  fpcd::io::Config config;
  fs::path out;
  std::vector<std::string> outputs;
  std::vector<fs::path> inputs;

  Run(std::string cmd, const Options& o) : command(std::move(cmd)), opt(o) {
    if (!opt.config_path.empty()) config.merge_file(opt.config_path);
    config.merge_environment();
    config.merge_overrides(opt.sets);
    out = opt.out_dir;
    fs::create_directories(out);
  }

  fpcd::Parallelism par() const { return {opt.threads}; }

  void write(const std::string& name, const std::string& data) {
    fpcd::io::write_file(out / name, data);
    outputs.push_back(name);
  }

  void finish() {
    fpcd::io::Manifest m{command, opt.seed, &config, inputs, outputs};
    fpcd::io::write_manifest(out, m);
  }
};

std::string num(double v) { return format_number(v); }

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string{}; }

fpcd::io::RfmArchive load_rfm(Run& run) {
  if (run.opt.rfm.empty()) throw fpcd::InvalidInput(run.command + " needs --rfm");
  run.inputs.emplace_back(run.opt.rfm);
  auto a = fpcd::io::load_rfm(run.opt.rfm);
  if (!a.grid) throw fpcd::ParseError("RFM archive " + run.opt.rfm + " has no grid");
  return a;
}

fpcd::io::Dataset load_input(Run& run) {
  if (run.opt.input.empty()) throw fpcd::InvalidInput(run.command + " needs --input");
  run.inputs.emplace_back(run.opt.input);
  return fpcd::io::read_dataset(run.opt.input);
}

std::string long_csv(const std::vector<fpcd::LabeledFingerprint>& samples, const fpcd::FeatureRegistry& registry) {
  std::ostringstream s;
  fpcd::io::write_long(s, samples, registry);
  return s.str();
}

// ---------------------------------------------------------------------------

void cmd_simulate(Run& run) {
  const auto scenario = fpcd::io::scenario_config(run.config, run.opt.seed);
  const auto survey = fpcd::generate_scenario(scenario);
  std::vector<fpcd::FeatureId> ids;
  std::ostringstream aps;
  aps << "feature_id,x,y\n";
  for (const auto& ap : scenario.access_points) {
    ids.push_back(ap.id);
    aps << ap.id.str() << ',' << num(ap.position.x) << ',' << num(ap.position.y) << '\n';
  }
  const fpcd::FeatureRegistry registry(ids);
  run.write("training.csv", long_csv(survey.training.samples(), registry));
  run.write("validation.csv", long_csv(survey.validation, registry));
  run.write("access_points.csv", aps.str());
}

void cmd_build_rfm(Run& run) {
  const auto ds = load_input(run);
  const auto archive = fpcd::io::build_rfm(ds.training_set(), run.config, run.par());
  for (const auto& f : fpcd::io::save_rfm(run.out, archive)) run.outputs.push_back(f);
}

void cmd_inject(Run& run) {
  const auto ds = load_input(run);
  std::vector<fpcd::LabeledFingerprint> base = ds.samples;
  if (!run.opt.rfm.empty()) {
    const auto a = load_rfm(run);
    const fpcd::KernelSmoother ks(a.training, a.kernel, a.query);
    base = fpcd::smooth_validation(base, ks, run.par());
  }
  const bool grid = run.config.flag("inject.grid");
  std::vector<fpcd::ChangeSpec> specs;
  if (grid) {
    specs = fpcd::change_grid(run.opt.seed);
    const auto mode = fpcd::io::change_spec(run.config, run.opt.seed).mode;
    for (auto& s : specs) s.mode = mode;
  } else {
    specs.push_back(fpcd::io::change_spec(run.config, run.opt.seed));
  }
  const auto noise = fpcd::io::query_noise(run.config);

  std::vector<fpcd::LabeledFingerprint> all;
  std::ostringstream labels, spec_rows;
  labels << "sample_id,spec,missing,shift,shift_db,feature_id,status,kind\n";
  spec_rows << "spec,missing,shift,shift_db,mode\n";
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& spec = specs[k];
    spec_rows << k << ',' << num(spec.missing_ratio) << ',' << num(spec.shift_ratio) << ',' << num(spec.shift_db)
              << ',' << (spec.mode == fpcd::ChangeMode::shared ? "shared" : "per_sample") << '\n';
    auto queries = fpcd::make_queries(base, spec, base.size(), ds.registry, noise);
    for (auto& q : queries) {
      if (grid) {
        char prefix[32];
        std::snprintf(prefix, sizeof prefix, "g%03zu/", k);
        q.sample.sample_id = prefix + q.sample.sample_id;
      }
      for (const auto& l : q.labels)
        labels << q.sample.sample_id << ',' << k << ',' << num(spec.missing_ratio) << ',' << num(spec.shift_ratio)
               << ',' << num(spec.shift_db) << ',' << l.id.str() << ',' << fpcd::to_string(l.status) << ','
               << fpcd::to_string(l.kind) << '\n';
      all.push_back(std::move(q.sample));
    }
  }
  run.write("queries.csv", long_csv(all, ds.registry));
  run.write("labels.csv", labels.str());
  run.write("specs.csv", spec_rows.str());
}

void cmd_localize(Run& run) {
  const auto a = load_rfm(run);
  const auto ds = load_input(run);
  const auto pos = fpcd::io::positioning_config(run.config);
  std::vector<std::optional<fpcd::Point2>> est(ds.samples.size());
  fpcd::parallel_for(ds.samples.size(), run.par(), [&](std::size_t i) {
    if (!ds.samples[i].fingerprint.empty()) est[i] = fpcd::knn_locate(ds.samples[i].fingerprint, *a.grid, pos).location;
  });
  std::ostringstream s;
  s << "sample_id,x,y,est_x,est_y,error\n";
  for (std::size_t i = 0; i < est.size(); ++i) {
    const auto& q = ds.samples[i];
    s << q.sample_id << ',' << num(q.location.x) << ',' << num(q.location.y) << ',';
    if (est[i])
      s << num(est[i]->x) << ',' << num(est[i]->y) << ',' << num(fpcd::distance(*est[i], q.location));
    else
      s << ",,";
    s << '\n';
  }
  run.write("estimates.csv", s.str());
}

void cmd_robust_localize(Run& run) {
  const auto a = load_rfm(run);
  const auto ds = load_input(run);
  const auto cfg = fpcd::io::pipeline_config(run.config, run.opt.seed);
  std::vector<std::optional<fpcd::CandidateSet>> sets(ds.samples.size());
  fpcd::parallel_for(ds.samples.size(), run.par(), [&](std::size_t i) {
    if (ds.samples[i].fingerprint.empty()) return;
    sets[i] = fpcd::robust_locate(ds.samples[i].fingerprint, *a.grid, *a.grid, cfg.positioning,
                                  fpcd::query_resample(cfg.resample, i), cfg.lambda_mji);
  });
  std::ostringstream e, c;
  e << "sample_id,x,y,est_x,est_y,error,selected\n";
  c << "sample_id,index,x,y,mji,selected,weight\n";
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& q = ds.samples[i];
    e << q.sample_id << ',' << num(q.location.x) << ',' << num(q.location.y) << ',';
    if (!sets[i]) {
      e << ",,,0\n";
      continue;
    }
    const auto& cs = *sets[i];
    e << num(cs.estimate.x) << ',' << num(cs.estimate.y) << ',' << num(fpcd::distance(cs.estimate, q.location)) << ','
      << cs.selected.size() << '\n';
    std::size_t k = 0;
    for (std::size_t j = 0; j < cs.locations.size(); ++j) {
      const bool sel = k < cs.selected.size() && cs.selected[k] == j;
      c << q.sample_id << ',' << j << ',' << num(cs.locations[j].x) << ',' << num(cs.locations[j].y) << ','
        << num(cs.mji[j]) << ',' << (sel ? 1 : 0) << ',' << (sel ? num(cs.weights[k]) : std::string{}) << '\n';
      if (sel) ++k;
    }
  }
  run.write("estimates.csv", e.str());
  run.write("candidates.csv", c.str());
}

void cmd_detect(Run& run) {
  const auto a = load_rfm(run);
  const auto ds = load_input(run);
  const auto cfg = fpcd::io::pipeline_config(run.config, run.opt.seed);
  const auto out = fpcd::run_pipeline(ds.samples, *a.grid, *a.grid, cfg, run.par());
  std::ostringstream b, r;
  b << "sample_id,feature_id,belief,measured,expected,flagged\n";
  r << "sample_id,x,y,robust_x,robust_y,relocated_x,relocated_y,dropped,fallback\n";
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& q = ds.samples[i];
    const auto& o = out[i];
    r << q.sample_id << ',' << num(q.location.x) << ',' << num(q.location.y) << ',';
    if (!o.located) {
      r << ",,,,0,\n";
      continue;
    }
    for (const auto& fb : o.beliefs)
      b << q.sample_id << ',' << fb.id.str() << ',' << num(fb.belief) << ',' << opt_num(fb.measured) << ','
        << opt_num(fb.expected) << ',' << (fb.belief >= cfg.threshold ? 1 : 0) << '\n';
    r << num(o.robust.estimate.x) << ',' << num(o.robust.estimate.y) << ',' << num(o.relocated.location.x) << ','
      << num(o.relocated.location.y) << ',' << o.relocated.dropped.size() << ','
      << (o.relocated.used_fallback ? 1 : 0) << '\n';
  }
  run.write("beliefs.csv", b.str());
  run.write("relocated.csv", r.str());
}

void cmd_label(Run& run) {
  fpcd::io::Dataset ds;
  if (!run.opt.uji.empty()) {
    run.inputs.emplace_back(run.opt.uji);
    fpcd::io::UjiOptions u;
    u.floor = run.opt.floor;
    ds = fpcd::io::load_uji(run.opt.uji, u);
  } else {
    ds = load_input(run);
  }
  const auto labels = fpcd::label_survey(ds.samples);
  std::ostringstream s;
  s << "sample_id,block,feature_id,within,inter,status\n";
  for (const auto& l : labels)
    s << ds.samples[l.sample].sample_id << ',' << l.block << ',' << l.feature.str() << ','
      << fpcd::to_string(l.within) << ',' << fpcd::to_string(l.inter) << ',' << fpcd::to_string(l.status()) << '\n';
  run.write("labels.csv", s.str());

  Json v;
  try {
    const auto m = fpcd::fit_variability(fpcd::repeated_readings(ds.samples), run.config.num("variability.floor"));
    v = {{"slope", m.slope}, {"intercept", m.intercept}, {"floor", m.floor}};
  } catch (const fpcd::InvalidInput&) {
    v = nullptr;  // fewer than two repeated-reading groups
  }
  run.write("variability.json", Json{{"variability", v}}.dump(2) + "\n");
}

struct LabelFile {
  std::map<std::string, fpcd::ChangeLabels> by_sample;
  std::map<std::string, std::size_t> spec_of;
  std::map<std::size_t, std::array<double, 3>> specs;  // missing, shift, shift_db
};

LabelFile read_labels(const std::string& path) {
  std::istringstream in(fpcd::io::read_file(path));
  std::string line;
  std::size_t lineno = 0;
  LabelFile lf;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (fpcd::io::trim(line).empty()) continue;
    auto cells = fpcd::io::split_record(line, lineno);
    if (header.empty()) {
      header = cells;
      const std::vector<std::string> want{"sample_id", "spec", "missing", "shift", "shift_db",
                                          "feature_id", "status", "kind"};
      if (header != want) throw fpcd::ParseError("labels header must be sample_id,spec,missing,shift,shift_db,feature_id,status,kind", lineno);
      continue;
    }
    if (cells.size() != header.size())
      throw fpcd::ParseError("expected " + std::to_string(header.size()) + " fields", lineno);
    std::array<double, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
      const auto x = fpcd::io::parse_number(cells[i + 1]);
      if (!x) throw fpcd::ParseError("bad number '" + cells[i + 1] + "'", lineno);
      v[i] = *x;
    }
    fpcd::ChangeStatus status;
    if (cells[6] == "changed")
      status = fpcd::ChangeStatus::changed;
    else if (cells[6] == "stable")
      status = fpcd::ChangeStatus::stable;
    else
      throw fpcd::ParseError("status must be changed or stable", lineno);
    fpcd::ChangeKind kind = fpcd::ChangeKind::none;
    if (cells[7] == "missing")
      kind = fpcd::ChangeKind::missing;
    else if (cells[7] == "shifted")
      kind = fpcd::ChangeKind::shifted;
    else if (cells[7] != "none")
      throw fpcd::ParseError("kind must be none, missing or shifted", lineno);
    const auto spec = static_cast<std::size_t>(v[0]);
    lf.by_sample[cells[0]].push_back({fpcd::FeatureId(cells[5]), status, kind});
    lf.spec_of[cells[0]] = spec;
    lf.specs[spec] = {v[1], v[2], v[3]};
  }
  if (header.empty()) throw fpcd::ParseError("labels file is empty", 1);
  return lf;
}

Json metrics_json(const std::vector<fpcd::QueryOutcome>& out, const std::vector<fpcd::ChangeLabels>& labels,
                  double radius, double threshold) {
  const auto e = fpcd::localization_errors(out);
  Json j;
  j["queries"] = e.knn.size();
  if (!e.knn.empty()) {
    j["ecdf_knn"] = fpcd::ecdf_accuracy(e.knn, radius);
    j["ecdf_robust"] = fpcd::ecdf_accuracy(e.robust, radius);
    j["ecdf_relocated"] = fpcd::ecdf_accuracy(e.relocated, radius);
  }
  const auto scored = fpcd::scored_labels(out, labels);
  const auto c = fpcd::confusion(scored, threshold);
  j["tp"] = c.tp;
  j["fn"] = c.fn;
  j["tn"] = c.tn;
  j["fp"] = c.fp;
  j["tpr"] = c.tpr();
  j["tnr"] = c.tnr();
  j["fpr"] = c.fpr();
  const bool both = c.tp + c.fn > 0 && c.tn + c.fp > 0;
  j["auc"] = both ? Json(fpcd::roc_auc(scored).auc) : Json(nullptr);
  return j;
}

std::string json_cell(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  return j.at(key).is_number_float() ? num(j.at(key).get<double>()) : j.at(key).dump();
}

void cmd_evaluate(Run& run) {
  const auto a = load_rfm(run);
  const auto ds = load_input(run);
  if (run.opt.labels.empty()) throw fpcd::InvalidInput("evaluate needs --labels");
  run.inputs.emplace_back(run.opt.labels);
  const auto lf = read_labels(run.opt.labels);
  const auto cfg = fpcd::io::pipeline_config(run.config, run.opt.seed);
  const double radius = run.config.num("evaluate.radius");

  std::vector<fpcd::ChangeLabels> labels;
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& id = ds.samples[i].sample_id;
    const auto it = lf.by_sample.find(id);
    if (it == lf.by_sample.end()) throw fpcd::ParseError("no labels for sample '" + id + "'");
    labels.push_back(it->second);
    members[lf.spec_of.at(id)].push_back(i);
  }
  const auto out = fpcd::run_pipeline(ds.samples, *a.grid, *a.grid, cfg, run.par());

  Json summary;
  summary["radius"] = radius;
  summary["threshold"] = cfg.threshold;
  summary["overall"] = metrics_json(out, labels, radius, cfg.threshold);
  Json per_spec = Json::array();
  std::ostringstream csv;
  const char* cols[] = {"queries", "ecdf_knn", "ecdf_robust", "ecdf_relocated", "auc", "tpr", "tnr", "fpr"};
  csv << "spec,missing,shift,shift_db";
  for (const char* c : cols) csv << ',' << c;
  csv << '\n';
  for (const auto& [spec, idx] : members) {
    std::vector<fpcd::QueryOutcome> o;
    std::vector<fpcd::ChangeLabels> l;
    for (std::size_t i : idx) {
      o.push_back(out[i]);
      l.push_back(labels[i]);
    }
    Json m = metrics_json(o, l, radius, cfg.threshold);
    const auto& p = lf.specs.at(spec);
    csv << spec << ',' << num(p[0]) << ',' << num(p[1]) << ',' << num(p[2]);
    for (const char* c : cols) csv << ',' << json_cell(m, c);
    csv << '\n';
    Json row{{"spec", spec}, {"missing", p[0]}, {"shift", p[1]}, {"shift_db", p[2]}};
    row.update(m);
    per_spec.push_back(row);
  }
  summary["specs"] = per_spec;

  const auto e = fpcd::localization_errors(out);
  std::ostringstream ecdf;
  ecdf << "method,error,accuracy\n";
  for (const auto& [name, errs] : {std::pair{"knn", e.knn}, {"robust", e.robust}, {"relocated", e.relocated}}) {
    auto sorted = errs;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      ecdf << name << ',' << num(sorted[i]) << ',' << num(static_cast<double>(i + 1) / sorted.size()) << '\n';
  }
  std::ostringstream roc;
  roc << "threshold,tpr,tnr\n";
  if (!summary["overall"]["auc"].is_null())
    for (const auto& pt : fpcd::roc_auc(fpcd::scored_labels(out, labels)).points)
      roc << num(pt.threshold) << ',' << num(pt.tpr) << ',' << num(pt.tnr) << '\n';

  run.write("metrics.csv", csv.str());
  run.write("metrics.json", summary.dump(2) + "\n");
  run.write("ecdf.csv", ecdf.str());
  run.write("roc.csv", roc.str());
}

void cmd_sweep(Run& run) {
  const auto a = load_rfm(run);
  const auto ds = load_input(run);
  const auto cfg = fpcd::io::pipeline_config(run.config, run.opt.seed);
  const auto ratios = fpcd::io::sweep_ratios(run.config);
  std::vector<fpcd::LabeledFingerprint> qs = ds.samples;
  const std::size_t cap = run.config.count("sweep.max_queries");
  if (cap > 0 && qs.size() > cap) qs.resize(cap);
  const auto rows = fpcd::ratio_sweep(qs, *a.grid, cfg.positioning, cfg.resample, ratios,
                                      run.config.num("sweep.sigma_scale"), run.par());
  std::ostringstream s;
  s << "ratio,dispersiveness,bias,normalized_dispersiveness,normalized_bias\n";
  std::map<double, double> bias;
  for (const auto& r : rows) {
    s << num(r.ratio) << ',' << num(r.dispersiveness) << ',' << num(r.bias) << ',' << num(r.normalized_dispersiveness)
      << ',' << num(r.normalized_bias) << '\n';
    bias[r.ratio] = r.bias;
  }
  run.write("sweep.csv", s.str());
  Json bw{{"queries", qs.size()}};
  if (bias.size() >= 3) {
    const auto b = fpcd::bandwidth_3db(bias);
    bw["alpha_l"] = b.alpha_l;
    bw["alpha_m"] = b.alpha_m;
    bw["alpha_r"] = b.alpha_r;
  }
  run.write("bandwidth.json", bw.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust WiFi fingerprint positioning and feature-wise change detection"};
  app.require_subcommand(1);
  Options opt;

  struct Command {
    const char* name;
    const char* help;
    void (*fn)(Run&);
  };
  const Command commands[] = {
      {"build-rfm", "smooth a training survey and interpolate the radio-map grid", cmd_build_rfm},
      {"simulate", "generate a synthetic survey split into training and validation", cmd_simulate},
      {"inject", "inject simulated changes (one spec or the whole grid) into samples", cmd_inject},
      {"localize", "baseline kNN localization", cmd_localize},
      {"robust-localize", "resampling-based robust localization with candidate sets", cmd_robust_localize},
      {"detect", "feature-wise change beliefs and change-aware relocalization", cmd_detect},
      {"label", "label changes in a block-structured long-term survey", cmd_label},
      {"evaluate", "positioning and detection metrics against injected labels", cmd_evaluate},
      {"sweep", "dispersiveness and bias over a sampling-ratio sweep", cmd_sweep},
  };
  std::map<CLI::App*, const Command*> dispatch;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opt.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "random seed")->capture_default_str();
    sub->add_option("--out-dir", opt.out_dir, "directory for outputs and manifest.json")->required();
    sub->add_option("--set", opt.sets, "configuration override key=value (repeatable)");
    sub->add_option("--threads", opt.threads, "worker threads; 0 uses every core")->capture_default_str();
    const std::string name = c.name;
    if (name != "simulate") sub->add_option("--input", opt.input, "input dataset CSV");
    if (name == "inject" || name == "localize" || name == "robust-localize" || name == "detect" ||
        name == "evaluate" || name == "sweep")
      sub->add_option("--rfm", opt.rfm, "radio-map archive directory");
    if (name == "evaluate") sub->add_option("--labels", opt.labels, "labels.csv written by inject");
    if (name == "label") {
      sub->add_option("--uji", opt.uji, "UJI long-term dataset root instead of --input");
      sub->add_option("--floor", opt.floor, "UJI floor to keep")->capture_default_str();
    }
    dispatch[sub] = &c;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    for (const auto& [sub, c] : dispatch) {
      if (!sub->parsed()) continue;
      Run run(c->name, opt);
      c->fn(run);
      run.finish();
    }
  } catch (const fpcd::ParseError& e) {
    std::cerr << "fpcd: parse error: " << e.what() << '\n';
    return kParse;
  } catch (const fpcd::NumericalFailure& e) {
    std::cerr << "fpcd: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const fpcd::InvalidInput& e) {
    std::cerr << "fpcd: invalid input: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "fpcd: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}
