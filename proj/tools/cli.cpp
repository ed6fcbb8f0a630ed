#include "transfuse/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "transfuse/bundle.hpp"
#include "transfuse/cohort.hpp"
#include "transfuse/errors.hpp"
#include "transfuse/explain.hpp"
#include "transfuse/plots.hpp"
#include "transfuse/scenarios.hpp"
#include "transfuse/synthetic.hpp"
#include "transfuse/table_io.hpp"

namespace transfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = TRANSFUSE_VERSION;

std::string default_out_dir() {
  const char* env = std::getenv("TRANSFUSE_OUT");
  return env && *env ? env : "transfuse_out";
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
  if (!f) throw std::runtime_error("failed writing " + p.string());
}

// Everything a run needs besides its input files.
struct RunOptions {
  std::string out_dir = default_out_dir();
  std::uint64_t seed = 7;
  std::string instances;
  std::vector<int> years;
  std::string grid = "reduced";
  bool tune = false;
  std::size_t tune_rows = 3000;
  bool reuse_first = false;
  int k_inner = 3;
  int folds = 5;
  double threshold = 0.5;
  double missing_threshold = 0.90;
  double r_max = 0.9;
  double variance = 0.90;
  int mice_cycles = 10;
  std::string meta = "GNB";
  std::size_t svm_rows = 2000;
};

void add_model_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--instances", o.instances, "Instance table from the cohort step")->required();
  cmd->add_option("--grid", o.grid, "Search grid: full or reduced")->capture_default_str();
  cmd->add_flag("--tune", o.tune, "Grid-search hyperparameters on the training split");
  cmd->add_option("--tune-rows", o.tune_rows, "Training rows sampled for the search (0 = all)")->capture_default_str();
  cmd->add_flag("--reuse-first", o.reuse_first, "Tune on the first scenario only and reuse its picks");
  cmd->add_option("--k-inner", o.k_inner, "Inner cross-validation folds")->capture_default_str();
  cmd->add_option("--folds", o.folds, "Stacking folds")->capture_default_str();
  cmd->add_option("--threshold", o.threshold, "Decision threshold")->capture_default_str();
  cmd->add_option("--missing-threshold", o.missing_threshold, "Drop features missing above this fraction")
      ->capture_default_str();
  cmd->add_option("--r-max", o.r_max, "Pearson correlation cutoff")->capture_default_str();
  cmd->add_option("--variance", o.variance, "PCA explained-variance target")->capture_default_str();
  cmd->add_option("--mice-cycles", o.mice_cycles, "Chained-equation cycles")->capture_default_str();
  cmd->add_option("--meta", o.meta, "Meta-learner family (GNB or LR)")->capture_default_str();
  cmd->add_option("--svm-rows", o.svm_rows, "Row cap for SVM training (0 = all)")->capture_default_str();
}

ScenarioConfig make_config(const RunOptions& o) {
  ScenarioConfig c;
  c.pipeline.missing_threshold = o.missing_threshold;
  c.pipeline.r_max = o.r_max;
  c.pipeline.variance_target = o.variance;
  c.pipeline.mice_cycles = o.mice_cycles;
  c.pipeline.mice_seed = o.seed;
  c.lineup = default_lineup(o.seed);
  std::get<SvmParams>(c.lineup.base[1]).max_train_rows = o.svm_rows;
  const Family meta = parse_family(o.meta);
  if (meta == Family::GNB) {
    c.lineup.meta = NaiveBayesParams{};
  } else if (meta == Family::LR) {
    c.lineup.meta = LogisticParams{};
  } else {
    throw ValidationError("meta-learner must be GNB or LR, got " + o.meta);
  }
  c.years = o.years;
  c.n_folds = o.folds;
  c.seed = o.seed;
  c.threshold = o.threshold;
  c.tune.enabled = o.tune;
  c.tune.mode = parse_grid_mode(o.grid);
  c.tune.k_inner = o.k_inner;
  c.tune.max_rows = o.tune_rows;
  c.tune.reuse_first = o.reuse_first;
  c.validate();
  return c;
}

json config_json(const ScenarioConfig& c) {
  json lineup = {{"LR", describe_spec(c.lineup.lr)},
                 {"RF", describe_spec(c.lineup.base[0])},
                 {"SVM", describe_spec(c.lineup.base[1])},
                 {"GBT", describe_spec(c.lineup.base[2])},
                 {"FNN", describe_spec(c.lineup.fnn)},
                 {"MM", describe_spec(c.lineup.meta)}};
  return {{"seed", c.seed},
          {"years", c.years},
          {"missing_threshold", c.pipeline.missing_threshold},
          {"r_max", c.pipeline.r_max},
          {"variance_target", c.pipeline.variance_target},
          {"mice_cycles", c.pipeline.mice_cycles},
          {"decision_threshold", c.threshold},
          {"stack_folds", c.n_folds},
          {"tune", c.tune.enabled},
          {"grid", c.tune.mode == GridMode::Full ? "full" : "reduced"},
          {"tune_rows", c.tune.max_rows},
          {"k_inner", c.tune.k_inner},
          {"reuse_first", c.tune.reuse_first},
          {"lineup", lineup}};
}

std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

// Manifest with the configuration and a checksum of every output file.
void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    std::uint64_t seed, const json& config, const std::vector<fs::path>& outputs) {
  json files = json::array();
  for (const auto& p : outputs) {
    const std::string body = read_file(p);
    files.push_back({{"path", fs::relative(p, dir).generic_string()},
                     {"bytes", body.size()},
                     {"fnv1a64", hex64(fnv1a64(body))}});
  }
  const json m = {{"tool", "transfuse"},
                  {"tool_version", kToolVersion},
                  {"command", command},
                  {"args", args},
                  {"seed", seed},
                  {"config_hash", config_hash(config)},
                  {"config", config},
                  {"versions",
                   {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__},
                    {"bundle_format", kBundleVersion}}},
                  {"outputs", files}};
  write_text(dir / "manifest.json", m.dump(1) + "\n");
}

template <typename Fn>
fs::path emit(const fs::path& path, Fn&& write) {
  std::ostringstream s;
  write(s);
  write_text(path, s.str());
  return path;
}

json curve_to_json(const CurveSeries& c) {
  json pts = json::array();
  for (const auto& p : c.points) pts.push_back({p.x, p.y});
  return {{"kind", std::string(curve_kind_name(c.kind))}, {"points", pts}};
}

CurveSeries curve_from_json(const json& j) {
  CurveSeries c;
  const std::string kind = j.at("kind");
  c.kind = kind == "roc" ? CurveKind::ROC : kind == "pr" ? CurveKind::PR : CurveKind::Calibration;
  if (kind != "roc" && kind != "pr" && kind != "calibration") throw ValidationError("unknown curve kind " + kind);
  for (const auto& p : j.at("points")) c.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return c;
}

json metrics_to_json(const MetricsRow& m) {
  return {{"model", m.model},         {"auroc", m.auroc},        {"accuracy", m.accuracy},
          {"f1", m.f1},               {"precision", m.precision}, {"recall", m.recall},
          {"no_positive_predictions", m.no_positive_predictions}};
}

json report_to_json(const ScenarioReport& r) {
  json metrics = json::array(), curves = json::array(), tuning = json::array();
  for (const auto& m : r.metrics) metrics.push_back(metrics_to_json(m));
  for (const auto& c : r.curves) {
    curves.push_back({{"model", c.model},
                      {"roc", curve_to_json(c.roc)},
                      {"pr", curve_to_json(c.pr)},
                      {"calibration", curve_to_json(c.calibration)}});
  }
  for (const auto& t : r.tuning) tuning.push_back({{"model", t.model}, {"best", describe_spec(t.best)}});
  return {{"held_out_year", r.held_out_year},
          {"train_years", r.train_years},
          {"n_train", r.n_train},
          {"n_test", r.n_test},
          {"metrics", metrics},
          {"curves", curves},
          {"tuning", tuning},
          {"audit",
           {{"shared_encounters", r.audit.shared_encounters},
            {"train_rows_in_test_year", r.audit.train_rows_in_test_year},
            {"test_rows_outside_year", r.audit.test_rows_outside_year},
            {"hash_before", hex64(r.audit.hash_before)},
            {"hash_after", hex64(r.audit.hash_after)},
            {"ok", r.audit.ok()}}}};
}

ScenarioReport report_from_json(const json& j) {
  ScenarioReport r;
  r.held_out_year = j.at("held_out_year");
  r.train_years = j.at("train_years").get<std::vector<int>>();
  r.n_train = j.at("n_train");
  r.n_test = j.at("n_test");
  for (const auto& m : j.at("metrics")) {
    MetricsRow row;
    row.model = m.at("model");
    row.auroc = m.at("auroc").is_null() ? std::nan("") : m.at("auroc").get<double>();
    row.accuracy = m.at("accuracy");
    row.f1 = m.at("f1");
    row.precision = m.at("precision");
    row.recall = m.at("recall");
    row.no_positive_predictions = m.at("no_positive_predictions");
    r.metrics.push_back(row);
  }
  for (const auto& c : j.at("curves")) {
    r.curves.push_back(
        {c.at("model"), curve_from_json(c.at("roc")), curve_from_json(c.at("pr")), curve_from_json(c.at("calibration"))});
  }
  const auto& a = j.at("audit");
  r.audit.shared_encounters = a.at("shared_encounters");
  r.audit.train_rows_in_test_year = a.at("train_rows_in_test_year");
  r.audit.test_rows_outside_year = a.at("test_rows_outside_year");
  r.audit.hash_before = std::stoull(a.at("hash_before").get<std::string>(), nullptr, 16);
  r.audit.hash_after = std::stoull(a.at("hash_after").get<std::string>(), nullptr, 16);
  return r;
}

// Metrics grid, per-scenario JSON, aggregated curves and figures.
std::vector<fs::path> write_reports(const fs::path& dir, const std::vector<ScenarioReport>& reports) {
  std::vector<fs::path> out;
  out.push_back(emit(dir / "metrics.csv", [&](std::ostream& s) { write_metrics_grid(s, reports); }));
  for (const auto& r : reports) {
    const fs::path p = dir / ("scenario_" + std::to_string(r.held_out_year) + ".json");
    write_text(p, report_to_json(r).dump(1) + "\n");
    out.push_back(p);
    for (const auto& t : r.tuning) {
      const fs::path tp = dir / ("trials_" + std::to_string(r.held_out_year) + "_" + t.model + ".csv");
      write_trials(tp, t.trials);
      out.push_back(tp);
    }
  }
  const auto curves = aggregate_reports(reports);
  out.push_back(emit(dir / "curves.json", [&](std::ostream& s) { write_curves_json(s, curves); }));
  for (auto& p : emit_curve_plots(curves, dir / "plots")) out.push_back(p);
  return out;
}

std::vector<CohortInstance> load_instances(const std::string& path) {
  if (path.empty()) throw ValidationError("--instances is required");
  return read_instances(path);
}

std::pair<FeatureMatrix, FeatureMatrix> split_train_test(const std::vector<CohortInstance>& instances, int year) {
  const FeatureMatrix all = to_feature_matrix(instances);
  const ScenarioSplit split = split_by_year(all.rows, year);
  return {all.select_rows(split.train_rows), all.select_rows(split.test_rows)};
}

int single_year(const RunOptions& o, const char* cmd) {
  if (o.years.size() > 1) throw ValidationError(std::string(cmd) + " takes a single --hold-out year");
  return o.years.empty() ? 0 : o.years.front();
}

LeakageAudit audit_split(const FeatureMatrix& train, const FeatureMatrix& test, int year) {
  LeakageAudit a;
  std::set<std::string> ids;
  for (const auto& m : test.rows) {
    ids.insert(m.encounter_id);
    a.test_rows_outside_year += m.year != year;
  }
  for (const auto& m : train.rows) {
    a.shared_encounters += ids.count(m.encounter_id);
    a.train_rows_in_test_year += m.year == year;
  }
  return a;
}

// ---- subcommands -----------------------------------------------------------------

struct SynthOptions {
  int n_per_year = 10000;
  int first_year = kFirstYear;
  int last_year = kLastYear;
  double prevalence = 0.254;
  bool planted = false;
};

int run_synth(const SynthOptions& s, const RunOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  SyntheticCohortSpec spec;
  spec.n_encounters_per_year = s.n_per_year;
  spec.first_year = s.first_year;
  spec.last_year = s.last_year;
  spec.transfused_fraction = s.prevalence;
  spec.seed = o.seed;
  if (s.planted) spec.features = planted_signal_profiles();
  spec.validate();
  const fs::path dir = o.out_dir;
  const RawTables tables = generate_synthetic_cohort(spec);
  write_tables(dir, tables);
  const json config = {{"seed", o.seed},          {"n_per_year", s.n_per_year}, {"first_year", s.first_year},
                       {"last_year", s.last_year}, {"prevalence", s.prevalence}, {"planted", s.planted}};
  write_manifest(dir, "synth", args, o.seed, config,
                 {dir / "encounters.csv", dir / "observations.csv", dir / "transfusions.csv"});
  out << "wrote " << tables.encounters.size() << " encounters to " << dir.string() << '\n';
  return 0;
}

int run_cohort(const std::string& data, const RunOptions& o, const std::vector<std::string>& args, std::ostream& out) {
  const fs::path in = data;
  const RawTables tables =
      ingest_tables(in / "encounters.csv", in / "observations.csv", in / "transfusions.csv");
  const ExclusionResult ex = apply_exclusions(tables);
  const auto instances = build_instances(tables, ex);
  const auto summary = cohort_summary(tables.encounters, instances);
  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  std::vector<fs::path> files;
  files.push_back(emit(dir / "exclusions.csv", [&](std::ostream& s) { write_exclusions(s, tables, ex); }));
  files.push_back(emit(dir / "instances.csv", [&](std::ostream& s) { write_instances(s, instances); }));
  files.push_back(emit(dir / "cohort_summary.csv", [&](std::ostream& s) { write_cohort_summary(s, summary); }));
  for (auto& p : emit_hemoglobin_plot(instances, dir / "plots")) files.push_back(p);
  write_manifest(dir, "cohort", args, o.seed, {{"data", data}}, files);
  out << "retained " << ex.retained_count() << " of " << tables.encounters.size() << " encounters; "
      << instances.size() << " instances (" << summary.n_transfused << " transfused encounters)\n";
  return 0;
}

int run_fit(const RunOptions& o, std::string bundle_path, const std::vector<std::string>& args, std::ostream& out) {
  const ScenarioConfig config = make_config(o);
  const int year = single_year(o, "fit");
  const auto instances = load_instances(o.instances);
  const FeatureMatrix train = year ? split_train_test(instances, year).first : to_feature_matrix(instances);
  std::vector<TuningLog> tuning;
  const ScenarioFit fit = fit_scenario(train, config, &tuning);

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  const json cfg = config_json(config);
  const fs::path bundle = bundle_path.empty() ? dir / "bundle.tfb" : fs::path(bundle_path);
  save_bundle(make_bundle(fit, {o.seed, config_hash(cfg), utc_now(), kToolVersion, year}), bundle);
  std::vector<fs::path> files;
  for (const auto& t : tuning) {
    write_trials(dir / ("trials_" + t.model + ".csv"), t.trials);
    files.push_back(dir / ("trials_" + t.model + ".csv"));
  }
  write_manifest(dir, "fit", args, o.seed, cfg, files);
  out << "fitted " << train.n_rows() << " training rows; " << fit.preprocessor.output_dim()
      << " components; bundle " << bundle.string() << '\n';
  return 0;
}

int run_evaluate(const RunOptions& o, const std::string& bundle_path, const std::vector<std::string>& args,
                 std::ostream& out) {
  const auto instances = load_instances(o.instances);
  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  std::vector<ScenarioReport> reports;
  json cfg;
  if (!bundle_path.empty()) {
    const ModelBundle b = load_bundle(bundle_path);
    int year = single_year(o, "evaluate --bundle");
    if (year == 0) year = b.provenance.held_out_year;
    if (year == 0) throw ValidationError("bundle was trained on every year; pass --hold-out");
    if (b.provenance.held_out_year != 0 && year != b.provenance.held_out_year) {
      throw ValidationError("bundle held out " + std::to_string(b.provenance.held_out_year) + ", not " +
                            std::to_string(year));
    }
    const auto [train, test] = split_train_test(instances, year);
    const ScenarioFit fit = fit_from_bundle(b);
    const std::uint64_t before = state_hash(fit);
    ScenarioReport r = evaluate_scenario(fit, test, o.threshold);
    r.audit = audit_split(train, test, year);
    r.audit.hash_before = before;
    r.audit.hash_after = state_hash(fit);
    r.held_out_year = year;
    std::set<int> ty;
    for (const auto& m : train.rows) ty.insert(m.year);
    r.train_years.assign(ty.begin(), ty.end());
    r.n_train = static_cast<std::size_t>(train.n_rows());
    reports.push_back(std::move(r));
    cfg = {{"bundle", bundle_path},
           {"bundle_config_hash", b.provenance.config_hash},
           {"seed", b.provenance.seed},
           {"decision_threshold", o.threshold},
           {"year", year}};
  } else {
    const ScenarioConfig config = make_config(o);
    reports = run_scenarios(instances, config);
    cfg = config_json(config);
  }
  const auto files = write_reports(dir, reports);
  write_manifest(dir, "evaluate", args, o.seed, cfg, files);
  for (const auto& r : reports) {
    out << r.held_out_year << " (trained on";
    for (const int y : r.train_years) out << ' ' << y;
    out << "):";
    for (const auto& m : r.metrics) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " %s=%.4f", m.model.c_str(), m.auroc);
      out << buf;
    }
    out << (r.audit.ok() ? "" : "  LEAKAGE AUDIT FAILED") << '\n';
  }
  for (const auto& r : reports) {
    if (!r.audit.ok()) return 2;
  }
  return 0;
}

int run_tune(RunOptions o, const std::vector<std::string>& args, std::ostream& out) {
  o.tune = true;
  const ScenarioConfig config = make_config(o);
  const int year = single_year(o, "tune");
  const auto instances = load_instances(o.instances);
  const FeatureMatrix train = year ? split_train_test(instances, year).first : to_feature_matrix(instances);
  std::vector<TuningLog> tuning;
  fit_scenario(train, config, &tuning);

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  std::vector<fs::path> files;
  json best = json::object();
  for (const auto& t : tuning) {
    const fs::path p = dir / ("trials_" + t.model + ".csv");
    write_trials(p, t.trials);
    files.push_back(p);
    json fields = json::object();
    for (const auto& [k, v] : spec_fields(t.best)) fields[k] = v;
    best[t.model] = {{"spec", describe_spec(t.best)}, {"fields", fields}, {"trials", t.trials.size()}};
    out << t.model << ": " << describe_spec(t.best) << " (" << t.trials.size() << " trials)\n";
  }
  files.push_back(dir / "best_specs.json");
  write_text(files.back(), best.dump(1) + "\n");
  write_manifest(dir, "tune", args, o.seed, config_json(config), files);
  return 0;
}

struct ExplainOptions {
  std::string bundle;
  std::string background = "train";
  std::size_t n_instances = 100;
  std::size_t n_background = 100;
  int samples = 64;
  int top_k = 5;
};

int run_explain(const RunOptions& o, const ExplainOptions& e, const std::vector<std::string>& args,
                std::ostream& out) {
  PanelConfig pc;
  pc.n_instances = e.n_instances;
  pc.n_background = e.n_background;
  pc.n_samples = e.samples;
  pc.top_k = e.top_k;
  pc.background = parse_background_source(e.background);
  pc.seed = o.seed;
  pc.validate();

  const auto instances = load_instances(o.instances);
  int year = single_year(o, "explain");
  ScenarioFit fit;
  json cfg;
  if (!e.bundle.empty()) {
    const ModelBundle b = load_bundle(e.bundle);
    if (year == 0) year = b.provenance.held_out_year;
    fit = fit_from_bundle(b);
    cfg = {{"bundle", e.bundle}, {"bundle_config_hash", b.provenance.config_hash}};
  }
  if (year == 0) throw ValidationError("explain needs --hold-out or a bundle trained with one");
  const auto [train, test] = split_train_test(instances, year);
  if (e.bundle.empty()) {
    const ScenarioConfig config = make_config(o);
    fit = fit_scenario(train, config);
    cfg = config_json(config);
  }
  const FeatureMatrix& pool = pc.background == BackgroundSource::Train ? train : test;
  const FeatureMatrix background = select_background(pool, pc.n_background, o.seed);
  const Panel panel = build_panel(fit.stack, fit.preprocessor, test, background, pc);

  cfg["panel"] = {{"year", year},
                  {"background", e.background},
                  {"n_instances", pc.n_instances},
                  {"n_background", pc.n_background},
                  {"samples", pc.n_samples},
                  {"top_k", pc.top_k}};
  const fs::path dir = o.out_dir;
  const auto files = emit_panel_plots(panel, dir);
  write_manifest(dir, "explain", args, o.seed, cfg, files);
  out << "meta inputs:";
  for (const auto& r : panel.meta_ranking) out << ' ' << r.name;
  out << '\n';
  for (const auto& b : panel.bases) {
    out << b.model << " top features:";
    for (const auto& s : b.scatter) out << ' ' << s.feature;
    out << '\n';
  }
  return 0;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int run_report(const std::vector<std::string>& inputs, const RunOptions& o, const std::vector<std::string>& args,
               std::ostream& out) {
  std::map<int, ScenarioReport> by_year;
  for (const auto& in : inputs) {
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(in)) {
      const std::string name = entry.path().filename().string();
      if (name.starts_with("scenario_") && name.ends_with(".json")) found.push_back(entry.path());
    }
    std::sort(found.begin(), found.end());
    for (const auto& p : found) {
      ScenarioReport r;
      try {
        r = report_from_json(json::parse(read_file(p)));
      } catch (const json::exception& ex) {
        throw ValidationError("malformed scenario file " + p.string() + ": " + ex.what());
      }
      if (by_year.count(r.held_out_year)) {
        throw ValidationError("scenario " + std::to_string(r.held_out_year) + " appears more than once");
      }
      by_year.emplace(r.held_out_year, std::move(r));
    }
  }
  if (by_year.empty()) throw ValidationError("no scenario_*.json files in the given inputs");
  std::vector<ScenarioReport> reports;
  for (auto& [y, r] : by_year) reports.push_back(std::move(r));

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  auto files = write_reports(dir, reports);

  std::ostringstream md;
  md << "# Transfusion model report\n\n";
  md << "Scenarios:";
  for (const auto& r : reports) md << ' ' << r.held_out_year;
  md << "\n\n## Held-out performance\n\n| Model |";
  for (const auto& r : reports) md << ' ' << r.held_out_year << " AUC | Acc | F1 | Pre | Rec |";
  md << "\n|---|";
  for (std::size_t i = 0; i < reports.size(); ++i) md << "---|---|---|---|---|";
  md << '\n';
  for (std::size_t k = 0; k < kModelRows.size(); ++k) {
    md << "| " << kModelRows[k] << " |";
    for (const auto& r : reports) {
      const auto& m = r.metrics.at(k);
      md << ' ' << fmt4(m.auroc) << " | " << fmt4(m.accuracy) << " | " << fmt4(m.f1) << " | " << fmt4(m.precision)
         << " | " << fmt4(m.recall) << " |";
    }
    md << '\n';
  }
  md << "\n## Leakage audit\n\n| Held-out year | Train years | Train rows | Test rows | Shared encounters | State "
        "unchanged |\n|---|---|---|---|---|---|\n";
  for (const auto& r : reports) {
    md << "| " << r.held_out_year << " | ";
    for (std::size_t i = 0; i < r.train_years.size(); ++i) md << (i ? " " : "") << r.train_years[i];
    md << " | " << r.n_train << " | " << r.n_test << " | " << r.audit.shared_encounters << " | "
       << (r.audit.hash_before == r.audit.hash_after ? "yes" : "no") << " |\n";
  }
  md << "\n## Figures\n\n- ROC: plots/roc.svg (points in plots/roc.csv)\n"
        "- Precision-recall: plots/pr.svg (plots/pr.csv)\n"
        "- Calibration: plots/calibration.svg (plots/calibration.csv)\n";
  write_text(dir / "report.md", md.str());
  files.push_back(dir / "report.md");
  write_manifest(dir, "report", args, o.seed, {{"inputs", inputs}}, files);
  out << "merged " << reports.size() << " scenarios into " << (dir / "report.md").string() << '\n';
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transfusion-need prediction: cohort building, stacked models and evaluation", "transfuse"};
  app.require_subcommand(1);
  app.fallthrough();
  RunOptions o;
  app.add_option("--out", o.out_dir, "Output directory (default $TRANSFUSE_OUT or transfuse_out)");
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic cohort (encounters, observations, transfusions)");
  c_synth->add_option("--n-per-year", synth.n_per_year, "Encounters per year")->capture_default_str();
  c_synth->add_option("--first-year", synth.first_year)->capture_default_str();
  c_synth->add_option("--last-year", synth.last_year)->capture_default_str();
  c_synth->add_option("--prevalence", synth.prevalence, "Transfused fraction")->capture_default_str();
  c_synth->add_flag("--planted", synth.planted, "Class signal only in hemoglobin and platelets");

  std::string data;
  auto* c_cohort = app.add_subcommand("cohort", "Apply exclusions, build instances and the cohort summary");
  c_cohort->add_option("--data", data, "Directory with encounters.csv, observations.csv, transfusions.csv")
      ->required();

  std::string bundle;
  auto* c_fit = app.add_subcommand("fit", "Fit preprocessing and all models; write a bundle");
  add_model_options(c_fit, o);
  c_fit->add_option("--hold-out", o.years, "Year excluded from training");
  c_fit->add_option("--bundle", bundle, "Bundle path (default <out>/bundle.tfb)");

  auto* c_eval = app.add_subcommand("evaluate", "Leave-one-year-out evaluation, or score a saved bundle");
  add_model_options(c_eval, o);
  c_eval->add_option("--hold-out", o.years, "Held-out years (default: every year)");
  c_eval->add_option("--bundle", bundle, "Evaluate this bundle on its held-out year");

  auto* c_tune = app.add_subcommand("tune", "Grid search on one training split");
  add_model_options(c_tune, o);
  c_tune->add_option("--hold-out", o.years, "Year excluded from the search");

  ExplainOptions ex;
  auto* c_explain = app.add_subcommand("explain", "Attribution panel for the stacked model");
  add_model_options(c_explain, o);
  c_explain->add_option("--hold-out", o.years, "Year whose instances are explained");
  c_explain->add_option("--bundle", ex.bundle, "Use a saved bundle instead of fitting");
  c_explain->add_option("--background", ex.background, "Background rows from the train or test split")
      ->capture_default_str();
  c_explain->add_option("--n-instances", ex.n_instances)->capture_default_str();
  c_explain->add_option("--n-background", ex.n_background)->capture_default_str();
  c_explain->add_option("--samples", ex.samples, "Permutations per instance")->capture_default_str();
  c_explain->add_option("--top-k", ex.top_k)->capture_default_str();

  std::vector<std::string> inputs;
  auto* c_report = app.add_subcommand("report", "Merge evaluate outputs into one report");
  c_report->add_option("--inputs", inputs, "Directories written by evaluate")->required();

  // CLI11 expects argv[0].
  std::vector<std::string> argv_store{"transfuse"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* active = &app;
    for (const auto* sub : app.get_subcommands()) active = sub;
    err << active->help();
    return 1;
  }

  try {
    if (c_synth->parsed()) return run_synth(synth, o, args, out);
    if (c_cohort->parsed()) return run_cohort(data, o, args, out);
    if (c_fit->parsed()) return run_fit(o, bundle, args, out);
    if (c_eval->parsed()) return run_evaluate(o, bundle, args, out);
    if (c_tune->parsed()) return run_tune(o, args, out);
    if (c_explain->parsed()) return run_explain(o, ex, args, out);
    if (c_report->parsed()) return run_report(inputs, o, args, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace transfuse
