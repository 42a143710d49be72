// vfvm command line driver. Talks to the library only through vfvm.h.

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "vfvm/vfvm.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Exit codes: 0 ok, 1 internal, 2 argument/config, 3 data/parse, 4 fitting.
struct Failure {
  int code;
  std::string message;
};

void check(vfvm_status s)
{
  if (s != VFVM_OK)
    throw Failure{static_cast<int>(s), vfvm_last_error()};
}

struct DatasetPtr {
  vfvm_dataset* p = nullptr;
  ~DatasetPtr() { vfvm_dataset_free(p); }
};

struct ModelPtr {
  vfvm_model* p = nullptr;
  ~ModelPtr() { vfvm_model_free(p); }
};

struct CString {
  char* p = nullptr;
  ~CString() { vfvm_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

std::string fmt(double v)
{
  if (std::isnan(v))
    return "nan";
  std::array<char, 64> buf{};
  auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

void write_text(const fs::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Failure{3, "cannot write " + path.string()};
  out << text;
  if (!out)
    throw Failure{3, "write failed for " + path.string()};
}

void need_file(const std::string& path, const char* what)
{
  if (!fs::exists(path))
    throw Failure{2, std::string(what) + " does not exist: " + path};
}

std::uint64_t fnv1a(const std::string& s)
{
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string utc_now()
{
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Options shared by the modelling subcommands.
struct ModelConfig {
  std::string engine = "rvine";
  std::vector<std::string> families{"frank", "clayton", "gumbel", "joe"};
  double epsilon = 0.01;
  double atom_width = 0.01;
  bool rank_pseudo_obs = false;
  std::size_t min_rows = 30;
  int em_max_iter = 500;
  double em_tol = 1e-8;
  double copula_tol = 1e-6;
  double integration_tol = 1e-8;
  double median_tol = 1e-6;
};

void add_model_options(CLI::App* app, ModelConfig& c)
{
  app->add_option("--engine", c.engine, "rvine or archimedean")
    ->check(CLI::IsMember({"rvine", "archimedean"}))
    ->capture_default_str();
  app->add_option("--families", c.families, "candidate copula families")
    ->delimiter(',')
    ->check(CLI::IsMember({"frank", "clayton", "gumbel", "joe"}))
    ->capture_default_str();
  app->add_option("--epsilon", c.epsilon, "class threshold on rat")->capture_default_str();
  app->add_option("--atom-width", c.atom_width, "width of the pure-class atoms")
    ->capture_default_str();
  app->add_flag("--rank-pseudo-obs", c.rank_pseudo_obs, "rank-based pseudo-observations");
  app->add_option("--min-rows", c.min_rows, "minimum rows per class")->capture_default_str();
  app->add_option("--em-max-iter", c.em_max_iter)->capture_default_str();
  app->add_option("--em-tol", c.em_tol)->capture_default_str();
  app->add_option("--copula-tol", c.copula_tol)->capture_default_str();
  app->add_option("--integration-tol", c.integration_tol)->capture_default_str();
  app->add_option("--median-tol", c.median_tol)->capture_default_str();
}

vfvm_fit_options fit_options(const ModelConfig& c)
{
  vfvm_fit_options o;
  vfvm_fit_options_default(&o);
  o.engine = c.engine == "archimedean" ? VFVM_ENGINE_ARCHIMEDEAN : VFVM_ENGINE_RVINE;
  o.families = 0;
  for (const auto& f : c.families) {
    if (f == "frank")
      o.families |= VFVM_FAMILY_FRANK;
    else if (f == "clayton")
      o.families |= VFVM_FAMILY_CLAYTON;
    else if (f == "gumbel")
      o.families |= VFVM_FAMILY_GUMBEL;
    else if (f == "joe")
      o.families |= VFVM_FAMILY_JOE;
  }
  o.epsilon = c.epsilon;
  o.atom_width = c.atom_width;
  o.rank_pseudo_obs = c.rank_pseudo_obs;
  o.min_rows = c.min_rows;
  o.em_max_iter = c.em_max_iter;
  o.em_tol = c.em_tol;
  o.copula_tol = c.copula_tol;
  o.integration_tol = c.integration_tol;
  o.median_tol = c.median_tol;
  if (!(c.epsilon > 0.0 && c.epsilon < 0.5) || !(c.atom_width > 0.0 && c.atom_width < 0.5))
    throw Failure{2, "--epsilon and --atom-width must lie in (0, 0.5)"};
  if (!(c.em_tol > 0.0) || !(c.copula_tol > 0.0) || !(c.integration_tol > 0.0) ||
      !(c.median_tol > 0.0) || c.em_max_iter <= 0)
    throw Failure{2, "tolerances and iteration limits must be positive"};
  return o;
}

json model_config_json(const ModelConfig& c)
{
  return {{"engine", c.engine},
          {"families", c.families},
          {"epsilon", c.epsilon},
          {"atom_width", c.atom_width},
          {"rank_pseudo_obs", c.rank_pseudo_obs},
          {"min_rows", c.min_rows},
          {"em_max_iter", c.em_max_iter},
          {"em_tol", c.em_tol},
          {"copula_tol", c.copula_tol},
          {"integration_tol", c.integration_tol},
          {"median_tol", c.median_tol}};
}

// <out>.manifest.json; the hash covers command and config only.
void write_manifest(const std::string& out, const std::string& command, const json& config,
                    std::uint64_t seed, const std::vector<std::string>& artifacts)
{
  const std::string canonical = json{{"command", command}, {"config", config}}.dump();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical)));
  json m;
  m["schema"] = "vfvm.manifest";
  m["version"] = 1;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = std::string("fnv1a64:") + hash;
  m["seed"] = seed;
  m["versions"] = {{"vfvm", vfvm_version()}, {"model_schema", 1}};
  m["artifacts"] = artifacts;
  m["timestamp"] = utc_now();
  write_text(out + ".manifest.json", m.dump(2) + "\n");
}

std::string histogram_csv(const std::string& errors_csv, double width)
{
  // error column of the per-row CSV; excluded rows skipped
  std::istringstream in(errors_csv);
  std::string line;
  std::getline(in, line);
  const int bins = static_cast<int>(std::llround(2.0 / width));
  std::vector<std::size_t> counts(bins, 0);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ','))
      cells.push_back(cell);
    if (cells.size() < 8 || cells[7] == "1" || cells[7] == "true")
      continue;
    const double e = std::stod(cells[4]);
    if (!std::isfinite(e))
      continue;
    int b = static_cast<int>(std::floor((e + 1.0) / width));
    b = std::clamp(b, 0, bins - 1);
    ++counts[b];
  }
  std::string out = "bin_lo,bin_hi,count\n";
  for (int b = 0; b < bins; ++b)
    out += fmt(-1.0 + b * width) + "," + fmt(-1.0 + (b + 1) * width) + "," +
           std::to_string(counts[b]) + "\n";
  return out;
}

int run(int argc, char** argv)
{
  CLI::App app{"Particle descriptor modelling and VFVM prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vfvm_version());

  // descriptors
  std::string d_volume, d_labels, d_out;
  std::vector<std::string> d_slices;
  bool d_unlabeled = false;
  auto* descriptors = app.add_subcommand("descriptors", "volumes -> descriptor CSV");
  descriptors->add_option("--volume", d_volume, "grayscale volume")->required();
  descriptors->add_option("--labels", d_labels, "label volume")->required();
  descriptors->add_option("--slice", d_slices, "phase slice document (repeatable)");
  descriptors->add_flag("--include-unlabeled", d_unlabeled,
                        "keep particles without slice intersection");
  descriptors->add_option("--out", d_out, "output CSV")->required();

  // fit
  ModelConfig f_cfg;
  std::string f_data, f_out;
  auto* fit = app.add_subcommand("fit", "CSV -> model document + score report");
  fit->add_option("--data", f_data, "labeled descriptor CSV")->required();
  fit->add_option("--out", f_out, "model document path")->required();
  add_model_options(fit, f_cfg);

  // predict
  std::string p_model, p_data, p_out;
  auto* predict = app.add_subcommand("predict", "model + CSV -> predictions CSV");
  predict->add_option("--model", p_model)->required();
  predict->add_option("--data", p_data, "descriptor CSV (rat ignored)")->required();
  predict->add_option("--out", p_out, "predictions CSV")->required();

  // evaluate
  ModelConfig e_cfg;
  std::string e_model, e_data, e_out;
  std::vector<std::string> e_with;
  bool e_fast = false;
  std::size_t e_par = 1;
  double e_bin = 0.05;
  auto* evaluate = app.add_subcommand("evaluate", "leave-one-out report + error histogram");
  evaluate->add_option("--data", e_data, "labeled descriptor CSV")->required();
  evaluate->add_option("--model", e_model,
                       "model document; its engine, epsilon and atom width are used");
  evaluate->add_option("--out", e_out, "output prefix")->required();
  evaluate->add_flag("--fast-loo", e_fast, "warm-started refits of the held-out class only");
  evaluate->add_option("--parallelism", e_par, "worker threads")->capture_default_str();
  evaluate->add_option("--bin-width", e_bin, "histogram bin width")->capture_default_str();
  evaluate->add_option("--with-report", e_with, "merge other report JSON files into the table");
  add_model_options(evaluate, e_cfg);

  // sample
  std::string s_model, s_out;
  std::size_t s_n = 0;
  std::uint64_t s_seed = 0;
  auto* sample = app.add_subcommand("sample", "model -> synthetic CSV");
  sample->add_option("--model", s_model)->required();
  sample->add_option("--n", s_n, "number of rows")->required();
  sample->add_option("--seed", s_seed)->capture_default_str();
  sample->add_option("--out", s_out, "output CSV")->required();

  // synth
  std::string y_spec, y_out;
  std::uint64_t y_seed = 0;
  bool y_bench = false;
  std::vector<std::size_t> y_counts{227, 489, 625};
  std::string y_truth;
  auto* synth = app.add_subcommand("synth", "scene spec -> volumes/dataset, or benchmark dataset");
  auto* y_spec_opt = synth->add_option("--spec", y_spec, "scene spec JSON");
  auto* y_bench_opt = synth->add_flag("--benchmark", y_bench, "draw from the benchmark model");
  y_spec_opt->excludes(y_bench_opt);
  auto* y_seed_opt = synth->add_option("--seed", y_seed, "overrides the spec seed");
  synth->add_option("--counts", y_counts, "benchmark class counts v nv c")
    ->expected(3)
    ->capture_default_str();
  synth->add_option("--truth-model", y_truth, "also write the benchmark model document");
  synth->add_option("--out", y_out, "output directory (spec) or CSV (benchmark)")->required();

  // weights
  std::string w_labels, w_out;
  std::vector<std::size_t> w_z;
  vfvm_weight_options w_opt;
  vfvm_weight_options_default(&w_opt);
  auto* weights = app.add_subcommand("weights", "labels -> weight-map volume");
  weights->add_option("--labels", w_labels)->required();
  weights->add_option("--z", w_z, "annotated z planes")->required()->delimiter(',');
  weights->add_option("--d-hat", w_opt.d_hat)->capture_default_str();
  weights->add_option("--decay", w_opt.decay)->capture_default_str();
  weights->add_option("--floor", w_opt.floor)->capture_default_str();
  weights->add_option("--out", w_out, "weight map volume")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*descriptors) {
    need_file(d_volume, "volume");
    need_file(d_labels, "labels");
    for (const auto& s : d_slices)
      need_file(s, "slice");
    std::vector<const char*> sp;
    for (const auto& s : d_slices)
      sp.push_back(s.c_str());
    DatasetPtr d;
    check(vfvm_descriptors(d_volume.c_str(), d_labels.c_str(), sp.data(), sp.size(),
                           d_unlabeled, &d.p));
    check(vfvm_dataset_write_csv(d.p, d_out.c_str()));
    std::size_t n = 0;
    check(vfvm_dataset_size(d.p, &n));
    std::cout << "wrote " << n << " rows to " << d_out << "\n";
    write_manifest(d_out, "descriptors",
                   {{"volume", d_volume},
                    {"labels", d_labels},
                    {"slices", d_slices},
                    {"include_unlabeled", d_unlabeled}},
                   0, {d_out});
  } else if (*fit) {
    need_file(f_data, "data");
    const auto opts = fit_options(f_cfg);
    DatasetPtr d;
    check(vfvm_dataset_read_csv(f_data.c_str(), &d.p));
    ModelPtr m;
    check(vfvm_fit(d.p, &opts, &m.p));
    check(vfvm_model_save(m.p, f_out.c_str()));
    CString scores;
    check(vfvm_model_score(m.p, d.p, &scores.p));
    const std::string scores_path = f_out + ".scores.json";
    write_text(scores_path, scores.str());
    const char* docs[] = {scores.p};
    CString text;
    check(vfvm_render_report(docs, 1, &text.p, nullptr));
    std::cout << text.str();
    json cfg = model_config_json(f_cfg);
    cfg["data"] = f_data;
    write_manifest(f_out, "fit", cfg, 0, {f_out, scores_path});
  } else if (*predict) {
    need_file(p_model, "model");
    need_file(p_data, "data");
    ModelPtr m;
    check(vfvm_model_load(p_model.c_str(), &m.p));
    DatasetPtr d;
    check(vfvm_dataset_read_csv(p_data.c_str(), &d.p));
    std::size_t n = 0;
    check(vfvm_dataset_size(d.p, &n));
    static const char* cls[] = {"valuable", "non_valuable", "composite"};
    std::string out = "id,prediction,class,conditional_median,out_of_support\n";
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t id = 0;
      double ct[6];
      check(vfvm_dataset_get_row(d.p, i, &id, ct, nullptr, nullptr));
      vfvm_prediction p;
      check(vfvm_predict(m.p, ct, &p));
      out += std::to_string(id) + "," + fmt(p.value) + "," + cls[p.cls] + "," +
             (p.cls == VFVM_CLASS_COMPOSITE ? fmt(p.conditional_median) : std::string()) + "," +
             (p.out_of_support ? "1" : "0") + "\n";
    }
    write_text(p_out, out);
    write_manifest(p_out, "predict", {{"model", p_model}, {"data", p_data}}, 0, {p_out});
  } else if (*evaluate) {
    need_file(e_data, "data");
    if (!e_model.empty())
      need_file(e_model, "model");
    for (const auto& w : e_with)
      need_file(w, "report");
    if (e_par == 0)
      throw Failure{2, "--parallelism must be >= 1"};
    if (!(e_bin > 0.0 && e_bin <= 1.0))
      throw Failure{2, "--bin-width must lie in (0, 1]"};
    vfvm_loo_options lo;
    vfvm_loo_options_default(&lo);
    lo.fit = fit_options(e_cfg);
    if (!e_model.empty()) {
      ModelPtr m;
      check(vfvm_model_load(e_model.c_str(), &m.p));
      check(vfvm_model_engine(m.p, &lo.fit.engine));
      CString doc;
      check(vfvm_model_to_json(m.p, &doc.p));
      const auto j = json::parse(doc.str());
      lo.fit.epsilon = j.at("epsilon").get<double>();
      lo.fit.atom_width = j.at("atom_width").get<double>();
      e_cfg.engine = lo.fit.engine == VFVM_ENGINE_ARCHIMEDEAN ? "archimedean" : "rvine";
      e_cfg.epsilon = lo.fit.epsilon;
      e_cfg.atom_width = lo.fit.atom_width;
    }
    lo.fast = e_fast;
    lo.parallelism = e_par;
    DatasetPtr d;
    check(vfvm_dataset_read_csv(e_data.c_str(), &d.p));
    CString report, errors;
    std::size_t fits = 0;
    check(vfvm_loo(d.p, &lo, &report.p, &errors.p, &fits));
    std::vector<std::string> docs_text{report.str()};
    for (const auto& w : e_with) {
      std::ifstream in(w, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      docs_text.push_back(ss.str());
    }
    std::vector<const char*> docs;
    for (const auto& t : docs_text)
      docs.push_back(t.c_str());
    CString text;
    check(vfvm_render_report(docs.data(), docs.size(), &text.p, nullptr));
    const std::string json_path = e_out + ".json";
    const std::string text_path = e_out + ".txt";
    const std::string errors_path = e_out + ".errors.csv";
    const std::string hist_path = e_out + ".histogram.csv";
    write_text(json_path, report.str());
    write_text(text_path, text.str());
    write_text(errors_path, errors.str());
    write_text(hist_path, histogram_csv(errors.str(), e_bin));
    std::cout << text.str();
    json cfg = model_config_json(e_cfg);
    cfg["data"] = e_data;
    cfg["model"] = e_model;
    cfg["fast_loo"] = e_fast;
    cfg["bin_width"] = e_bin;
    cfg["with_report"] = e_with;
    // parallelism does not change any artifact, so it stays out of the hash
    write_manifest(e_out, "evaluate", cfg, 0, {json_path, text_path, errors_path, hist_path});
  } else if (*sample) {
    need_file(s_model, "model");
    ModelPtr m;
    check(vfvm_model_load(s_model.c_str(), &m.p));
    DatasetPtr d;
    check(vfvm_sample(m.p, s_n, s_seed, &d.p));
    check(vfvm_dataset_write_csv(d.p, s_out.c_str()));
    write_manifest(s_out, "sample", {{"model", s_model}, {"n", s_n}, {"seed", s_seed}}, s_seed,
                   {s_out});
  } else if (*synth) {
    if (y_bench) {
      ModelPtr truth;
      check(vfvm_benchmark_model(&truth.p));
      DatasetPtr d;
      check(vfvm_synth_dataset(truth.p, y_counts[0], y_counts[1], y_counts[2], y_seed, &d.p));
      check(vfvm_dataset_write_csv(d.p, y_out.c_str()));
      std::vector<std::string> artifacts{y_out};
      if (!y_truth.empty()) {
        check(vfvm_model_save(truth.p, y_truth.c_str()));
        artifacts.push_back(y_truth);
      }
      write_manifest(y_out, "synth",
                     {{"benchmark", true}, {"counts", y_counts}, {"seed", y_seed}}, y_seed,
                     artifacts);
    } else {
      if (y_spec.empty())
        throw Failure{2, "synth needs --spec or --benchmark"};
      need_file(y_spec, "spec");
      const bool override_seed = y_seed_opt->count() > 0;
      check(vfvm_synth_scene(y_spec.c_str(), y_out.c_str(), override_seed, y_seed));
      std::vector<std::string> artifacts;
      for (const auto& e : fs::directory_iterator(y_out))
        artifacts.push_back(e.path().string());
      std::sort(artifacts.begin(), artifacts.end());
      std::uint64_t seed = y_seed;
      if (!override_seed) {
        std::ifstream in(y_spec);
        seed = json::parse(in).value("seed", std::uint64_t{0});
      }
      fs::path base = fs::path(y_out);
      if (!base.has_filename())
        base = base.parent_path();
      write_manifest(base.string(), "synth",
                     {{"spec", y_spec}, {"seed_override", override_seed}, {"seed", seed}}, seed,
                     artifacts);
    }
  } else if (*weights) {
    need_file(w_labels, "labels");
    if (!(w_opt.d_hat > 0.0) || !(w_opt.decay > 0.0) || !(w_opt.floor >= 0.0))
      throw Failure{2, "--d-hat and --decay must be positive, --floor non-negative"};
    double c_f = 0.0;
    check(vfvm_weight_map(w_labels.c_str(), w_z.data(), w_z.size(), &w_opt, w_out.c_str(), &c_f));
    std::cout << "c_f " << fmt(c_f) << "\n";
    write_manifest(w_out, "weights",
                   {{"labels", w_labels},
                    {"z", w_z},
                    {"d_hat", w_opt.d_hat},
                    {"decay", w_opt.decay},
                    {"floor", w_opt.floor}},
                   0, {w_out});
  }
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
