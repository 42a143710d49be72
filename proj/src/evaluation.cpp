#include "vfvm/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "vfvm/error.hpp"

namespace vfvm {

InformationCriteria information_criteria(double ll, std::size_t k, std::size_t n)
{
  if (n == 0)
    throw ArgumentError("information criteria need n >= 1");
  const double kd = static_cast<double>(k);
  return {2.0 * kd - 2.0 * ll, kd * std::log(static_cast<double>(n)) - 2.0 * ll};
}

namespace {

void add_marginals(ParameterCount& pc, std::size_t d)
{
  pc.breakdown.emplace_back("marginals", 5 * d);
  pc.total += 5 * d;
}

void add_prefixed(ParameterCount& out, const std::string& prefix, const ParameterCount& in)
{
  for (const auto& [name, k] : in.breakdown)
    out.breakdown.emplace_back(prefix + "." + name, k);
  out.total += in.total;
}

} // namespace

ParameterCount count_parameters(const RVineModel& m)
{
  ParameterCount pc;
  add_marginals(pc, m.marginals.size());
  std::size_t k = 0;
  for (const auto& tree : m.structure.trees)
    for (const auto& e : tree)
      if (e.copula.family != CopulaFamily::independence)
        ++k;
  pc.breakdown.emplace_back("pair_copulas", k);
  pc.total += k;
  return pc;
}

ParameterCount count_parameters(const ArchimedeanModel& m)
{
  ParameterCount pc;
  add_marginals(pc, m.marginals.size());
  const std::size_t k = m.family == CopulaFamily::independence ? 0 : 1;
  pc.breakdown.emplace_back("archimedean_copula", k);
  pc.total += k;
  return pc;
}

ParameterCount count_parameters(const JointModel& m)
{
  return std::visit([](const auto& x) { return count_parameters(x); }, m.model);
}

ParameterCount count_parameters(const CompositeModel& m)
{
  ParameterCount pc;
  add_prefixed(pc, "v", count_parameters(m.f_v));
  add_prefixed(pc, "nv", count_parameters(m.f_nv));
  add_prefixed(pc, "c", count_parameters(m.f_c));
  pc.breakdown.emplace_back("class_proportions", 2);
  pc.total += 2;
  return pc;
}

PredictionErrors prediction_errors(std::span<const double> predictions,
                                   std::span<const double> truth)
{
  if (predictions.size() != truth.size())
    throw ArgumentError("prediction and truth lengths differ");
  if (predictions.empty())
    throw ArgumentError("prediction errors need at least one pair");
  double a = 0.0, s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = predictions[i] - truth[i];
    a += std::abs(e);
    s += e * e;
  }
  const double n = static_cast<double>(truth.size());
  return {a / n, s / n};
}

namespace {

std::vector<double> row7(const DatasetRow& r)
{
  const auto ct = r.d.ct_vector();
  std::vector<double> x(ct.begin(), ct.end());
  x.push_back(*r.d.rat);
  return x;
}

void fill_ic(ScoreReport& s)
{
  const auto ic = information_criteria(s.ll, s.k, s.n);
  s.aic = ic.aic;
  s.bic = ic.bic;
}

} // namespace

std::pair<ScoreReport, ScoreReport> score_model(const CompositeModel& m, const Dataset& d,
                                                const std::string& label)
{
  ScoreReport all, comp;
  all.model = comp.model = label;
  all.subset = "all";
  comp.subset = "composite_only";
  all.k = count_parameters(m).total;
  comp.k = count_parameters(m.f_c).total;
  for (const auto& r : d.rows) {
    if (!r.d.rat)
      throw ArgumentError("scoring needs the mineral ratio on every row");
    const auto x = row7(r);
    all.ll += std::log(composite_density(m, x));
    ++all.n;
    if (classify_ratio(*r.d.rat, m.epsilon) == ParticleClass::composite) {
      comp.ll += joint_log_density(m.f_c, x);
      ++comp.n;
    }
  }
  if (all.n)
    fill_ic(all);
  if (comp.n)
    fill_ic(comp);
  return {all, comp};
}

namespace {

Columns drop_row(const Columns& cols, std::size_t pos)
{
  Columns out = cols;
  for (auto& c : out)
    c.erase(c.begin() + static_cast<std::ptrdiff_t>(pos));
  return out;
}

struct ClassSlot {
  const Columns* cols = nullptr;
  const std::vector<std::size_t>* rows = nullptr;
  std::optional<JointModel> full;
  std::string error;
};

JointModel& slot_model(CompositeModel& m, ParticleClass c)
{
  return c == ParticleClass::valuable       ? m.f_v
         : c == ParticleClass::non_valuable ? m.f_nv
                                            : m.f_c;
}

std::size_t& slot_count(CompositeModel& m, ParticleClass c)
{
  return c == ParticleClass::valuable       ? m.n_v
         : c == ParticleClass::non_valuable ? m.n_nv
                                            : m.n_c;
}

} // namespace

LooResult loo_cv(const Dataset& d, const LooOptions& options)
{
  const CompositeOptions& co = options.composite;
  const Partition p = partition_dataset(d, co.epsilon);
  const ParticleClass classes[3] = {ParticleClass::valuable, ParticleClass::non_valuable,
                                    ParticleClass::composite};
  ClassSlot slots[3];
  slots[0].cols = &p.v;
  slots[0].rows = &p.rows_v;
  slots[1].cols = &p.nv;
  slots[1].rows = &p.rows_nv;
  slots[2].cols = &p.c;
  slots[2].rows = &p.rows_c;
  for (int k = 0; k < 3; ++k) {
    try {
      slots[k].full = fit_class_model(classes[k], *slots[k].cols, co);
    } catch (const Error& e) {
      slots[k].error = e.what();
    }
  }

  // position of each row inside its partition
  std::vector<std::pair<int, std::size_t>> where(d.rows.size());
  for (int k = 0; k < 3; ++k)
    for (std::size_t pos = 0; pos < slots[k].rows->size(); ++pos)
      where[(*slots[k].rows)[pos]] = {k, pos};

  CompositeModel base;
  base.epsilon = co.epsilon;
  base.atom_width = co.atom_width;
  base.n_v = p.rows_v.size();
  base.n_nv = p.rows_nv.size();
  base.n_c = p.rows_c.size();
  for (int k = 0; k < 3; ++k)
    if (slots[k].full)
      slot_model(base, classes[k]) = *slots[k].full;

  LooResult res;
  res.rows.resize(d.rows.size());
  std::atomic<std::size_t> next{0}, fits{0};

  auto run_fold = [&](std::size_t i) {
    LooRow& out = res.rows[i];
    const auto& r = d.rows[i];
    out.row = i;
    out.id = r.id;
    out.truth = *r.d.rat;
    const auto [k, pos] = where[i];
    out.truth_class = classes[k];
    ++fits;
    try {
      for (int o = 0; o < 3; ++o)
        if (o != k && !slots[o].full)
          throw FittingError(slots[o].error);
      const Columns cols = drop_row(*slots[k].cols, pos);
      CompositeModel m = base;
      JointModel& sub = slot_model(m, classes[k]);
      if (options.fast) {
        if (!slots[k].full)
          throw FittingError(slots[k].error);
        sub = refit_class_model(classes[k], *slots[k].full, cols, co);
      } else {
        sub = fit_class_model(classes[k], cols, co);
      }
      --slot_count(m, classes[k]);
      const auto ct = r.d.ct_vector();
      const Prediction pr = predict_vfvm(m, ct, co);
      if (pr.out_of_support) {
        out.excluded = true;
        out.reason = "out of support";
        return;
      }
      out.prediction = pr.value;
      out.predicted_class = pr.cls;
    } catch (const Error& e) {
      out.excluded = true;
      out.reason = e.what();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, options.parallelism);
  auto worker = [&] {
    for (std::size_t i; (i = next++) < d.rows.size();)
      run_fold(i);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(worker);
    for (auto& t : pool)
      t.join();
  }
  res.fits = fits.load();

  // reduction in row order
  std::vector<double> pa, ta, pc, tc;
  for (const auto& row : res.rows) {
    if (row.excluded) {
      ++res.excluded;
      continue;
    }
    pa.push_back(row.prediction);
    ta.push_back(row.truth);
    if (row.truth_class == ParticleClass::composite) {
      pc.push_back(row.prediction);
      tc.push_back(row.truth);
    }
  }
  const std::string label = to_string(co.joint.engine);
  const bool full_ok = slots[0].full && slots[1].full && slots[2].full;
  if (full_ok) {
    std::tie(res.all, res.composite) = score_model(base, d, label);
  } else {
    res.all.model = res.composite.model = label;
    res.composite.subset = "composite_only";
  }
  res.all.n = d.rows.size();
  res.composite.n = p.rows_c.size();
  res.all.excluded = res.excluded;
  res.composite.excluded = 0;
  for (const auto& row : res.rows)
    if (row.excluded && row.truth_class == ParticleClass::composite)
      ++res.composite.excluded;
  if (!pa.empty()) {
    const auto e = prediction_errors(pa, ta);
    res.all.mae = e.mae;
    res.all.mse = e.mse;
  }
  if (!pc.empty()) {
    const auto e = prediction_errors(pc, tc);
    res.composite.mae = e.mae;
    res.composite.mse = e.mse;
  }
  return res;
}

namespace {

using json = nlohmann::json;

std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

json opt(const std::optional<double>& v)
{
  return v ? json(*v) : json(nullptr);
}

} // namespace

std::string render_report_text(const std::vector<ScoreReport>& scores)
{
  if (scores.empty())
    return "";
  std::vector<std::string> models;
  for (const auto& s : scores)
    if (std::find(models.begin(), models.end(), s.model) == models.end())
      models.push_back(s.model);
  std::map<std::pair<std::string, std::string>, const ScoreReport*> at;
  for (const auto& s : scores)
    at[{s.model, s.subset}] = &s;

  struct Metric {
    const char* name;
    const char* subset;
    int field;
  };
  const Metric metrics[] = {
    {"LL", "all", 0},   {"AIC", "all", 1},   {"BIC", "all", 2},   {"MAE", "all", 3},
    {"MSE", "all", 4},  {"LL_c", "composite_only", 0}, {"AIC_c", "composite_only", 1},
    {"BIC_c", "composite_only", 2}, {"MAE_c", "composite_only", 3},
    {"MSE_c", "composite_only", 4},
  };
  std::vector<std::vector<std::string>> table;
  table.push_back({"metric"});
  for (const auto& m : models)
    table[0].push_back(m);
  for (const auto& mt : metrics) {
    bool any = false;
    std::vector<std::string> line{mt.name};
    for (const auto& m : models) {
      auto it = at.find({m, mt.subset});
      std::string cell = "-";
      if (it != at.end()) {
        const ScoreReport& s = *it->second;
        std::optional<double> v;
        switch (mt.field) {
        case 0: v = s.ll; break;
        case 1: v = s.aic; break;
        case 2: v = s.bic; break;
        case 3: v = s.mae; break;
        case 4: v = s.mse; break;
        }
        if (v) {
          cell = fmt(*v);
          any = true;
        }
      }
      line.push_back(cell);
    }
    if (any)
      table.push_back(std::move(line));
  }
  std::vector<std::size_t> width(table[0].size(), 0);
  for (const auto& line : table)
    for (std::size_t c = 0; c < line.size(); ++c)
      width[c] = std::max(width[c], line[c].size());
  std::ostringstream os;
  for (const auto& line : table) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c == 0)
        os << line[c] << std::string(width[c] - line[c].size(), ' ');
      else
        os << "  " << std::string(width[c] - line[c].size(), ' ') << line[c];
    }
    os << '\n';
  }
  return os.str();
}

std::string render_report_json(const std::vector<ScoreReport>& scores)
{
  json j;
  j["schema"] = "vfvm.scores";
  j["version"] = 1;
  j["scores"] = json::array();
  for (const auto& s : scores)
    j["scores"].push_back({{"model", s.model},
                           {"subset", s.subset},
                           {"ll", s.ll},
                           {"aic", s.aic},
                           {"bic", s.bic},
                           {"k", s.k},
                           {"n", s.n},
                           {"mae", opt(s.mae)},
                           {"mse", opt(s.mse)},
                           {"excluded", s.excluded}});
  return j.dump(2) + "\n";
}

std::vector<ScoreReport> parse_report_json(const std::string& text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("score report", 0, e.what());
  }
  if (j.value("schema", std::string()) != "vfvm.scores")
    throw SchemaError("not a score report document");
  if (j.value("version", 0) != 1)
    throw SchemaError("unsupported score report version " + j.value("version", json()).dump());
  std::vector<ScoreReport> out;
  try {
    for (const auto& s : j.at("scores")) {
      ScoreReport r;
      r.model = s.at("model").get<std::string>();
      r.subset = s.at("subset").get<std::string>();
      r.ll = s.at("ll").get<double>();
      r.aic = s.at("aic").get<double>();
      r.bic = s.at("bic").get<double>();
      r.k = s.at("k").get<std::size_t>();
      r.n = s.at("n").get<std::size_t>();
      if (!s.at("mae").is_null())
        r.mae = s.at("mae").get<double>();
      if (!s.at("mse").is_null())
        r.mse = s.at("mse").get<double>();
      r.excluded = s.value("excluded", std::size_t{0});
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ParseError("score report", 0, e.what());
  }
  return out;
}

std::string loo_errors_csv(const LooResult& r)
{
  std::ostringstream os;
  os << "row,id,truth,prediction,error,truth_class,predicted_class,excluded\n";
  for (const auto& row : r.rows) {
    os << row.row << ',' << row.id << ',' << format_double(row.truth) << ',';
    if (row.excluded)
      os << ",," << to_string(row.truth_class) << ",,1\n";
    else
      os << format_double(row.prediction) << ',' << format_double(row.prediction - row.truth)
         << ',' << to_string(row.truth_class) << ',' << to_string(row.predicted_class) << ",0\n";
  }
  return os.str();
}

} // namespace vfvm
