#include "vfvm/vfvm.h"

#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <new>
#include <string>
#include <vector>

#include "vfvm/composite.hpp"
#include "vfvm/descriptors.hpp"
#include "vfvm/error.hpp"
#include "vfvm/evaluation.hpp"
#include "vfvm/serialize.hpp"
#include "vfvm/synth.hpp"
#include "vfvm/volume_io.hpp"

struct vfvm_dataset {
  vfvm::Dataset data;
};

struct vfvm_model {
  vfvm::CompositeModel model;
  vfvm::CompositeOptions options;
};

namespace {

thread_local std::string g_last_error;

vfvm_status fail(vfvm_status s, const char* what)
{
  g_last_error = what;
  return s;
}

// Runs f and maps exceptions onto status codes.
template <class F>
vfvm_status guard(F&& f)
{
  try {
    f();
    g_last_error.clear();
    return VFVM_OK;
  } catch (const vfvm::ArgumentError& e) {
    return fail(VFVM_ERR_ARGUMENT, e.what());
  } catch (const vfvm::DataError& e) {
    return fail(VFVM_ERR_DATA, e.what());
  } catch (const vfvm::FittingError& e) {
    return fail(VFVM_ERR_FIT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(VFVM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VFVM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(VFVM_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name)
{
  if (!p)
    throw vfvm::ArgumentError(std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s)
{
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out)
    throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

vfvm::CompositeOptions composite_options(const vfvm_fit_options& o)
{
  vfvm::CompositeOptions c;
  if (o.engine == VFVM_ENGINE_RVINE)
    c.joint.engine = vfvm::Engine::rvine;
  else if (o.engine == VFVM_ENGINE_ARCHIMEDEAN)
    c.joint.engine = vfvm::Engine::archimedean;
  else
    throw vfvm::ArgumentError("unknown engine " + std::to_string(o.engine));
  c.joint.families.clear();
  const std::pair<unsigned, vfvm::CopulaFamily> bits[] = {
    {VFVM_FAMILY_FRANK, vfvm::CopulaFamily::frank},
    {VFVM_FAMILY_CLAYTON, vfvm::CopulaFamily::clayton},
    {VFVM_FAMILY_GUMBEL, vfvm::CopulaFamily::gumbel},
    {VFVM_FAMILY_JOE, vfvm::CopulaFamily::joe}};
  for (const auto& [bit, f] : bits)
    if (o.families & bit)
      c.joint.families.push_back(f);
  if (o.families & ~0xFu)
    throw vfvm::ArgumentError("unknown copula family bits");
  if (c.joint.families.empty())
    throw vfvm::ArgumentError("at least one copula family is required");
  c.joint.rank_pseudo_obs = o.rank_pseudo_obs != 0;
  c.joint.min_rows = o.min_rows;
  c.joint.copula_tol = o.copula_tol;
  c.joint.em.max_iter = o.em_max_iter;
  c.joint.em.tol = o.em_tol;
  c.epsilon = o.epsilon;
  c.atom_width = o.atom_width;
  c.integration_tol = o.integration_tol;
  c.median_tol = o.median_tol;
  if (!(o.em_max_iter > 0) || !(o.em_tol > 0.0) || !(o.copula_tol > 0.0) ||
      !(o.integration_tol > 0.0) || !(o.median_tol > 0.0))
    throw vfvm::ArgumentError("iteration limits and tolerances must be positive");
  return c;
}

vfvm_model* wrap(vfvm::CompositeModel m, const vfvm::CompositeOptions& o = {})
{
  auto* h = new vfvm_model{std::move(m), o};
  h->options.epsilon = h->model.epsilon;
  h->options.atom_width = h->model.atom_width;
  h->options.joint.engine = h->model.f_c.engine();
  return h;
}

std::span<const double> ct_span(const double* ct) { return {ct, 6}; }

} // namespace

extern "C" {

const char* vfvm_last_error(void) { return g_last_error.c_str(); }

const char* vfvm_version(void) { return "0.1.0"; }

void vfvm_string_free(char* s) { std::free(s); }

vfvm_status vfvm_dataset_create(vfvm_dataset** out)
{
  return guard([&] {
    require(out, "out");
    *out = new vfvm_dataset{};
  });
}

void vfvm_dataset_free(vfvm_dataset* d) { delete d; }

vfvm_status vfvm_dataset_read_csv(const char* path, vfvm_dataset** out)
{
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new vfvm_dataset{vfvm::read_dataset_csv(std::string(path))};
  });
}

vfvm_status vfvm_dataset_write_csv(const vfvm_dataset* d, const char* path)
{
  return guard([&] {
    require(d, "dataset");
    require(path, "path");
    vfvm::write_dataset_csv(std::string(path), d->data);
  });
}

vfvm_status vfvm_dataset_size(const vfvm_dataset* d, size_t* n)
{
  return guard([&] {
    require(d, "dataset");
    require(n, "n");
    *n = d->data.size();
  });
}

vfvm_status vfvm_dataset_add_row(vfvm_dataset* d, uint64_t id, const double ct[6], int has_rat,
                                 double rat)
{
  return guard([&] {
    require(d, "dataset");
    require(ct, "ct");
    vfvm::DatasetRow r;
    r.id = id;
    r.d.med = ct[0];
    r.d.iqr = ct[1];
    r.d.vol = ct[2];
    r.d.elo = ct[3];
    r.d.flat = ct[4];
    r.d.sphe = ct[5];
    if (has_rat) {
      if (!(rat >= 0.0 && rat <= 1.0))
        throw vfvm::ArgumentError("rat must lie in [0,1]");
      r.d.rat = rat;
    }
    r.source = "api";
    d->data.rows.push_back(std::move(r));
  });
}

vfvm_status vfvm_dataset_get_row(const vfvm_dataset* d, size_t i, uint64_t* id, double ct[6],
                                 int* has_rat, double* rat)
{
  return guard([&] {
    require(d, "dataset");
    if (i >= d->data.size())
      throw vfvm::ArgumentError("row index out of range");
    const auto& r = d->data.rows[i];
    if (id)
      *id = r.id;
    if (ct) {
      const auto v = r.d.ct_vector();
      std::copy(v.begin(), v.end(), ct);
    }
    if (has_rat)
      *has_rat = r.d.rat.has_value();
    if (rat)
      *rat = r.d.rat.value_or(std::numeric_limits<double>::quiet_NaN());
  });
}

vfvm_status vfvm_descriptors(const char* volume_path, const char* labels_path,
                             const char* const* slice_paths, size_t n_slices,
                             int include_unlabeled, vfvm_dataset** out)
{
  return guard([&] {
    require(volume_path, "volume_path");
    require(labels_path, "labels_path");
    require(out, "out");
    if (n_slices > 0)
      require(slice_paths, "slice_paths");
    *out = nullptr;
    const auto volume = vfvm::io::read_volume(volume_path);
    const auto labels = vfvm::io::read_labels(labels_path);
    std::vector<vfvm::PhaseSlice> slices;
    for (size_t k = 0; k < n_slices; ++k) {
      require(slice_paths[k], "slice path");
      slices.push_back(vfvm::io::read_phase_slice(slice_paths[k], labels.dims()));
    }
    vfvm::DatasetOptions opt;
    opt.include_unlabeled = include_unlabeled != 0;
    *out = new vfvm_dataset{vfvm::build_dataset(labels, volume, slices, opt)};
  });
}

void vfvm_fit_options_default(vfvm_fit_options* o)
{
  if (!o)
    return;
  const vfvm::CompositeOptions c;
  o->engine = VFVM_ENGINE_RVINE;
  o->epsilon = c.epsilon;
  o->atom_width = c.atom_width;
  o->families = VFVM_FAMILY_FRANK | VFVM_FAMILY_CLAYTON | VFVM_FAMILY_GUMBEL | VFVM_FAMILY_JOE;
  o->rank_pseudo_obs = c.joint.rank_pseudo_obs;
  o->min_rows = c.joint.min_rows;
  o->em_max_iter = c.joint.em.max_iter;
  o->em_tol = c.joint.em.tol;
  o->copula_tol = c.joint.copula_tol;
  o->integration_tol = c.integration_tol;
  o->median_tol = c.median_tol;
}

vfvm_status vfvm_fit(const vfvm_dataset* d, const vfvm_fit_options* o, vfvm_model** out)
{
  return guard([&] {
    require(d, "dataset");
    require(out, "out");
    *out = nullptr;
    vfvm_fit_options def;
    vfvm_fit_options_default(&def);
    const auto opts = composite_options(o ? *o : def);
    *out = wrap(vfvm::fit_composite(d->data, opts), opts);
  });
}

void vfvm_model_free(vfvm_model* m) { delete m; }

vfvm_status vfvm_model_load(const char* path, vfvm_model** out)
{
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = wrap(vfvm::load_composite(path));
  });
}

vfvm_status vfvm_model_save(const vfvm_model* m, const char* path)
{
  return guard([&] {
    require(m, "model");
    require(path, "path");
    vfvm::save_composite(path, m->model);
  });
}

vfvm_status vfvm_model_to_json(const vfvm_model* m, char** out)
{
  return guard([&] {
    require(m, "model");
    require(out, "out");
    *out = dup_string(vfvm::composite_to_json(m->model));
  });
}

vfvm_status vfvm_model_from_json(const char* text, vfvm_model** out)
{
  return guard([&] {
    require(text, "text");
    require(out, "out");
    *out = nullptr;
    *out = wrap(vfvm::composite_from_json(text));
  });
}

vfvm_status vfvm_model_counts(const vfvm_model* m, size_t* n_v, size_t* n_nv, size_t* n_c)
{
  return guard([&] {
    require(m, "model");
    if (n_v)
      *n_v = m->model.n_v;
    if (n_nv)
      *n_nv = m->model.n_nv;
    if (n_c)
      *n_c = m->model.n_c;
  });
}

vfvm_status vfvm_model_parameter_count(const vfvm_model* m, size_t* k)
{
  return guard([&] {
    require(m, "model");
    require(k, "k");
    *k = vfvm::count_parameters(m->model).total;
  });
}

vfvm_status vfvm_model_engine(const vfvm_model* m, int* engine)
{
  return guard([&] {
    require(m, "model");
    require(engine, "engine");
    *engine = m->model.f_c.engine() == vfvm::Engine::rvine ? VFVM_ENGINE_RVINE
                                                            : VFVM_ENGINE_ARCHIMEDEAN;
  });
}

vfvm_status vfvm_model_score(const vfvm_model* m, const vfvm_dataset* d, char** json)
{
  return guard([&] {
    require(m, "model");
    require(d, "dataset");
    require(json, "json");
    const auto [all, comp] = vfvm::score_model(m->model, d->data, to_string(m->model.f_c.engine()));
    *json = dup_string(vfvm::render_report_json({all, comp}));
  });
}

vfvm_status vfvm_predict(const vfvm_model* m, const double ct[6], vfvm_prediction* out)
{
  return guard([&] {
    require(m, "model");
    require(ct, "ct");
    require(out, "out");
    const auto p = vfvm::predict_vfvm(m->model, ct_span(ct), m->options);
    out->value = p.value;
    out->cls = static_cast<int>(p.cls);
    out->conditional_median = p.conditional_median;
    out->out_of_support = p.out_of_support;
  });
}

vfvm_status vfvm_composite_density(const vfvm_model* m, const double x[7], double* out)
{
  return guard([&] {
    require(m, "model");
    require(x, "x");
    require(out, "out");
    *out = vfvm::composite_density(m->model, std::span<const double>(x, 7));
  });
}

void vfvm_loo_options_default(vfvm_loo_options* o)
{
  if (!o)
    return;
  vfvm_fit_options_default(&o->fit);
  o->fast = 0;
  o->parallelism = 1;
}

vfvm_status vfvm_loo(const vfvm_dataset* d, const vfvm_loo_options* o, char** report_json,
                     char** errors_csv, size_t* fits)
{
  return guard([&] {
    require(d, "dataset");
    vfvm_loo_options def;
    vfvm_loo_options_default(&def);
    const vfvm_loo_options& lo = o ? *o : def;
    vfvm::LooOptions opt;
    opt.composite = composite_options(lo.fit);
    opt.fast = lo.fast != 0;
    opt.parallelism = lo.parallelism == 0 ? 1 : lo.parallelism;
    const auto r = vfvm::loo_cv(d->data, opt);
    std::string report = vfvm::render_report_json({r.all, r.composite});
    std::string csv = vfvm::loo_errors_csv(r);
    if (report_json)
      *report_json = dup_string(report);
    if (errors_csv) {
      try {
        *errors_csv = dup_string(csv);
      } catch (...) {
        if (report_json) {
          std::free(*report_json);
          *report_json = nullptr;
        }
        throw;
      }
    }
    if (fits)
      *fits = r.fits;
  });
}

vfvm_status vfvm_render_report(const char* const* report_jsons, size_t n, char** text,
                               char** merged_json)
{
  return guard([&] {
    if (n > 0)
      require(report_jsons, "report_jsons");
    std::vector<vfvm::ScoreReport> all;
    for (size_t i = 0; i < n; ++i) {
      require(report_jsons[i], "report json");
      auto part = vfvm::parse_report_json(report_jsons[i]);
      all.insert(all.end(), part.begin(), part.end());
    }
    const std::string t = vfvm::render_report_text(all);
    const std::string j = vfvm::render_report_json(all);
    char* tp = text ? dup_string(t) : nullptr;
    try {
      if (merged_json)
        *merged_json = dup_string(j);
    } catch (...) {
      std::free(tp);
      throw;
    }
    if (text)
      *text = tp;
  });
}

vfvm_status vfvm_sample(const vfvm_model* m, size_t n, uint64_t seed, vfvm_dataset** out)
{
  return guard([&] {
    require(m, "model");
    require(out, "out");
    *out = nullptr;
    const std::array<size_t, 3> counts{m->model.n_v, m->model.n_nv, m->model.n_c};
    const size_t total = counts[0] + counts[1] + counts[2];
    if (total == 0)
      throw vfvm::ArgumentError("model has no class counts");
    // largest remainder, ties to the lower class index
    std::array<size_t, 3> k{};
    std::array<double, 3> rem{};
    size_t used = 0;
    for (int i = 0; i < 3; ++i) {
      const double q = static_cast<double>(n) * static_cast<double>(counts[i]) /
                       static_cast<double>(total);
      k[i] = static_cast<size_t>(std::floor(q));
      rem[i] = q - static_cast<double>(k[i]);
      used += k[i];
    }
    while (used < n) {
      int best = 0;
      for (int i = 1; i < 3; ++i)
        if (rem[i] > rem[best])
          best = i;
      ++k[best];
      rem[best] = -1.0;
      ++used;
    }
    *out = new vfvm_dataset{vfvm::generate_composite_dataset(m->model, k[0], k[1], k[2], seed)};
  });
}

vfvm_status vfvm_synth_scene(const char* spec_path, const char* out_dir, int use_seed_override,
                             uint64_t seed_override)
{
  return guard([&] {
    require(spec_path, "spec_path");
    require(out_dir, "out_dir");
    auto spec = vfvm::read_scene_spec(spec_path);
    if (use_seed_override)
      spec.seed = seed_override;
    const auto scene = vfvm::generate_scene(spec);
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
      throw vfvm::DataError("cannot create " + dir.string() + ": " + ec.message());
    vfvm::io::write_volume(dir / "volume.vxl", scene.volume);
    vfvm::io::write_labels(dir / "labels.vxl", scene.labels);
    for (size_t k = 0; k < scene.slices.size(); ++k)
      vfvm::io::write_phase_slice(dir / ("slice_" + std::to_string(k) + ".json"), scene.slices[k],
                                  scene.labels.dims());
    vfvm::DatasetOptions opt;
    opt.include_unlabeled = true;
    const auto data = vfvm::build_dataset(scene.labels, scene.volume, scene.slices, opt);
    vfvm::write_dataset_csv((dir / "descriptors.csv").string(), data);
  });
}

vfvm_status vfvm_benchmark_model(vfvm_model** out)
{
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    *out = wrap(vfvm::benchmark_truth_model());
  });
}

vfvm_status vfvm_synth_dataset(const vfvm_model* truth, size_t n_v, size_t n_nv, size_t n_c,
                               uint64_t seed, vfvm_dataset** out)
{
  return guard([&] {
    require(truth, "truth");
    require(out, "out");
    *out = nullptr;
    *out = new vfvm_dataset{vfvm::generate_composite_dataset(truth->model, n_v, n_nv, n_c, seed)};
  });
}

void vfvm_weight_options_default(vfvm_weight_options* o)
{
  if (!o)
    return;
  const vfvm::WeightMapOptions w;
  o->d_hat = w.d_hat;
  o->decay = w.decay;
  o->floor = w.floor;
}

vfvm_status vfvm_weight_map(const char* labels_path, const size_t* annotated_z, size_t n_z,
                            const vfvm_weight_options* o, const char* out_path, double* c_f)
{
  return guard([&] {
    require(labels_path, "labels_path");
    require(out_path, "out_path");
    if (n_z > 0)
      require(annotated_z, "annotated_z");
    vfvm::WeightMapOptions w;
    if (o) {
      w.d_hat = o->d_hat;
      w.decay = o->decay;
      w.floor = o->floor;
    }
    const auto labels = vfvm::io::read_labels(labels_path);
    const auto map = vfvm::compute_weight_map(labels, std::span<const size_t>(annotated_z, n_z), w);
    vfvm::io::write_weight_map(out_path, map);
    if (c_f)
      *c_f = map.c_f;
  });
}

} // extern "C"
