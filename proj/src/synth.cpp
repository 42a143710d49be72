#include "vfvm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "vfvm/error.hpp"
#include "vfvm/random.hpp"

namespace vfvm {

namespace {

using json = nlohmann::json;
using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

const char* shape_name(Shape s)
{
  switch (s) {
  case Shape::ball: return "ball";
  case Shape::box: return "box";
  case Shape::plate: return "plate";
  }
  return "ball";
}

Shape shape_from_name(const std::string& s)
{
  if (s == "ball")
    return Shape::ball;
  if (s == "box")
    return Shape::box;
  if (s == "plate")
    return Shape::plate;
  throw ArgumentError("unknown particle shape '" + s + "'");
}

const char* axis_name(Axis a)
{
  return a == Axis::x ? "x" : a == Axis::y ? "y" : "z";
}

Axis axis_from_name(const std::string& s)
{
  if (s == "x")
    return Axis::x;
  if (s == "y")
    return Axis::y;
  if (s == "z")
    return Axis::z;
  throw ArgumentError("unknown slice axis '" + s + "'");
}

Vec3 vec3(const json& j, const char* key, Vec3 fallback)
{
  if (!j.contains(key))
    return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3)
    throw ArgumentError(std::string("'") + key + "' must be an array of 3 numbers");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

Mat3 mul(const Mat3& a, const Mat3& b)
{
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        r[i][j] += a[i][k] * b[k][j];
  return r;
}

// R = Rx * Ry * Rz: rotate about z first, then y, then x.
Mat3 rotation(const Vec3& deg)
{
  const double k = std::numbers::pi / 180.0;
  const double cx = std::cos(deg[0] * k), sx = std::sin(deg[0] * k);
  const double cy = std::cos(deg[1] * k), sy = std::sin(deg[1] * k);
  const double cz = std::cos(deg[2] * k), sz = std::sin(deg[2] * k);
  const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  return mul(rx, mul(ry, rz));
}

struct Primitive {
  const ParticleSpec& p;
  Mat3 r;

  explicit Primitive(const ParticleSpec& spec) : p(spec), r(rotation(spec.rotation)) {}

  double bound() const
  {
    switch (p.shape) {
    case Shape::ball: return p.radius;
    case Shape::box:
      return 0.5 * std::sqrt(p.size[0] * p.size[0] + p.size[1] * p.size[1] + p.size[2] * p.size[2]);
    case Shape::plate: return std::hypot(p.radius, 0.5 * p.thickness);
    }
    return 0.0;
  }

  bool contains(double x, double y, double z) const
  {
    const Vec3 d{x - p.center[0], y - p.center[1], z - p.center[2]};
    if (p.shape == Shape::ball)
      return d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= p.radius * p.radius;
    // body coordinates: R^T d
    Vec3 b{};
    for (int i = 0; i < 3; ++i)
      b[i] = r[0][i] * d[0] + r[1][i] * d[1] + r[2][i] * d[2];
    if (p.shape == Shape::box)
      return std::abs(b[0]) <= 0.5 * p.size[0] && std::abs(b[1]) <= 0.5 * p.size[1] &&
             std::abs(b[2]) <= 0.5 * p.size[2];
    return std::abs(b[2]) <= 0.5 * p.thickness && b[0] * b[0] + b[1] * b[1] <= p.radius * p.radius;
  }
};

void validate_spec(const SceneSpec& s)
{
  if (s.dims.nx == 0 || s.dims.ny == 0 || s.dims.nz == 0)
    throw ArgumentError("scene dims must be positive");
  if (!(s.spacing > 0.0))
    throw ArgumentError("scene spacing must be positive");
  if (s.background_sigma < 0.0)
    throw ArgumentError("background sigma must be non-negative");
  for (std::size_t k = 0; k < s.particles.size(); ++k) {
    const auto& p = s.particles[k];
    const std::string tag = "particle " + std::to_string(k) + ": ";
    if (p.gray_sigma < 0.0)
      throw ArgumentError(tag + "gray_sigma must be non-negative");
    if (!(p.vfvm >= 0.0 && p.vfvm <= 1.0))
      throw ArgumentError(tag + "vfvm must lie in [0, 1]");
    const bool ok = p.shape == Shape::box
                      ? p.size[0] > 0 && p.size[1] > 0 && p.size[2] > 0
                      : p.radius > 0 && (p.shape != Shape::plate || p.thickness > 0);
    if (!ok)
      throw ArgumentError(tag + "extent must be positive");
    if (p.cut_normal[0] == 0.0 && p.cut_normal[1] == 0.0 && p.cut_normal[2] == 0.0)
      throw ArgumentError(tag + "cut_normal must be non-zero");
  }
}

} // namespace

SceneSpec scene_spec_from_json(const std::string& text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("scene spec", 0, e.what());
  }
  SceneSpec s;
  try {
    const auto d = vec3(j, "dims", {0, 0, 0});
    if (d[0] < 1 || d[1] < 1 || d[2] < 1)
      throw ArgumentError("scene spec needs positive 'dims'");
    s.dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]),
              static_cast<std::size_t>(d[2])};
    s.spacing = j.value("spacing", 1.0);
    s.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("background")) {
      s.background_mean = j["background"].value("mean", 0.0);
      s.background_sigma = j["background"].value("sigma", 0.0);
    }
    for (const auto& p : j.value("particles", json::array())) {
      ParticleSpec ps;
      ps.shape = shape_from_name(p.at("shape").get<std::string>());
      ps.center = vec3(p, "center", {0, 0, 0});
      ps.radius = p.value("radius", 1.0);
      ps.size = vec3(p, "size", {1, 1, 1});
      ps.thickness = p.value("thickness", 1.0);
      ps.rotation = vec3(p, "rotation", {0, 0, 0});
      ps.gray_mean = p.value("gray_mean", 100.0);
      ps.gray_sigma = p.value("gray_sigma", 0.0);
      ps.vfvm = p.value("vfvm", 0.5);
      ps.cut_normal = vec3(p, "cut_normal", ps.cut_normal);
      s.particles.push_back(ps);
    }
    for (const auto& sl : j.value("slices", json::array())) {
      SliceSpec ss;
      ss.axis = axis_from_name(sl.at("axis").get<std::string>());
      ss.position = sl.at("position").get<std::size_t>();
      s.slices.push_back(ss);
    }
  } catch (const json::exception& e) {
    throw ParseError("scene spec", 0, e.what());
  }
  validate_spec(s);
  return s;
}

SceneSpec read_scene_spec(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open scene spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_spec_from_json(ss.str());
}

std::string scene_spec_to_json(const SceneSpec& s)
{
  json j;
  j["dims"] = {s.dims.nx, s.dims.ny, s.dims.nz};
  j["spacing"] = s.spacing;
  j["seed"] = s.seed;
  j["background"] = {{"mean", s.background_mean}, {"sigma", s.background_sigma}};
  j["particles"] = json::array();
  for (const auto& p : s.particles) {
    json q;
    q["shape"] = shape_name(p.shape);
    q["center"] = p.center;
    if (p.shape == Shape::box)
      q["size"] = p.size;
    else
      q["radius"] = p.radius;
    if (p.shape == Shape::plate)
      q["thickness"] = p.thickness;
    q["rotation"] = p.rotation;
    q["gray_mean"] = p.gray_mean;
    q["gray_sigma"] = p.gray_sigma;
    q["vfvm"] = p.vfvm;
    q["cut_normal"] = p.cut_normal;
    j["particles"].push_back(q);
  }
  j["slices"] = json::array();
  for (const auto& sl : s.slices)
    j["slices"].push_back({{"axis", axis_name(sl.axis)}, {"position", sl.position}});
  return j.dump(2);
}

Scene generate_scene(const SceneSpec& spec)
{
  validate_spec(spec);
  const Dims& dims = spec.dims;
  Scene scene{VoxelVolume(dims, spec.spacing), LabelVolume(dims, spec.spacing), {}};

  for (std::size_t k = 0; k < spec.particles.size(); ++k) {
    const Primitive prim(spec.particles[k]);
    const auto& c = spec.particles[k].center;
    const double b = prim.bound() + 1.0;
    auto range = [&](double ctr, std::size_t n) {
      const double lo = std::max(0.0, std::floor(ctr - b));
      const double hi = std::min(static_cast<double>(n) - 1.0, std::ceil(ctr + b));
      return std::pair<std::size_t, std::size_t>{static_cast<std::size_t>(lo),
                                                 hi < lo ? 0 : static_cast<std::size_t>(hi) + 1};
    };
    const auto [x0, x1] = range(c[0], dims.nx);
    const auto [y0, y1] = range(c[1], dims.ny);
    const auto [z0, z1] = range(c[2], dims.nz);
    const auto label = static_cast<std::uint32_t>(k + 1);
    for (std::size_t z = z0; z < z1; ++z)
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) {
          if (!prim.contains(static_cast<double>(x), static_cast<double>(y),
                             static_cast<double>(z)))
            continue;
          auto& l = scene.labels.at(x, y, z);
          if (l != 0)
            throw DataError("particles " + std::to_string(l - 1) + " and " + std::to_string(k) +
                            " overlap");
          l = label;
        }
  }

  Rng rng(spec.seed);
  for (std::size_t i = 0; i < scene.volume.size(); ++i) {
    const std::uint32_t l = scene.labels[i];
    const double mean = l ? spec.particles[l - 1].gray_mean : spec.background_mean;
    const double sigma = l ? spec.particles[l - 1].gray_sigma : spec.background_sigma;
    scene.volume[i] = static_cast<float>(mean + sigma * rng.normal());
  }

  // Planar cut over the voxels each particle shows in the slices: the
  // first round(vfvm * m) voxels along the cut normal are valuable.
  for (const auto& sl : spec.slices) {
    const std::size_t w = sl.axis == Axis::x ? dims.ny : dims.nx;
    const std::size_t h = sl.axis == Axis::z ? dims.ny : dims.nz;
    scene.slices.push_back(PhaseSlice::from_plane(dims, sl.axis, sl.position,
                                                  std::vector<std::uint8_t>(w * h, 0)));
  }
  std::map<std::uint32_t, std::vector<std::size_t>> seen;
  for (const auto& s : scene.slices)
    for (std::size_t v : s.voxels)
      if (scene.labels[v])
        seen[scene.labels[v]].push_back(v);
  std::vector<std::uint8_t> phase(dims.size(), 0);
  for (auto& [label, voxels] : seen) {
    std::sort(voxels.begin(), voxels.end());
    voxels.erase(std::unique(voxels.begin(), voxels.end()), voxels.end());
    const auto& p = spec.particles[label - 1];
    auto proj = [&](std::size_t v) {
      const auto q = dims.coords(v);
      return p.cut_normal[0] * static_cast<double>(q[0]) +
             p.cut_normal[1] * static_cast<double>(q[1]) +
             p.cut_normal[2] * static_cast<double>(q[2]);
    };
    std::stable_sort(voxels.begin(), voxels.end(),
                     [&](std::size_t a, std::size_t b) { return proj(a) < proj(b); });
    const auto k = static_cast<std::size_t>(std::llround(p.vfvm * static_cast<double>(voxels.size())));
    for (std::size_t i = 0; i < voxels.size(); ++i)
      phase[voxels[i]] = i < k ? static_cast<std::uint8_t>(Phase::valuable)
                               : static_cast<std::uint8_t>(Phase::non_valuable);
  }
  for (auto& s : scene.slices)
    for (std::size_t i = 0; i < s.voxels.size(); ++i)
      s.phases[i] = phase[s.voxels[i]];
  return scene;
}

Dataset generate_composite_dataset(const CompositeModel& truth, std::size_t n_v, std::size_t n_nv,
                                   std::size_t n_c, std::uint64_t seed)
{
  Rng rng(seed);
  Dataset d;
  d.rows.reserve(n_v + n_nv + n_c);
  auto add = [&](const std::vector<double>& x, double rat) {
    DatasetRow r;
    r.id = d.rows.size() + 1;
    r.d.med = x[0];
    r.d.iqr = x[1];
    r.d.vol = x[2];
    r.d.elo = x[3];
    r.d.flat = x[4];
    r.d.sphe = x[5];
    r.d.rat = rat;
    r.source = "synthetic";
    d.rows.push_back(std::move(r));
  };
  if (n_v)
    for (const auto& x : joint_sample(truth.f_v, n_v, rng))
      add(x, 1.0);
  if (n_nv)
    for (const auto& x : joint_sample(truth.f_nv, n_nv, rng))
      add(x, 0.0);
  if (n_c)
    for (const auto& x : joint_sample(truth.f_c, n_c, rng))
      add(x, x[kCtDim]);
  for (std::size_t i = d.rows.size(); i > 1; --i)
    std::swap(d.rows[i - 1], d.rows[rng.below(i)]);
  return d;
}

namespace {

MixtureModel gamma_mix(double a1, double b1, double a2, double b2, double lambda)
{
  return MixtureModel(MixtureFamily::gamma, {a1, b1}, {a2, b2}, lambda);
}

MixtureModel beta_mix(double p1, double q1, double p2, double q2, double lambda)
{
  return MixtureModel(MixtureFamily::beta, {p1, q1}, {p2, q2}, lambda);
}

void set_t1(RVineStructure& s, int a, int b, PairCopula c)
{
  for (auto& e : s.trees[0])
    if (e.e1 == std::min(a, b) && e.e2 == std::max(a, b)) {
      e.copula = c;
      return;
    }
  throw ArgumentError("no first-tree edge joins these variables");
}

JointModel pure_class(double med_shape, double med_scale, double iqr_shape, double iqr_scale)
{
  RVineModel m;
  m.structure = d_vine_structure({0, 1, 2, 3, 4, 5});
  set_t1(m.structure, 0, 1, {CopulaFamily::frank, 0, 3.0});
  set_t1(m.structure, 1, 2, {CopulaFamily::gumbel, 0, 1.5});
  set_t1(m.structure, 3, 4, {CopulaFamily::clayton, 0, 1.0});
  set_t1(m.structure, 4, 5, {CopulaFamily::joe, 0, 1.5});
  m.marginals = {
    gamma_mix(med_shape, med_scale, med_shape, med_scale * 1.04, 0.5),
    gamma_mix(iqr_shape, iqr_scale, iqr_shape * 1.5, iqr_scale, 0.6),
    gamma_mix(2.0, 400.0, 6.0, 300.0, 0.5),
    beta_mix(8.0, 4.0, 5.0, 5.0, 0.5),
    beta_mix(7.0, 3.0, 4.0, 4.0, 0.5),
    beta_mix(20.0, 5.0, 12.0, 6.0, 0.5),
  };
  return {std::move(m)};
}

} // namespace

CompositeModel benchmark_truth_model()
{
  CompositeModel m;
  m.f_v = pure_class(400.0, 0.45, 20.0, 0.5);
  m.f_nv = pure_class(400.0, 0.3, 20.0, 0.4);

  // composite: D-vine iqr, rat, med, vol, elo, flat, sphe
  RVineModel c;
  c.structure = d_vine_structure({1, 6, 0, 2, 3, 4, 5});
  set_t1(c.structure, 1, 6, {CopulaFamily::clayton, 90, 2.0});
  set_t1(c.structure, 6, 0, {CopulaFamily::gumbel, 0, 3.0});
  set_t1(c.structure, 0, 2, {CopulaFamily::frank, 0, 4.0});
  set_t1(c.structure, 3, 4, {CopulaFamily::clayton, 0, 1.0});
  set_t1(c.structure, 4, 5, {CopulaFamily::gumbel, 0, 1.5});
  MixtureModel rat = beta_mix(2.0, 5.0, 5.0, 2.0, 0.5);
  rat.truncate(0.01, 0.99);
  c.marginals = {
    gamma_mix(100.0, 1.5, 100.0, 1.5, 0.5),
    gamma_mix(16.0, 1.0, 24.0, 1.0, 0.5),
    gamma_mix(2.0, 400.0, 6.0, 300.0, 0.5),
    beta_mix(8.0, 4.0, 5.0, 5.0, 0.5),
    beta_mix(7.0, 3.0, 4.0, 4.0, 0.5),
    beta_mix(20.0, 5.0, 12.0, 6.0, 0.5),
    rat,
  };
  m.f_c = {std::move(c)};
  m.n_v = 227;
  m.n_nv = 489;
  m.n_c = 625;
  m.epsilon = 0.01;
  m.atom_width = 0.01;
  return m;
}

} // namespace vfvm
