#include "vfvm/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "vfvm/error.hpp"

namespace vfvm {

namespace {

using json = nlohmann::json;

json mixture_json(const MixtureModel& m)
{
  json j;
  j["family"] = to_string(m.family());
  j["comp1"] = {m.comp1().a, m.comp1().b};
  j["comp2"] = {m.comp2().a, m.comp2().b};
  j["lambda"] = m.lambda();
  if (m.truncation())
    j["truncation"] = {m.truncation()->lo, m.truncation()->hi};
  if (m.degenerate)
    j["degenerate"] = true;
  return j;
}

Component component(const json& j)
{
  if (!j.is_array() || j.size() != 2)
    throw StructuralError("mixture component must be a pair of numbers");
  return {j[0].get<double>(), j[1].get<double>()};
}

MixtureModel mixture_of(const json& j)
{
  MixtureModel m(mixture_family_from_string(j.at("family").get<std::string>()),
                 component(j.at("comp1")), component(j.at("comp2")), j.at("lambda").get<double>());
  if (j.contains("truncation")) {
    const auto& t = j.at("truncation");
    if (!t.is_array() || t.size() != 2)
      throw StructuralError("truncation must be a pair of numbers");
    m.truncate(t[0].get<double>(), t[1].get<double>());
  }
  m.degenerate = j.value("degenerate", false);
  m.validate();
  return m;
}

json copula_json(const PairCopula& c)
{
  return {{"family", to_string(c.family)}, {"rotation", c.rotation}, {"theta", c.theta}};
}

PairCopula copula_of(const json& j)
{
  PairCopula c{copula_family_from_string(j.at("family").get<std::string>()),
               j.at("rotation").get<int>(), j.at("theta").get<double>()};
  validate(c);
  return c;
}

json joint_json(const JointModel& m)
{
  json j;
  j["engine"] = to_string(m.engine());
  j["d"] = m.dim();
  j["marginals"] = json::array();
  for (const auto& mm : m.marginals())
    j["marginals"].push_back(mixture_json(mm));
  if (const auto* v = std::get_if<RVineModel>(&m.model)) {
    j["trees"] = json::array();
    for (const auto& tree : v->structure.trees) {
      json t = json::array();
      for (const auto& e : tree) {
        json je = copula_json(e.copula);
        je["conditioned"] = {e.e1, e.e2};
        je["conditioning"] = e.cond;
        je["children"] = {e.child_a, e.child_b};
        t.push_back(je);
      }
      j["trees"].push_back(t);
    }
  } else {
    const auto& a = std::get<ArchimedeanModel>(m.model);
    j["copula"] = {{"family", to_string(a.family)}, {"theta", a.theta}};
  }
  return j;
}

JointModel joint_of(const json& j)
{
  const Engine engine = engine_from_string(j.at("engine").get<std::string>());
  const int d = j.at("d").get<int>();
  std::vector<MixtureModel> marginals;
  for (const auto& mj : j.at("marginals"))
    marginals.push_back(mixture_of(mj));
  if (static_cast<int>(marginals.size()) != d)
    throw StructuralError("marginal count does not match dimension");
  if (engine == Engine::archimedean) {
    ArchimedeanModel a;
    a.family = copula_family_from_string(j.at("copula").at("family").get<std::string>());
    a.theta = j.at("copula").at("theta").get<double>();
    a.marginals = std::move(marginals);
    if (a.family != CopulaFamily::independence) {
      const ThetaRange r = archimedean_theta_range(a.family, d);
      if (!(a.theta >= r.lo && a.theta <= r.hi) || a.theta == 0.0)
        throw ArgumentError("archimedean theta outside the family range");
    }
    return {std::move(a)};
  }
  RVineModel v;
  v.structure.d = d;
  int level = 1;
  for (const auto& tj : j.at("trees")) {
    std::vector<VineEdge> tree;
    for (const auto& ej : tj) {
      VineEdge e;
      e.level = level;
      const auto& o = ej.at("conditioned");
      const auto& ch = ej.at("children");
      if (o.size() != 2 || ch.size() != 2)
        throw StructuralError("vine edge needs two conditioned indices and two children");
      e.e1 = o[0].get<int>();
      e.e2 = o[1].get<int>();
      e.cond = ej.at("conditioning").get<std::vector<int>>();
      e.child_a = ch[0].get<int>();
      e.child_b = ch[1].get<int>();
      e.copula = copula_of(ej);
      tree.push_back(std::move(e));
    }
    v.structure.trees.push_back(std::move(tree));
    ++level;
  }
  const StructureReport rep = validate_structure(v.structure);
  if (!rep.ok)
    throw StructuralError("invalid vine structure: " + rep.violation);
  v.marginals = std::move(marginals);
  return {std::move(v)};
}

json parse_document(const std::string& text, const char* kind)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("model document", 0, e.what());
  }
  if (!j.is_object() || j.value("schema", std::string()) != kModelSchema)
    throw SchemaError("not a model document (schema field must be '" + std::string(kModelSchema) +
                      "')");
  const int version = j.value("version", -1);
  if (version != kModelVersion)
    throw SchemaError("model document has schema version " + std::to_string(version) +
                      "; this build reads version " + std::to_string(kModelVersion) +
                      ". Refit the model or convert the document to version " +
                      std::to_string(kModelVersion));
  if (j.value("kind", std::string()) != kind)
    throw SchemaError(std::string("model document is not of kind '") + kind + "'");
  return j;
}

json header(const char* kind)
{
  json j;
  j["schema"] = kModelSchema;
  j["version"] = kModelVersion;
  j["kind"] = kind;
  return j;
}

template <class F>
auto guarded(F f)
{
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError("model document", 0, e.what());
  }
}

} // namespace

std::string mixture_to_json(const MixtureModel& m)
{
  json j = header("mixture");
  j["mixture"] = mixture_json(m);
  return j.dump(2) + "\n";
}

MixtureModel mixture_from_json(const std::string& text)
{
  const json j = parse_document(text, "mixture");
  return guarded([&] { return mixture_of(j.at("mixture")); });
}

std::string joint_to_json(const JointModel& m)
{
  json j = header("joint");
  j["model"] = joint_json(m);
  return j.dump(2) + "\n";
}

JointModel joint_from_json(const std::string& text)
{
  const json j = parse_document(text, "joint");
  return guarded([&] { return joint_of(j.at("model")); });
}

std::string composite_to_json(const CompositeModel& m)
{
  json j = header("composite");
  j["epsilon"] = m.epsilon;
  j["atom_width"] = m.atom_width;
  j["counts"] = {{"v", m.n_v}, {"nv", m.n_nv}, {"c", m.n_c}};
  j["f_v"] = joint_json(m.f_v);
  j["f_nv"] = joint_json(m.f_nv);
  j["f_c"] = joint_json(m.f_c);
  return j.dump(2) + "\n";
}

CompositeModel composite_from_json(const std::string& text)
{
  const json j = parse_document(text, "composite");
  return guarded([&] {
    CompositeModel m;
    m.epsilon = j.at("epsilon").get<double>();
    m.atom_width = j.at("atom_width").get<double>();
    m.n_v = j.at("counts").at("v").get<std::size_t>();
    m.n_nv = j.at("counts").at("nv").get<std::size_t>();
    m.n_c = j.at("counts").at("c").get<std::size_t>();
    m.f_v = joint_of(j.at("f_v"));
    m.f_nv = joint_of(j.at("f_nv"));
    m.f_c = joint_of(j.at("f_c"));
    m.validate();
    return m;
  });
}

void save_composite(const std::filesystem::path& path, const CompositeModel& m)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write " + path.string());
  out << composite_to_json(m);
  if (!out)
    throw DataError("write failed for " + path.string());
}

CompositeModel load_composite(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return composite_from_json(ss.str());
}

} // namespace vfvm
