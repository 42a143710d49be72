#include "vfvm/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vfvm::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'V', 'F', 'V', 'M', 'V', 'O', 'L', '1'};

template <class T>
const char* dtype_name();
template <>
const char* dtype_name<float>() { return "float32"; }
template <>
const char* dtype_name<std::uint32_t>() { return "uint32"; }

std::size_t dtype_size(const std::string& dtype)
{
  if (dtype == "uint8")
    return 1;
  if (dtype == "uint16")
    return 2;
  if (dtype == "uint32" || dtype == "float32")
    return 4;
  throw DataError("unsupported dtype '" + dtype + "'");
}

template <class T>
T load_le(const unsigned char* p)
{
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

template <class T>
void store_le(std::ostream& os, T v)
{
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
std::vector<T> decode(const std::vector<unsigned char>& bytes, const std::string& dtype,
                      std::size_t count)
{
  const std::size_t sz = dtype_size(dtype);
  if (bytes.size() != count * sz)
    throw StructuralError("raw payload size does not match dims and dtype");
  std::vector<T> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = bytes.data() + i * sz;
    if (dtype == "uint8")
      out[i] = static_cast<T>(p[0]);
    else if (dtype == "uint16")
      out[i] = static_cast<T>(load_le<std::uint16_t>(p));
    else if (dtype == "uint32")
      out[i] = static_cast<T>(load_le<std::uint32_t>(p));
    else
      out[i] = static_cast<T>(load_le<float>(p));
  }
  return out;
}

Dims dims_from(const json& header)
{
  const auto& d = header.at("dims");
  if (!d.is_array() || d.size() != 3)
    throw DataError("volume header dims must be [nx, ny, nz]");
  return Dims{d[0].get<std::size_t>(), d[1].get<std::size_t>(), d[2].get<std::size_t>()};
}

std::vector<unsigned char> read_all(std::istream& is)
{
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is), {});
}

template <class T>
Grid<T> read_grid(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open " + path.string());

  char magic[8] = {};
  in.read(magic, 8);
  json header;
  std::vector<unsigned char> payload;
  if (in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0) {
    unsigned char lenbuf[8];
    in.read(reinterpret_cast<char*>(lenbuf), 8);
    const auto len = load_le<std::uint64_t>(lenbuf);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(in.gcount()) != len)
      throw DataError("truncated volume container " + path.string());
    header = json::parse(text);
    payload = read_all(in);
  } else {
    in.clear();
    in.seekg(0);
    try {
      header = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("malformed volume header " + path.string() + ": " + e.what());
    }
    fs::path raw = path.parent_path() / header.at("data_file").get<std::string>();
    std::ifstream rin(raw, std::ios::binary);
    if (!rin)
      throw DataError("cannot open " + raw.string());
    payload = read_all(rin);
  }
  try {
    const Dims dims = dims_from(header);
    const std::string dtype = header.at("dtype").get<std::string>();
    const double spacing = header.value("spacing", 1.0);
    return Grid<T>(dims, decode<T>(payload, dtype, dims.size()), spacing);
  } catch (const json::exception& e) {
    throw DataError("malformed volume header " + path.string() + ": " + e.what());
  }
}

template <class T>
void write_grid(const fs::path& path, const Dims& dims, double spacing, std::span<const T> values)
{
  json header = {{"dims", {dims.nx, dims.ny, dims.nz}},
                 {"spacing", spacing},
                 {"dtype", dtype_name<T>()},
                 {"endianness", "little"}};
  const bool container = path.extension() == ".vxl";
  fs::path raw_path;
  if (!container) {
    raw_path = path;
    raw_path.replace_extension(".raw");
    header["data_file"] = raw_path.filename().string();
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw DataError("cannot write " + path.string());
  const std::string text = header.dump();
  if (container) {
    out.write(kMagic, 8);
    store_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const T& v : values)
      store_le<T>(out, v);
  } else {
    out << text << '\n';
    std::ofstream rout(raw_path, std::ios::binary);
    if (!rout)
      throw DataError("cannot write " + raw_path.string());
    for (const T& v : values)
      store_le<T>(rout, v);
  }
}

const char* axis_name(Axis a)
{
  switch (a) {
  case Axis::x: return "x";
  case Axis::y: return "y";
  default: return "z";
  }
}

Axis parse_axis(const std::string& s)
{
  if (s == "x")
    return Axis::x;
  if (s == "y")
    return Axis::y;
  if (s == "z")
    return Axis::z;
  throw DataError("unknown slice axis '" + s + "'");
}

} // namespace

void write_volume(const fs::path& path, const VoxelVolume& volume)
{
  write_grid<float>(path, volume.dims(), volume.spacing(), volume.values());
}

void write_labels(const fs::path& path, const LabelVolume& labels)
{
  write_grid<std::uint32_t>(path, labels.dims(), labels.spacing(), labels.values());
}

VoxelVolume read_volume(const fs::path& path)
{
  auto v = read_grid<float>(path);
  for (float x : v.values())
    if (!std::isfinite(x))
      throw DataError("volume contains non-finite values: " + path.string());
  return v;
}

LabelVolume read_labels(const fs::path& path) { return read_grid<std::uint32_t>(path); }

void write_phase_slice(const fs::path& path, const PhaseSlice& slice, const Dims& dims)
{
  json doc;
  if (slice.plane) {
    const auto& pl = *slice.plane;
    std::size_t w = pl.axis == Axis::x ? dims.ny : dims.nx;
    std::size_t h = pl.axis == Axis::z ? dims.ny : dims.nz;
    doc = {{"axis", axis_name(pl.axis)}, {"position", pl.position}, {"width", w}, {"height", h}};
  } else {
    json vox = json::array();
    for (std::size_t v : slice.voxels) {
      const auto c = dims.coords(v);
      vox.push_back({c[0], c[1], c[2]});
    }
    doc["voxels"] = std::move(vox);
  }
  doc["phases"] = slice.phases;
  std::ofstream out(path);
  if (!out)
    throw DataError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

PhaseSlice read_phase_slice(const fs::path& path, const Dims& dims)
{
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open " + path.string());
  try {
    const json doc = json::parse(in);
    const auto phases = doc.at("phases").get<std::vector<std::uint8_t>>();
    if (doc.contains("axis")) {
      return PhaseSlice::from_plane(dims, parse_axis(doc.at("axis").get<std::string>()),
                                    doc.at("position").get<std::size_t>(), phases);
    }
    PhaseSlice s;
    for (const auto& c : doc.at("voxels")) {
      const long x = c.at(0).get<long>(), y = c.at(1).get<long>(), z = c.at(2).get<long>();
      if (!dims.contains(x, y, z))
        throw StructuralError("phase slice voxel outside the volume");
      s.voxels.push_back(dims.index(x, y, z));
    }
    s.phases = phases;
    s.validate(dims);
    return s;
  } catch (const json::exception& e) {
    throw DataError("malformed phase slice " + path.string() + ": " + e.what());
  }
}

void write_weight_map(const fs::path& path, const WeightMap& map)
{
  std::vector<float> w(map.weights.begin(), map.weights.end());
  write_grid<float>(path, map.dims, 1.0, w);
}

} // namespace vfvm::io
