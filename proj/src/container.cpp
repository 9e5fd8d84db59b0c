// SPDX-License-Identifier: Apache-2.0

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ddvms/snapshots.hpp"

//
// Layout (all integers little-endian):
//
//   char[8]  magic "DDVMSBIN"
//   u32      version
//   u32      n_blocks
//   u64      meta_length, followed by meta_length bytes of UTF-8 JSON
//   u32      crc32(meta)
//   n_blocks x { char[48] name; u64 rows; u64 cols; u32 crc32(payload); u32 reserved }
//   u32      crc32 of everything above
//   payloads in table order, column-major IEEE-754 binary64
//
namespace ddvms
{
namespace
{

constexpr std::array<char, 8> kMagic = {'D', 'D', 'V', 'M', 'S', 'B', 'I', 'N'};
constexpr std::size_t kNameLen = 48;

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

std::uint32_t crc(const void *data, std::size_t len, std::uint32_t seed = 0)
{
  auto c = static_cast<uLong>(seed);
  const auto *p = static_cast<const Bytef *>(data);
  while (len > 0)
  {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(len, 1u << 30));
    c = crc32(c, p, chunk);
    p += chunk;
    len -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

class Writer
{
public:
  template <typename T>
  void put(const T &v)
  {
    const auto *p = reinterpret_cast<const char *>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(const char *p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  const std::vector<char> &bytes() const { return buf_; }

private:
  std::vector<char> buf_;
};

class Reader
{
public:
  Reader(const std::vector<char> &buf, const std::string &path) : buf_(buf), path_(path) {}

  template <typename T>
  T get()
  {
    T v;
    need(sizeof(T));
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  const char *take(std::size_t n)
  {
    need(n);
    const char *p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

private:
  void need(std::size_t n) const
  {
    if (pos_ + n > buf_.size())
    {
      throw FormatError(FormatError::Kind::truncated, path_ + ": file truncated");
    }
  }
  const std::vector<char> &buf_;
  const std::string &path_;
  std::size_t pos_ = 0;
};

}  // namespace

const MatrixXd &Container::block(const std::string &name) const
{
  const auto it = blocks.find(name);
  if (it == blocks.end())
  {
    throw FormatError(FormatError::Kind::dimension, "container: missing block '" + name + "'");
  }
  return it->second;
}

void write_container(const std::string &path, const Container &c)
{
  nlohmann::json meta = nlohmann::json::parse(c.meta_json);
  meta["kind"] = c.kind;
  meta["format_version"] = kContainerVersion;
  const std::string meta_str = meta.dump(2);

  Writer w;
  w.put_bytes(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kContainerVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.blocks.size()));
  w.put<std::uint64_t>(meta_str.size());
  w.put_bytes(meta_str.data(), meta_str.size());
  w.put<std::uint32_t>(crc(meta_str.data(), meta_str.size()));
  for (const auto &[name, m] : c.blocks)
  {
    if (name.size() >= kNameLen)
    {
      throw ConfigError("container: block name too long: " + name);
    }
    std::array<char, kNameLen> field{};
    std::memcpy(field.data(), name.data(), name.size());
    w.put_bytes(field.data(), field.size());
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    w.put<std::uint32_t>(crc(m.data(), sizeof(double) * static_cast<std::size_t>(m.size())));
    w.put<std::uint32_t>(0);
  }
  w.put<std::uint32_t>(crc(w.bytes().data(), w.bytes().size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "' for writing");
  }
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  for (const auto &[name, m] : c.blocks)
  {
    out.write(reinterpret_cast<const char *>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
  if (!out)
  {
    throw FormatError(FormatError::Kind::io, "write to '" + path + "' failed");
  }

  std::ofstream side(path + ".json", std::ios::trunc);
  side << meta_str << "\n";
}

Container read_container(const std::string &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "'");
  }
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader rd(buf, path);

  const char *magic = rd.take(kMagic.size());
  if (std::memcmp(magic, kMagic.data(), kMagic.size()) != 0)
  {
    throw FormatError(FormatError::Kind::bad_magic, path + ": not a ddvms container (bad magic)");
  }
  const auto version = rd.get<std::uint32_t>();
  if (version != kContainerVersion)
  {
    throw FormatError(FormatError::Kind::version_mismatch, path + ": container version " + std::to_string(version) +
                                                               " unsupported (expected " +
                                                               std::to_string(kContainerVersion) + ")");
  }
  const auto n_blocks = rd.get<std::uint32_t>();
  const auto meta_len = rd.get<std::uint64_t>();
  const char *meta_ptr = rd.take(meta_len);
  const auto meta_crc = rd.get<std::uint32_t>();
  if (crc(meta_ptr, meta_len) != meta_crc)
  {
    throw FormatError(FormatError::Kind::checksum, path + ": metadata checksum mismatch");
  }

  struct Entry
  {
    std::string name;
    std::uint64_t rows, cols;
    std::uint32_t crc;
  };
  std::vector<Entry> table;
  for (std::uint32_t b = 0; b < n_blocks; ++b)
  {
    const char *name = rd.take(kNameLen);
    Entry e;
    e.name.assign(name, strnlen(name, kNameLen));
    e.rows = rd.get<std::uint64_t>();
    e.cols = rd.get<std::uint64_t>();
    e.crc = rd.get<std::uint32_t>();
    rd.get<std::uint32_t>();
    table.push_back(std::move(e));
  }
  const std::size_t header_end = rd.pos();
  const auto header_crc = rd.get<std::uint32_t>();
  if (crc(buf.data(), header_end) != header_crc)
  {
    throw FormatError(FormatError::Kind::checksum, path + ": header checksum mismatch");
  }

  Container c;
  c.meta_json = std::string(meta_ptr, meta_len);
  try
  {
    c.kind = nlohmann::json::parse(c.meta_json).value("kind", "");
  }
  catch (const nlohmann::json::exception &e)
  {
    throw FormatError(FormatError::Kind::checksum, path + ": metadata is not valid JSON: " + e.what());
  }
  for (const auto &e : table)
  {
    const std::size_t bytes = sizeof(double) * e.rows * e.cols;
    const char *payload = rd.take(bytes);
    if (crc(payload, bytes) != e.crc)
    {
      throw FormatError(FormatError::Kind::checksum, path + ": checksum mismatch in block '" + e.name + "'");
    }
    MatrixXd m(static_cast<Index>(e.rows), static_cast<Index>(e.cols));
    std::memcpy(m.data(), payload, bytes);
    c.blocks.emplace(e.name, std::move(m));
  }
  return c;
}

namespace
{
MatrixXd band(const fe1d::SymTridiagonal<double> &t)
{
  MatrixXd b = MatrixXd::Zero(t.size(), 2);
  b.col(0) = t.diag;
  b.col(1).head(t.off.size()) = t.off;
  return b;
}

fe1d::SymTridiagonal<double> unband(const MatrixXd &b, const std::string &name)
{
  if (b.cols() != 2 || b.rows() < 1)
  {
    throw FormatError(FormatError::Kind::dimension, "block '" + name + "' must be n x 2");
  }
  return {b.col(0), b.col(1).head(b.rows() - 1)};
}
}  // namespace

void write_dataset(const SnapshotSet<double> &set, const std::string &path)
{
  set.validate();
  Container c;
  c.kind = "snapshots";
  nlohmann::json meta;
  meta["label"] = set.label;
  meta["dt"] = set.dt();
  meta["window"] = {set.trajectory.times(0), set.trajectory.times(set.size() - 1)};
  meta["n_cells"] = set.inner_product.mesh.n_cells;
  meta["n_snapshots"] = set.size();
  if (set.diffusivity)
  {
    meta["diffusivity"] = *set.diffusivity;
  }
  c.meta_json = meta.dump();
  c.blocks["states"] = set.trajectory.states;
  c.blocks["times"] = set.trajectory.times;
  c.blocks["mass"] = band(set.inner_product.mass);
  c.blocks["stiffness"] = band(set.inner_product.stiffness);
  write_container(path, c);
}

SnapshotSet<double> read_dataset(const std::string &path)
{
  const Container c = read_container(path);
  if (c.kind != "snapshots")
  {
    throw FormatError(FormatError::Kind::dimension, path + ": container kind '" + c.kind + "' is not 'snapshots'");
  }
  const auto meta = nlohmann::json::parse(c.meta_json);
  SnapshotSet<double> set;
  set.label = meta.value("label", "");
  if (meta.contains("diffusivity"))
  {
    set.diffusivity = meta["diffusivity"].get<double>();
  }
  set.trajectory.states = c.block("states");
  const MatrixXd &times = c.block("times");
  if (times.cols() != 1)
  {
    throw FormatError(FormatError::Kind::dimension, path + ": block 'times' must be a column");
  }
  set.trajectory.times = times.col(0);
  set.inner_product.mass = unband(c.block("mass"), "mass");
  set.inner_product.stiffness = unband(c.block("stiffness"), "stiffness");
  const Index n_cells = meta.value("n_cells", set.inner_product.mass.size() + 1);
  if (n_cells - 1 != set.inner_product.mass.size())
  {
    throw FormatError(FormatError::Kind::dimension, path + ": n_cells inconsistent with mass matrix dimension");
  }
  set.inner_product.mesh = fe1d::Mesh1D::uniform(n_cells);
  if (set.inner_product.mass.size() != set.n_dof() || set.inner_product.stiffness.size() != set.n_dof())
  {
    throw FormatError(FormatError::Kind::dimension,
                      path + ": mass-matrix dimension " + std::to_string(set.inner_product.mass.size()) +
                          " != snapshot dimension " + std::to_string(set.n_dof()));
  }
  if (set.trajectory.times.size() != set.size() || set.size() < 2)
  {
    throw FormatError(FormatError::Kind::dimension, path + ": inconsistent snapshot/time counts");
  }
  return set;
}

void write_trajectory_csv(const std::string &path, const Vector<double> &times, const MatrixXd &coeffs)
{
  if (times.size() != coeffs.cols())
  {
    throw DimensionError("write_trajectory_csv: times/coefficients length mismatch");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out)
  {
    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "' for writing");
  }
  out << std::setprecision(17);
  out << "t";
  for (Index i = 0; i < coeffs.rows(); ++i)
  {
    out << ",a" << i + 1;
  }
  out << "\n";
  for (Index n = 0; n < coeffs.cols(); ++n)
  {
    out << times(n);
    for (Index i = 0; i < coeffs.rows(); ++i)
    {
      out << "," << coeffs(i, n);
    }
    out << "\n";
  }
}

}  // namespace ddvms
