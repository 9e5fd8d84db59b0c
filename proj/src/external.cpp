// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <fstream>
#include <string_view>

#include <json.hpp>

#include "ddvms/snapshots.hpp"

namespace ddvms
{
namespace
{

using json = nlohmann::json;

constexpr std::string_view kFormatName = "ddvms-external";
constexpr int kExternalVersion = 1;

void require_finite(const MatrixXd &m, const std::string &field)
{
  if (!m.allFinite())
  {
    throw SchemaError(field, "contains non-finite values");
  }
}

MatrixXd parse_matrix(const json &j, const std::string &field)
{
  if (!j.is_array() || j.empty())
  {
    throw SchemaError(field, "expected a non-empty array of rows");
  }
  const auto rows = static_cast<Index>(j.size());
  Index cols = -1;
  MatrixXd m;
  for (Index i = 0; i < rows; ++i)
  {
    const json &row = j[static_cast<std::size_t>(i)];
    if (!row.is_array())
    {
      throw SchemaError(field, "row " + std::to_string(i) + " is not an array");
    }
    if (cols < 0)
    {
      cols = static_cast<Index>(row.size());
      if (cols == 0)
      {
        throw SchemaError(field, "rows must not be empty");
      }
      m.resize(rows, cols);
    }
    else if (static_cast<Index>(row.size()) != cols)
    {
      throw SchemaError(field, "ragged rows: row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                                   " entries, expected " + std::to_string(cols));
    }
    for (Index c = 0; c < cols; ++c)
    {
      const json &v = row[static_cast<std::size_t>(c)];
      if (!v.is_number())
      {
        throw SchemaError(field, "entry (" + std::to_string(i) + ", " + std::to_string(c) + ") is not a number");
      }
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

json matrix_json(const MatrixXd &m)
{
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i)
  {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c)
    {
      row.push_back(m(i, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int parse_rank_key(const std::string &key)
{
  std::size_t used = 0;
  int r = 0;
  try
  {
    r = std::stoi(key, &used);
  }
  catch (const std::exception &)
  {
    used = 0;
  }
  if (used != key.size() || r < 1)
  {
    throw SchemaError("closure_targets", "key '" + key + "' is not a positive rank");
  }
  return r;
}

ExternalDataset from_json(const json &doc)
{
  if (!doc.is_object())
  {
    throw SchemaError("<root>", "expected a JSON object");
  }
  if (doc.contains("format") && doc["format"] != kFormatName)
  {
    throw SchemaError("format", "expected \"" + std::string(kFormatName) + "\"");
  }
  if (doc.contains("version") && (!doc["version"].is_number_integer() || doc["version"].get<int>() != kExternalVersion))
  {
    throw SchemaError("version", "unsupported version (expected " + std::to_string(kExternalVersion) + ")");
  }

  ExternalDataset ds;
  if (doc.contains("label"))
  {
    if (!doc["label"].is_string())
    {
      throw SchemaError("label", "expected a string");
    }
    ds.label = doc["label"].get<std::string>();
  }
  if (!doc.contains("dt") || !doc["dt"].is_number())
  {
    throw SchemaError("dt", "required number is missing");
  }
  ds.dt = doc["dt"].get<double>();
  if (!doc.contains("coeffs"))
  {
    throw SchemaError("coeffs", "required field is missing");
  }
  ds.coeffs = parse_matrix(doc["coeffs"], "coeffs");

  if (!doc.contains("closure_targets"))
  {
    throw SchemaError("closure_targets", "required field is missing");
  }
  const json &ct = doc["closure_targets"];
  if (ct.is_object())
  {
    for (const auto &[key, value] : ct.items())
    {
      const int r = parse_rank_key(key);
      ds.closure_targets[r] = parse_matrix(value, "closure_targets." + key);
    }
  }
  else
  {
    // A single r_max x M matrix: keyed by its row count.
    MatrixXd tau = parse_matrix(ct, "closure_targets");
    ds.closure_targets[static_cast<int>(tau.rows())] = std::move(tau);
  }

  if (doc.contains("forcing") && !doc["forcing"].is_null())
  {
    ds.forcing = parse_matrix(doc["forcing"], "forcing");
  }
  if (doc.contains("diffusion") && !doc["diffusion"].is_null())
  {
    ds.diffusion = parse_matrix(doc["diffusion"], "diffusion");
  }
  if (doc.contains("convection") && !doc["convection"].is_null())
  {
    const json &cv = doc["convection"];
    if (!cv.is_array() || cv.empty())
    {
      throw SchemaError("convection", "expected a non-empty array of r x r slices");
    }
    std::vector<MatrixXd> slices;
    for (std::size_t i = 0; i < cv.size(); ++i)
    {
      slices.push_back(parse_matrix(cv[i], "convection[" + std::to_string(i) + "]"));
    }
    ds.convection = std::move(slices);
  }
  if (doc.contains("stiffness_gram") && !doc["stiffness_gram"].is_null())
  {
    ds.stiffness_gram = parse_matrix(doc["stiffness_gram"], "stiffness_gram");
  }
  if (doc.contains("reynolds") && !doc["reynolds"].is_null())
  {
    if (!doc["reynolds"].is_number())
    {
      throw SchemaError("reynolds", "expected a number");
    }
    ds.reynolds = doc["reynolds"].get<double>();
  }
  ds.validate();
  return ds;
}

json to_json(const ExternalDataset &ds)
{
  json doc;
  doc["format"] = kFormatName;
  doc["version"] = kExternalVersion;
  doc["label"] = ds.label;
  doc["dt"] = ds.dt;
  doc["coeffs"] = matrix_json(ds.coeffs);
  json ct = json::object();
  for (const auto &[r, tau] : ds.closure_targets)
  {
    ct[std::to_string(r)] = matrix_json(tau);
  }
  doc["closure_targets"] = std::move(ct);
  if (ds.forcing)
  {
    doc["forcing"] = matrix_json(*ds.forcing);
  }
  if (ds.diffusion)
  {
    doc["diffusion"] = matrix_json(*ds.diffusion);
  }
  if (ds.convection)
  {
    json cv = json::array();
    for (const auto &s : *ds.convection)
    {
      cv.push_back(matrix_json(s));
    }
    doc["convection"] = std::move(cv);
  }
  if (ds.stiffness_gram)
  {
    doc["stiffness_gram"] = matrix_json(*ds.stiffness_gram);
  }
  if (ds.reynolds)
  {
    doc["reynolds"] = *ds.reynolds;
  }
  return doc;
}

Container to_container(const ExternalDataset &ds)
{
  Container c;
  c.kind = "external";
  json meta;
  meta["label"] = ds.label;
  meta["dt"] = ds.dt;
  meta["d"] = ds.dim();
  meta["n_snapshots"] = ds.snapshots();
  if (ds.reynolds)
  {
    meta["reynolds"] = *ds.reynolds;
  }
  if (ds.convection)
  {
    meta["convection_slices"] = ds.convection->size();
  }
  c.meta_json = meta.dump();
  c.blocks["coeffs"] = ds.coeffs;
  for (const auto &[r, tau] : ds.closure_targets)
  {
    c.blocks["closure_targets." + std::to_string(r)] = tau;
  }
  if (ds.forcing)
  {
    c.blocks["forcing"] = *ds.forcing;
  }
  if (ds.diffusion)
  {
    c.blocks["diffusion"] = *ds.diffusion;
  }
  if (ds.convection)
  {
    for (std::size_t i = 0; i < ds.convection->size(); ++i)
    {
      c.blocks["convection." + std::to_string(i)] = (*ds.convection)[i];
    }
  }
  if (ds.stiffness_gram)
  {
    c.blocks["stiffness_gram"] = *ds.stiffness_gram;
  }
  return c;
}

ExternalDataset from_container(const Container &c)
{
  if (c.kind != "external")
  {
    throw SchemaError("kind", "container kind '" + c.kind + "' is not 'external'");
  }
  const json meta = json::parse(c.meta_json);
  ExternalDataset ds;
  ds.label = meta.value("label", "");
  ds.dt = meta.value("dt", 0.0);
  if (meta.contains("reynolds"))
  {
    ds.reynolds = meta["reynolds"].get<double>();
  }
  const auto find = [&](const std::string &name) -> const MatrixXd * {
    const auto it = c.blocks.find(name);
    return it == c.blocks.end() ? nullptr : &it->second;
  };
  if (!find("coeffs"))
  {
    throw SchemaError("coeffs", "required block is missing");
  }
  ds.coeffs = *find("coeffs");
  const std::string prefix = "closure_targets.";
  for (const auto &[name, m] : c.blocks)
  {
    if (name.rfind(prefix, 0) == 0)
    {
      ds.closure_targets[parse_rank_key(name.substr(prefix.size()))] = m;
    }
  }
  if (const auto *m = find("forcing"))
  {
    ds.forcing = *m;
  }
  if (const auto *m = find("diffusion"))
  {
    ds.diffusion = *m;
  }
  if (meta.contains("convection_slices"))
  {
    std::vector<MatrixXd> slices;
    const auto n = meta["convection_slices"].get<std::size_t>();
    for (std::size_t i = 0; i < n; ++i)
    {
      const auto *m = find("convection." + std::to_string(i));
      if (!m)
      {
        throw SchemaError("convection[" + std::to_string(i) + "]", "slice block is missing");
      }
      slices.push_back(*m);
    }
    ds.convection = std::move(slices);
  }
  if (const auto *m = find("stiffness_gram"))
  {
    ds.stiffness_gram = *m;
  }
  ds.validate();
  return ds;
}

bool has_container_magic(const std::string &path)
{
  std::ifstream in(path, std::ios::binary);
  char buf[8] = {};
  in.read(buf, sizeof buf);
  return in.gcount() == 8 && std::memcmp(buf, "DDVMSBIN", 8) == 0;
}

}  // namespace

int ExternalDataset::max_operator_rank() const
{
  Index r = dim();
  if (diffusion)
  {
    r = std::min(r, diffusion->rows());
  }
  else
  {
    r = 0;
  }
  if (convection)
  {
    r = std::min<Index>(r, static_cast<Index>(convection->size()));
  }
  else
  {
    r = 0;
  }
  if (forcing)
  {
    r = std::min(r, forcing->rows());
  }
  return static_cast<int>(r);
}

void ExternalDataset::validate() const
{
  if (!(dt > 0.0) || !std::isfinite(dt))
  {
    throw SchemaError("dt", "must be a finite positive number");
  }
  if (coeffs.size() == 0)
  {
    throw SchemaError("coeffs", "must not be empty");
  }
  const Index d = dim(), M = snapshots();
  if (M < 2)
  {
    throw SchemaError("coeffs", "at least 2 snapshots (columns) required, got " + std::to_string(M));
  }
  require_finite(coeffs, "coeffs");
  if (closure_targets.empty())
  {
    throw SchemaError("closure_targets", "at least one rank is required");
  }
  for (const auto &[r, tau] : closure_targets)
  {
    const std::string field = "closure_targets." + std::to_string(r);
    if (tau.rows() != r)
    {
      throw SchemaError(field, "has " + std::to_string(tau.rows()) + " rows, expected r = " + std::to_string(r));
    }
    if (r > d)
    {
      throw SchemaError(field, "row count " + std::to_string(r) + " exceeds coeffs row count " + std::to_string(d));
    }
    if (tau.cols() != M)
    {
      throw SchemaError(field, "has " + std::to_string(tau.cols()) + " columns, expected M = " + std::to_string(M));
    }
    require_finite(tau, field);
  }
  if (forcing)
  {
    if (forcing->cols() != M)
    {
      throw SchemaError("forcing", "column count must equal M = " + std::to_string(M));
    }
    if (forcing->rows() > d)
    {
      throw SchemaError("forcing", "row count exceeds coeffs row count");
    }
    require_finite(*forcing, "forcing");
  }
  if (diffusion)
  {
    if (diffusion->rows() != diffusion->cols())
    {
      throw SchemaError("diffusion", "must be square");
    }
    if (diffusion->rows() > d)
    {
      throw SchemaError("diffusion", "dimension exceeds coeffs row count");
    }
    require_finite(*diffusion, "diffusion");
  }
  if (convection)
  {
    const auto n = static_cast<Index>(convection->size());
    if (n > d)
    {
      throw SchemaError("convection", "slice count exceeds coeffs row count");
    }
    for (Index i = 0; i < n; ++i)
    {
      const auto &s = (*convection)[static_cast<std::size_t>(i)];
      const std::string field = "convection[" + std::to_string(i) + "]";
      if (s.rows() != n || s.cols() != n)
      {
        throw SchemaError(field, "must be " + std::to_string(n) + " x " + std::to_string(n));
      }
      require_finite(s, field);
    }
    if (diffusion && diffusion->rows() != n)
    {
      throw SchemaError("convection", "slice count must match the diffusion dimension");
    }
  }
  if (stiffness_gram)
  {
    if (stiffness_gram->rows() != stiffness_gram->cols())
    {
      throw SchemaError("stiffness_gram", "must be square");
    }
    require_finite(*stiffness_gram, "stiffness_gram");
  }
  if (reynolds && !(*reynolds > 0.0))
  {
    throw SchemaError("reynolds", "must be positive");
  }
}

ExternalDataset ingest_external(const std::string &path)
{
  if (has_container_magic(path))
  {
    return from_container(read_container(path));
  }
  std::ifstream in(path);
  if (!in)
  {
    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "'");
  }
  json doc;
  try
  {
    doc = json::parse(in);
  }
  catch (const json::parse_error &e)
  {
    throw SchemaError("<root>", std::string("not valid JSON: ") + e.what());
  }
  return from_json(doc);
}

void export_external(const ExternalDataset &ds, const std::string &path)
{
  ds.validate();
  const bool as_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (!as_json)
  {
    write_container(path, to_container(ds));
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out)
  {
    throw FormatError(FormatError::Kind::io, "cannot open '" + path + "' for writing");
  }
  // nlohmann::json prints the shortest round-trip representation of each double.
  out << to_json(ds).dump() << "\n";
}

}  // namespace ddvms
