#include "coexist/scenario_io.hpp"

#include <fstream>
#include <sstream>

namespace coexist {

using nlohmann::json;

namespace {

std::complex<double> complex_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ValidationError("complex number must be a [re, im] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
T field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad field '") + key + "': " + e.what());
  }
}

const json& child(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  return obj.at(key);
}

}  // namespace

json complex_to_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

json matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError("ragged matrix rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = complex_from_json(row[static_cast<std::size_t>(c)]);
  }
  return m;
}

json scenario_to_json(const Scenario& s) {
  json radar;
  radar["chips"] = s.radar.chips;
  json code = json::array();
  for (Eigen::Index l = 0; l < s.radar.code.size(); ++l) code.push_back(complex_to_json(s.radar.code(l)));
  radar["code"] = std::move(code);
  radar["max_power"] = s.radar.max_power;
  radar["noise_power"] = s.radar.noise_power;
  radar["beams"] = s.radar.beams;
  json clutter = json::array();
  for (Eigen::Index i = 0; i < s.radar.clutter.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < s.radar.clutter.cols(); ++j) row.push_back(s.radar.clutter(i, j));
    clutter.push_back(std::move(row));
  }
  radar["clutter"] = std::move(clutter);
  json cells = json::array();
  for (const auto& c : s.radar.cells) {
    cells.push_back({{"range", c.range},
                     {"beam", c.beam},
                     {"target_variance", c.target_variance},
                     {"threshold", c.threshold}});
  }
  radar["cells"] = std::move(cells);

  json comm;
  comm["tx"] = s.comm.tx;
  comm["rx"] = s.comm.rx;
  comm["channel"] = matrix_to_json(s.comm.channel);
  comm["max_power"] = s.comm.max_power;
  comm["noise_power"] = s.comm.noise_power;
  comm["channel_variance"] = s.comm.channel_variance;
  json alpha = json::array();
  for (std::size_t i = 0; i < s.comm.interference.size(); ++i) {
    const auto& sigma = s.comm.interference[i];
    if (sigma.size() == 0 || sigma.cwiseAbs().maxCoeff() == 0) continue;
    alpha.push_back({{"i", i}, {"matrix", matrix_to_json(sigma)}});
  }
  comm["interference"] = std::move(alpha);

  json cross = json::array();
  for (std::size_t j = 0; j < s.cross.by_beam.size(); ++j) {
    for (const auto& slice : s.cross.by_beam[j]) {
      cross.push_back({{"i", slice.chip}, {"j", j}, {"matrix", matrix_to_json(slice.covariance)}});
    }
  }

  json doc;
  doc["schema"] = kScenarioSchema;
  doc["offset"] = s.offset;
  doc["radar"] = std::move(radar);
  doc["comm"] = std::move(comm);
  doc["cross"] = std::move(cross);
  return doc;
}

Scenario scenario_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("schema")) {
    throw ValidationError("scenario document lacks a schema field");
  }
  if (doc.at("schema") != kScenarioSchema) {
    throw ValidationError("unsupported scenario schema: " + doc.at("schema").dump());
  }
  Scenario s;
  s.offset = field<int>(doc, "offset");

  const json& radar = child(doc, "radar");
  s.radar.chips = field<int>(radar, "chips");
  const json& code = child(radar, "code");
  if (!code.is_array()) throw ValidationError("code must be an array");
  s.radar.code.resize(static_cast<Eigen::Index>(code.size()));
  for (std::size_t l = 0; l < code.size(); ++l) {
    s.radar.code(static_cast<Eigen::Index>(l)) = complex_from_json(code[l]);
  }
  s.radar.max_power = field<double>(radar, "max_power");
  s.radar.noise_power = field<double>(radar, "noise_power");
  s.radar.beams = field<int>(radar, "beams");
  const json& clutter = child(radar, "clutter");
  if (!clutter.is_array() || static_cast<int>(clutter.size()) != s.radar.chips) {
    throw ValidationError("clutter must have N rows");
  }
  s.radar.clutter.resize(s.radar.chips, s.radar.beams);
  for (int i = 0; i < s.radar.chips; ++i) {
    const json& row = clutter[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != s.radar.beams) {
      throw ValidationError("clutter rows must have J entries");
    }
    for (int j = 0; j < s.radar.beams; ++j) s.radar.clutter(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  for (const json& c : child(radar, "cells")) {
    s.radar.cells.push_back({field<int>(c, "range"), field<int>(c, "beam"),
                             field<double>(c, "target_variance"), field<double>(c, "threshold")});
  }

  const json& comm = child(doc, "comm");
  s.comm.tx = field<int>(comm, "tx");
  s.comm.rx = field<int>(comm, "rx");
  s.comm.channel = matrix_from_json(child(comm, "channel"));
  s.comm.max_power = field<double>(comm, "max_power");
  s.comm.noise_power = field<double>(comm, "noise_power");
  s.comm.channel_variance = field<double>(comm, "channel_variance");
  if (s.radar.chips <= 0 || s.comm.rx <= 0 || s.comm.tx <= 0) {
    throw ValidationError("dimensions must be positive");
  }
  s.comm.interference.assign(static_cast<std::size_t>(s.radar.chips),
                             CMatrix::Zero(s.comm.rx, s.comm.rx));
  for (const json& entry : child(comm, "interference")) {
    const int i = field<int>(entry, "i");
    if (i < 0 || i >= s.radar.chips) throw ValidationError("interference chip out of range");
    s.comm.interference[static_cast<std::size_t>(i)] = matrix_from_json(child(entry, "matrix"));
  }

  if (s.radar.beams <= 0) throw ValidationError("beam count must be positive");
  s.cross.by_beam.assign(static_cast<std::size_t>(s.radar.beams), {});
  for (const json& entry : child(doc, "cross")) {
    const int j = field<int>(entry, "j");
    if (j < 0 || j >= s.radar.beams) throw ValidationError("cross slice beam out of range");
    s.cross.by_beam[static_cast<std::size_t>(j)].push_back(
        {field<int>(entry, "i"), matrix_from_json(child(entry, "matrix"))});
  }
  return validate_scenario(std::move(s));
}

std::string dump_scenario(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

void write_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << dump_scenario(s);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Scenario read_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return scenario_from_json(doc);
}

}  // namespace coexist
