#include "sagdmix/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sagdmix/errors.hpp"

#ifndef SAGDMIX_VERSION_STRING
#define SAGDMIX_VERSION_STRING "0.0.0"
#endif

namespace sagdmix {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

Eigen::VectorXd vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string("model: '") + what + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

std::string_view library_version() { return SAGDMIX_VERSION_STRING; }

std::string model_to_json(const MomentSpec& model) {
  const int d = model.dim();
  json basis = json::array();
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) basis.push_back(model.basis()(r, c));
  json samplers = json::array();
  for (const auto& s : model.samplers()) {
    json params = json::object();
    for (const auto& [name, value] : s.params()) params[name] = value;
    samplers.push_back({{"kind", std::string(to_string(s.kind()))}, {"params", params}});
  }
  json j{{"id", model.id()},
         {"dim", d},
         {"basis", basis},
         {"sigma", std::vector<double>(model.sigma().data(), model.sigma().data() + d)},
         {"kurt", std::vector<double>(model.kurt().data(), model.kurt().data() + d)},
         {"samplers", samplers}};
  return j.dump(2);
}

MomentSpec model_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
  try {
    const int d = j.at("dim").get<int>();
    if (d < 1) throw ValidationError("model: dim must be >= 1");
    const auto& jb = j.at("basis");
    if (!jb.is_array() || jb.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(d))
      throw ValidationError("model: basis must hold dim*dim entries (row-major)");
    Eigen::MatrixXd basis(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) basis(r, c) = jb[static_cast<std::size_t>(r * d + c)].get<double>();
    const std::string id = j.value("id", std::string("model"));

    if (j.contains("samplers") && !j["samplers"].empty()) {
      std::vector<ScalarSampler> samplers;
      for (const auto& js : j["samplers"]) {
        std::vector<std::pair<std::string, double>> params;
        for (const auto& [name, value] : js.at("params").items()) params.emplace_back(name, value.get<double>());
        samplers.push_back(ScalarSampler::from_params(js.at("kind").get<std::string>(), params));
      }
      if (samplers.size() != static_cast<std::size_t>(d)) throw ValidationError("model: need one sampler per dim");
      MomentSpec m = MomentSpec::from_samplers(basis, samplers, id);
      // Declared moments, if present, must agree with the laws.
      for (const char* key : {"sigma", "kurt"}) {
        if (!j.contains(key)) continue;
        const Eigen::VectorXd declared = vector_from(j[key], key);
        const Eigen::VectorXd& actual = std::strcmp(key, "sigma") == 0 ? m.sigma() : m.kurt();
        if (declared.size() != d || (declared - actual).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + actual.cwiseAbs().maxCoeff()))
          throw ValidationError(std::string("model: declared ") + key + " disagrees with the samplers");
      }
      return m;
    }
    return MomentSpec::from_moments(basis, vector_from(j.at("sigma"), "sigma"), vector_from(j.at("kurt"), "kurt"),
                                    id);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
}

void save_model(const std::string& path, const MomentSpec& model) { write_text_file(path, model_to_json(model)); }

MomentSpec load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, std::string("cannot open for reading: ") + std::strerror(errno));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(path, "read failed");
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, std::string("cannot open for writing: ") + std::strerror(errno));
  out << text;
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  if (columns.size() != header.size()) throw ValidationError("csv: header and column counts differ");
  const std::size_t rows = columns.empty() ? 0 : columns[0].size();
  for (const auto& c : columns)
    if (c.size() != rows) throw ValidationError("csv: columns have different lengths");
  std::string text;
  for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
  text += '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) text += ',';
      text += format_double(columns[c][r]);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

CsvTable read_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ValidationError(path + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                            std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw ValidationError(path + ": empty CSV");
  return t;
}

void write_sidecar(const std::string& path, std::uint64_t seed, std::string_view config_json) {
  json config;
  try {
    config = json::parse(config_json.empty() ? std::string_view("{}") : config_json);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("sidecar config: ") + e.what());
  }
  json j{{"version", std::string(library_version())}, {"seed", seed}, {"config", config}};
  write_text_file(path + ".json", j.dump(2) + "\n");
}

}  // namespace sagdmix
