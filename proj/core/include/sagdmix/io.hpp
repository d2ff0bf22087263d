#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sagdmix/moments.hpp"

namespace sagdmix {

std::string_view library_version();

/// Model file: {"dim", "basis" (row-major), "sigma", "kurt", "samplers": [{"kind", "params": {...}}]}.
/// Models with samplers are rebuilt from them (sigma/kurt are checked
/// against the declared laws); without samplers the moments are used as is.
std::string model_to_json(const MomentSpec& model);
MomentSpec model_from_json(std::string_view text);
void save_model(const std::string& path, const MomentSpec& model);
MomentSpec load_model(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// %.17g, so doubles round-trip exactly.
std::string format_double(double v);

/// Header line then one row per entry of `columns[0]`. All columns must have equal length.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  ///< raw cells
};

/// Comma-separated with a header line; blank lines skipped, surrounding whitespace trimmed.
CsvTable read_csv(const std::string& path);

/// Writes `path` + ".json" holding {"version", "seed", "config"}; `config_json` must be a JSON document.
void write_sidecar(const std::string& path, std::uint64_t seed, std::string_view config_json);

}  // namespace sagdmix
