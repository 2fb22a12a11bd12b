// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "efdmp/config.hpp"
#include "efdmp/dataset.hpp"

namespace efdmp {

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

// Long-format CSV with header `unit_id,time,value[,volume]` (columns may come
// in any order). Units keep their order of first appearance; rows within a
// unit are sorted by time. A unit's volume is the sum of its row volumes;
// empty volume cells are skipped, and a unit with no volume cells has none.
// Errors carry `source:line` context.
FunctionalDataset read_dataset_csv(std::istream& in, const std::string& source);
FunctionalDataset read_dataset_csv(const std::filesystem::path& path);

// Writes one row per observation; the volume (if any) goes on each unit's
// first row so that reading the file back reproduces the dataset.
void write_dataset_csv(std::ostream& out, const FunctionalDataset& data);

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& doc);

ModelConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ModelConfig& cfg);

nlohmann::json basis_to_json(const BasisSpec& spec);
BasisSpec basis_from_json(const nlohmann::json& doc);

// Two-column `unit_id,label` file (ground truth or any integer labelling).
struct LabelTable {
  std::vector<std::string> unit_ids;
  std::vector<int> labels;
};

void write_labels_csv(std::ostream& out, const LabelTable& table);
LabelTable read_labels_csv(const std::filesystem::path& path);

// Splits one CSV record, honouring double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace efdmp
