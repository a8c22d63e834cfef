#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "rkshap/datasets.hpp"
#include "rkshap/fitted_model.hpp"
#include "rkshap/shapley.hpp"

namespace rkshap {

// Shortest text that is always bit-exact on re-read: 17 significant digits.
std::string format_double(double value);

// Header `x1,...,xd,y`; LF line endings.
void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

// Reads a header row plus numeric rows. A trailing column named `y` becomes
// the label vector; otherwise labels are left empty.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

void write_model_json(const FittedModel& model, std::ostream& out);
void write_model_json(const FittedModel& model, const std::filesystem::path& path);
FittedModel read_model_json(std::istream& in);
FittedModel read_model_json(const std::filesystem::path& path);

// Columns `row,feature,phi,mode,baseline,grand`, one line per (row, feature).
void write_attribution_csv(const AttributionMatrix& phi,
                           const std::vector<std::string>& feature_names,
                           std::ostream& out);

}  // namespace rkshap
