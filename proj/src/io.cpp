#include "rkshap/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <fmt/format.h>
#include "json.hpp"

#include "rkshap/errors.hpp"

namespace rkshap {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw InputError(fmt::format("line {}: column '{}' holds non-numeric value '{}'",
                                 line, column, text));
  }
  return value;
}

template <class Stream>
Stream open(const std::filesystem::path& path) {
  Stream stream(path);
  if (!stream) throw InputError(fmt::format("cannot open '{}'", path.string()));
  return stream;
}

void write_row(std::ostream& out, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  for (Eigen::Index c = 0; c < row.size(); ++c) {
    if (c > 0) out << ',';
    out << format_double(row(c));
  }
}

}  // namespace

std::string format_double(double value) { return fmt::format("{:.17g}", value); }

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  const auto names = data.feature_names.empty() ? default_feature_names(data.dim())
                                                : data.feature_names;
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  const bool labelled = data.y.size() == data.size();
  if (labelled) out << ",y";
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    write_row(out, data.X.row(i));
    if (labelled) out << ',' << format_double(data.y(i));
    out << '\n';
  }
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  auto out = open<std::ofstream>(path);
  write_dataset_csv(data, out);
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV is empty; header row required");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_line(line);
  if (header.empty()) throw InputError("CSV header row is empty");
  const bool labelled = header.back() == "y";
  const std::size_t n_features = header.size() - (labelled ? 1 : 0);
  if (n_features == 0) throw InputError("CSV has no feature columns");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw InputError(fmt::format("line {}: expected {} fields, found {}", line_no,
                                   header.size(), fields.size()));
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      values[c] = parse_number(fields[c], line_no, header[c]);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError("CSV has a header but no data rows");

  Dataset data;
  data.feature_names.assign(header.begin(), header.begin() + n_features);
  data.X.resize(rows.size(), n_features);
  if (labelled) data.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < n_features; ++c) data.X(i, c) = rows[i][c];
    if (labelled) data.y(i) = rows[i][n_features];
  }
  data.generator = "csv";
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = open<std::ifstream>(path);
  return read_dataset_csv(in);
}

void write_model_json(const FittedModel& model, std::ostream& out) {
  const auto list = [](auto&& values, Eigen::Index count) {
    std::string text = "[";
    for (Eigen::Index i = 0; i < count; ++i) {
      if (i) text += ", ";
      text += format_double(values(i));
    }
    return text + "]";
  };
  const Eigen::Map<const Vector> scales(model.spec.lengthscales().data(), model.dim());
  out << "{\n";
  out << "  \"format\": \"rkshap-model\",\n";
  out << "  \"version\": 1,\n";
  out << "  \"lengthscales\": " << list(scales, scales.size()) << ",\n";
  out << "  \"lambda_f\": " << format_double(model.lambda_f) << ",\n";
  out << "  \"alpha\": " << list(model.alpha, model.alpha.size()) << ",\n";
  out << "  \"x_train\": [";
  for (Eigen::Index i = 0; i < model.x_train.rows(); ++i) {
    out << (i ? ",\n    " : "\n    ")
        << list(model.x_train.row(i), model.x_train.cols());
  }
  out << "\n  ],\n";
  out << "  \"regulariser\": ";
  if (model.regulariser) {
    const RegulariserInfo& r = *model.regulariser;
    out << fmt::format(
        "{{\"feature\": {}, \"lambda_s\": {}, \"samples\": {}, \"mode\": \"{}\", "
        "\"seed\": {}}}",
        r.feature, format_double(r.lambda_s), r.samples, to_string(r.mode), r.seed);
  } else {
    out << "null";
  }
  out << "\n}\n";
}

void write_model_json(const FittedModel& model, const std::filesystem::path& path) {
  auto out = open<std::ofstream>(path);
  write_model_json(model, out);
}

FittedModel read_model_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    if (doc.at("format").get<std::string>() != "rkshap-model") {
      throw InputError("not an rkshap model file");
    }
    FittedModel model;
    model.spec = KernelSpec(doc.at("lengthscales").get<std::vector<double>>());
    model.lambda_f = doc.at("lambda_f").get<double>();
    const auto alpha = doc.at("alpha").get<std::vector<double>>();
    const auto rows = doc.at("x_train").get<std::vector<std::vector<double>>>();
    if (rows.size() != alpha.size()) {
      throw InputError(fmt::format("model has {} dual weights but {} training rows",
                                   alpha.size(), rows.size()));
    }
    model.alpha = Eigen::Map<const Vector>(alpha.data(), alpha.size());
    model.x_train.resize(rows.size(), model.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != static_cast<std::size_t>(model.dim())) {
        throw InputError(fmt::format("training row {} has {} values, expected {}", i,
                                     rows[i].size(), model.dim()));
      }
      for (int c = 0; c < model.dim(); ++c) model.x_train(i, c) = rows[i][c];
    }
    const auto& reg = doc.at("regulariser");
    if (!reg.is_null()) {
      RegulariserInfo r;
      r.feature = reg.at("feature").get<int>();
      r.lambda_s = reg.at("lambda_s").get<double>();
      r.samples = reg.at("samples").get<int>();
      r.mode = parse_mode(reg.at("mode").get<std::string>());
      r.seed = reg.at("seed").get<std::uint64_t>();
      model.regulariser = r;
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("malformed model file: {}", e.what()));
  }
}

FittedModel read_model_json(const std::filesystem::path& path) {
  auto in = open<std::ifstream>(path);
  return read_model_json(in);
}

void write_attribution_csv(const AttributionMatrix& phi,
                           const std::vector<std::string>& feature_names,
                           std::ostream& out) {
  if (static_cast<Eigen::Index>(feature_names.size()) != phi.values.rows()) {
    throw InputError(fmt::format("{} feature names for {} attribution rows",
                                 feature_names.size(), phi.values.rows()));
  }
  out << "row,feature,phi,mode,baseline,grand\n";
  for (Eigen::Index j = 0; j < phi.values.cols(); ++j) {
    for (Eigen::Index i = 0; i < phi.values.rows(); ++i) {
      out << j << ',' << feature_names[i] << ',' << format_double(phi.values(i, j))
          << ',' << to_string(phi.mode) << ',' << format_double(phi.baseline(j)) << ','
          << format_double(phi.grand(j)) << '\n';
    }
  }
}

}  // namespace rkshap
