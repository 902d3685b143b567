// SPDX-License-Identifier: Apache-2.0
#include "lead/raw_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lead/error.hpp"

namespace lead::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = 0;
    while (start < field.size() && field[start] == ' ') ++start;
    out.push_back(field.substr(start));
  }
  return out;
}

}  // namespace

RawIndex read_raw_index(const fs::path& dir) {
  const fs::path path = dir / "raw.json";
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  RawIndex index;
  try {
    const json j = json::parse(in);
    index.dataset_id = j.at("dataset_id").get<std::string>();
    index.sampling_rate = j.at("sampling_rate").get<double>();
    if (j.contains("class_names"))
      for (const auto& [k, v] : j.at("class_names").items())
        index.class_names[std::stoi(k)] = v.get<std::string>();
    for (const auto& s : j.at("subjects")) {
      RawSubject sub;
      sub.subject_id = s.at("id").get<std::int32_t>();
      sub.label = s.at("label").get<std::int32_t>();
      sub.trials = s.at("trials").get<std::vector<std::string>>();
      index.subjects.push_back(std::move(sub));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  if (!(index.sampling_rate > 0.0))
    fail(ErrorKind::kConfig, path.string() + ": sampling_rate must be positive");
  return index;
}

void write_raw_index(const RawIndex& index, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["dataset_id"] = index.dataset_id;
  j["sampling_rate"] = index.sampling_rate;
  json names = json::object();
  for (const auto& [k, v] : index.class_names) names[std::to_string(k)] = v;
  j["class_names"] = names;
  j["subjects"] = json::array();
  for (const auto& s : index.subjects)
    j["subjects"].push_back({{"id", s.subject_id}, {"label", s.label}, {"trials", s.trials}});
  std::ofstream out(dir / "raw.json");
  if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / "raw.json").string());
  out << j.dump(2) << '\n';
}

prep::RawTrial read_raw_csv(const fs::path& path, double fs,
                            const prep::CoordinateTable& coords) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::kFormat, path.string() + ": empty file");
  prep::RawTrial trial;
  trial.fs = fs;
  trial.channel_names = split_csv(line);
  for (const auto& name : trial.channel_names) {
    const auto pos = coords.find(name);
    if (!pos)
      fail(ErrorKind::kConfig, path.string() + ": no coordinates for channel '" + name +
                                   "'; add it to the montage file");
    trial.coords.push_back(*pos);
  }
  const std::size_t n_ch = trial.channel_names.size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    if (fields.size() != n_ch)
      fail(ErrorKind::kFormat, path.string() + ": row " + std::to_string(rows + 2) + " has " +
                                   std::to_string(fields.size()) + " fields, expected " +
                                   std::to_string(n_ch));
    for (const auto& f : fields) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size())
        fail(ErrorKind::kFormat, path.string() + ": bad number '" + f + "'");
      values.push_back(v);
    }
    ++rows;
  }
  trial.data = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(rows),
                                        static_cast<Eigen::Index>(n_ch));
  return trial;
}

void write_raw_csv(const prep::RawTrial& trial, const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (std::size_t c = 0; c < trial.channel_names.size(); ++c)
    out << (c ? "," : "") << trial.channel_names[c];
  out << '\n';
  char buf[32];
  for (Eigen::Index t = 0; t < trial.data.rows(); ++t) {
    for (Eigen::Index c = 0; c < trial.data.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, trial.data(t, c));
      if (c) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

Corpus preprocess_raw_dataset(const fs::path& dir, const prep::PreprocessConfig& cfg,
                              const prep::CoordinateTable& coords, const prep::Montage& montage) {
  const RawIndex index = read_raw_index(dir);
  LabelTable labels;
  SampleList samples;
  for (const auto& sub : index.subjects) {
    labels.rows.push_back({sub.label, sub.subject_id});
    for (const auto& file : sub.trials) {
      const auto trial = read_raw_csv(dir / file, index.sampling_rate, coords);
      try {
        auto windows =
            prep::preprocess_trial(trial, cfg, montage, {sub.subject_id, sub.label, index.dataset_id});
        for (auto& w : windows) samples.push_back(std::move(w));
      } catch (const Error& e) {
        throw Error(e.kind(), (dir / file).string() + ": " + e.what());
      }
    }
  }
  std::vector<std::int32_t> classes;
  for (const auto& [k, v] : index.class_names) classes.push_back(k);
  labels.validate(classes);
  return assemble_corpus(index.dataset_id, std::move(labels), std::move(samples), index.class_names,
                         "preprocessed from " + dir.filename().string());
}

}  // namespace lead::io
