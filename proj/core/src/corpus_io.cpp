// SPDX-License-Identifier: Apache-2.0
#include "lead/corpus_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "lead/error.hpp"

namespace lead::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void dump(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

TensorHeader parse_tensor_header(const std::string& bytes, const fs::path& path) {
  if (bytes.size() < kTensorMagic.size() ||
      std::string_view(bytes).substr(0, kTensorMagic.size()) != kTensorMagic)
    fail(ErrorKind::kFormat, path.string() + ": bad magic, not a LEADT tensor file");
  if (bytes.size() < kTensorHeaderBytes)
    fail(ErrorKind::kLength, path.string() + ": truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  TensorHeader h;
  h.version = get_u16(p + 5);
  if (h.version != kTensorVersion)
    fail(ErrorKind::kVersion,
         path.string() + ": unsupported LEADT version " + std::to_string(h.version));
  h.n_samples = get_u32(p + 7);
  h.timesteps = get_u32(p + 11);
  h.channels = get_u32(p + 15);
  return h;
}

}  // namespace

std::string feature_file_name(std::int32_t subject_id) {
  return "feature_" + std::to_string(subject_id) + ".leadt";
}

void write_subject_tensor(std::span<const EpochSample> samples, const fs::path& path,
                          std::pair<std::uint32_t, std::uint32_t> empty_dims) {
  std::uint32_t t = empty_dims.first;
  std::uint32_t c = empty_dims.second;
  if (!samples.empty()) {
    t = static_cast<std::uint32_t>(samples.front().timesteps());
    c = static_cast<std::uint32_t>(samples.front().channels());
    const auto sid = samples.front().subject_id;
    for (const auto& s : samples) {
      if (s.timesteps() != t || s.channels() != c)
        fail(ErrorKind::kDimensionMismatch,
             "mixed sample dimensions for " + path.string());
      if (s.subject_id != sid)
        fail(ErrorKind::kDimensionMismatch,
             "samples from more than one subject in " + path.string());
      if (!s.data.allFinite())
        fail(ErrorKind::kData, "non-finite value in sample for " + path.string());
    }
  }

  std::string out;
  const std::size_t count = samples.size() * t * c;
  out.reserve(kTensorHeaderBytes + 4 * count);
  out.append(kTensorMagic);
  put_u16(out, kTensorVersion);
  put_u32(out, static_cast<std::uint32_t>(samples.size()));
  put_u32(out, t);
  put_u32(out, c);
  for (const auto& s : samples) {
    const float* data = s.data.data();  // row-major: time-major, then channel
    for (Eigen::Index i = 0; i < s.data.size(); ++i)
      put_u32(out, std::bit_cast<std::uint32_t>(data[i]));
  }
  dump(path, out);
}

TensorHeader read_tensor_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::string head(kTensorHeaderBytes, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  return parse_tensor_header(head, path);
}

SampleList read_subject_tensor(const fs::path& path, const SampleTag& tag) {
  const std::string bytes = slurp(path);
  const TensorHeader h = parse_tensor_header(bytes, path);
  const std::uint64_t per_sample = std::uint64_t{h.timesteps} * h.channels;
  const std::uint64_t expected = kTensorHeaderBytes + 4 * per_sample * h.n_samples;
  if (bytes.size() != expected)
    fail(ErrorKind::kLength, path.string() + ": payload is " +
                                 std::to_string(bytes.size() - kTensorHeaderBytes) +
                                 " bytes, header declares " +
                                 std::to_string(expected - kTensorHeaderBytes));

  SampleList out;
  out.reserve(h.n_samples);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + kTensorHeaderBytes;
  for (std::uint32_t n = 0; n < h.n_samples; ++n) {
    EpochSample s;
    s.data.resize(h.timesteps, h.channels);
    float* dst = s.data.data();
    for (std::uint64_t i = 0; i < per_sample; ++i, p += 4) {
      dst[i] = std::bit_cast<float>(get_u32(p));
      if (!std::isfinite(dst[i]))
        fail(ErrorKind::kData, path.string() + ": non-finite value in payload");
    }
    s.subject_id = tag.subject_id;
    s.label = tag.label;
    s.dataset_id = tag.dataset_id;
    out.push_back(std::move(s));
  }
  return out;
}

// --- labels ---------------------------------------------------------------

void LabelTable::validate(std::span<const std::int32_t> classes) const {
  std::vector<std::int32_t> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) {
    ids.push_back(r.subject_id);
    if (!classes.empty() &&
        std::find(classes.begin(), classes.end(), r.label) == classes.end())
      fail(ErrorKind::kData, "subject " + std::to_string(r.subject_id) +
                                 " has undeclared label " + std::to_string(r.label));
  }
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != static_cast<std::int32_t>(i + 1))
      fail(ErrorKind::kData,
           "subject IDs must be unique and contiguous from 1; found " +
               std::to_string(ids[i]) + " at rank " + std::to_string(i + 1));
  }
}

std::optional<std::int32_t> LabelTable::label_of(std::int32_t subject_id) const {
  for (const auto& r : rows)
    if (r.subject_id == subject_id) return r.label;
  return std::nullopt;
}

void write_label_table(const LabelTable& table, const fs::path& path) {
  std::string out;
  out.append(kLabelMagic);
  put_u16(out, kLabelVersion);
  put_u32(out, static_cast<std::uint32_t>(table.rows.size()));
  for (const auto& r : table.rows) {
    put_u32(out, static_cast<std::uint32_t>(r.label));
    put_u32(out, static_cast<std::uint32_t>(r.subject_id));
  }
  dump(path, out);
}

LabelTable read_label_table(const fs::path& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() < kLabelMagic.size() ||
      std::string_view(bytes).substr(0, kLabelMagic.size()) != kLabelMagic)
    fail(ErrorKind::kFormat, path.string() + ": bad magic, not a LEADL label file");
  if (bytes.size() < 11) fail(ErrorKind::kLength, path.string() + ": truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint16_t version = get_u16(p + 5);
  if (version != kLabelVersion)
    fail(ErrorKind::kVersion,
         path.string() + ": unsupported LEADL version " + std::to_string(version));
  const std::uint32_t n = get_u32(p + 7);
  if (bytes.size() != 11 + std::uint64_t{n} * 8)
    fail(ErrorKind::kLength, path.string() + ": row count does not match payload");
  LabelTable t;
  t.rows.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    t.rows[i].label = static_cast<std::int32_t>(get_u32(p + 11 + 8 * i));
    t.rows[i].subject_id = static_cast<std::int32_t>(get_u32(p + 15 + 8 * i));
  }
  return t;
}

// --- manifest -------------------------------------------------------------

void write_manifest(const CorpusManifest& m, const fs::path& path) {
  json j;
  j["format"] = "lead-corpus";
  j["version"] = 1;
  j["dataset_id"] = m.dataset_id;
  j["sampling_rate"] = m.sampling_rate;
  j["n_channels"] = m.n_channels;
  j["n_timesteps"] = m.n_timesteps;
  json classes = json::object();
  for (const auto& [k, v] : m.class_names) classes[std::to_string(k)] = v;
  j["class_names"] = classes;
  json subjects = json::array();
  for (const auto& s : m.subjects)
    subjects.push_back({{"subject_id", s.subject_id}, {"file", s.file}, {"n_samples", s.n_samples}});
  j["subjects"] = subjects;
  j["provenance"] = m.provenance;
  dump(path, j.dump(2) + "\n");
}

CorpusManifest read_manifest(const fs::path& path) {
  CorpusManifest m;
  try {
    const json j = json::parse(slurp(path));
    if (j.value("format", std::string{}) != "lead-corpus")
      fail(ErrorKind::kFormat, path.string() + ": not a lead corpus manifest");
    if (j.at("version").get<int>() != 1)
      fail(ErrorKind::kVersion, path.string() + ": unsupported manifest version");
    m.dataset_id = j.at("dataset_id").get<std::string>();
    m.sampling_rate = j.at("sampling_rate").get<double>();
    m.n_channels = j.at("n_channels").get<std::uint32_t>();
    m.n_timesteps = j.at("n_timesteps").get<std::uint32_t>();
    for (const auto& [k, v] : j.at("class_names").items())
      m.class_names[std::stoi(k)] = v.get<std::string>();
    for (const auto& s : j.at("subjects"))
      m.subjects.push_back({s.at("subject_id").get<std::int32_t>(),
                            s.at("file").get<std::string>(),
                            s.at("n_samples").get<std::uint32_t>()});
    m.provenance = j.value("provenance", std::string{});
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return m;
}

// --- corpus ---------------------------------------------------------------

std::vector<std::int32_t> Corpus::class_set() const {
  std::vector<std::int32_t> out;
  for (const auto& [k, v] : manifest.class_names) out.push_back(k);
  return out;
}

Corpus assemble_corpus(std::string dataset_id, LabelTable labels, SampleList samples,
                       std::map<std::int32_t, std::string> class_names,
                       std::string provenance) {
  Corpus c;
  std::sort(labels.rows.begin(), labels.rows.end(),
            [](const LabelRow& a, const LabelRow& b) { return a.subject_id < b.subject_id; });
  std::stable_sort(samples.begin(), samples.end(),
                   [](const EpochSample& a, const EpochSample& b) {
                     return a.subject_id < b.subject_id;
                   });
  c.manifest.dataset_id = std::move(dataset_id);
  c.manifest.class_names = std::move(class_names);
  c.manifest.provenance = std::move(provenance);
  if (!samples.empty()) {
    c.manifest.n_timesteps = static_cast<std::uint32_t>(samples.front().timesteps());
    c.manifest.n_channels = static_cast<std::uint32_t>(samples.front().channels());
  }
  for (auto& s : samples) {
    s.dataset_id = c.manifest.dataset_id;
    const auto label = labels.label_of(s.subject_id);
    if (!label)
      fail(ErrorKind::kData, "sample for unlabelled subject " + std::to_string(s.subject_id));
    s.label = *label;
  }
  for (const auto& r : labels.rows) {
    const auto n = std::count_if(samples.begin(), samples.end(), [&](const EpochSample& s) {
      return s.subject_id == r.subject_id;
    });
    c.manifest.subjects.push_back({r.subject_id, "Feature/" + feature_file_name(r.subject_id),
                                   static_cast<std::uint32_t>(n)});
  }
  c.labels = std::move(labels);
  c.samples = std::move(samples);
  return c;
}

void write_corpus(const Corpus& corpus, const fs::path& root) {
  fs::create_directories(root / "Feature");
  fs::create_directories(root / "Label");
  auto it = corpus.samples.begin();
  const std::pair dims{corpus.manifest.n_timesteps, corpus.manifest.n_channels};
  for (const auto& entry : corpus.manifest.subjects) {
    auto end = std::find_if(it, corpus.samples.end(), [&](const EpochSample& s) {
      return s.subject_id != entry.subject_id;
    });
    write_subject_tensor(std::span<const EpochSample>(&*it, static_cast<std::size_t>(end - it)),
                         root / entry.file, dims);
    it = end;
  }
  if (it != corpus.samples.end())
    fail(ErrorKind::kData, "corpus samples are not grouped by manifest subject order");
  write_label_table(corpus.labels, root / "Label" / "label.leadl");
  write_manifest(corpus.manifest, root / "manifest.json");
}

Corpus load_corpus(const fs::path& root) {
  Corpus c;
  c.manifest = read_manifest(root / "manifest.json");
  if (c.manifest.sampling_rate != kTargetRate)
    fail(ErrorKind::kData, (root / "manifest.json").string() +
                               ": sampling_rate must be 128 Hz after preprocessing");
  c.labels = read_label_table(root / "Label" / "label.leadl");
  const auto classes = c.class_set();
  c.labels.validate(classes);

  std::set<std::int32_t> listed;
  for (const auto& e : c.manifest.subjects) {
    if (!listed.insert(e.subject_id).second)
      fail(ErrorKind::kData, "subject " + std::to_string(e.subject_id) +
                                 " listed twice in " + (root / "manifest.json").string());
  }
  for (const auto& r : c.labels.rows) {
    if (!listed.count(r.subject_id))
      fail(ErrorKind::kData,
           "subject " + std::to_string(r.subject_id) + " has no tensor file in manifest");
  }
  if (listed.size() != c.labels.size())
    fail(ErrorKind::kData, "manifest lists subjects missing from the label table");

  auto entries = c.manifest.subjects;
  std::sort(entries.begin(), entries.end(),
            [](const SubjectEntry& a, const SubjectEntry& b) { return a.subject_id < b.subject_id; });
  for (const auto& e : entries) {
    const fs::path file = root / e.file;
    const TensorHeader h = read_tensor_header(file);
    if (h.timesteps != c.manifest.n_timesteps || h.channels != c.manifest.n_channels)
      fail(ErrorKind::kDimensionMismatch,
           file.string() + ": dims (" + std::to_string(h.timesteps) + "," +
               std::to_string(h.channels) + ") differ from manifest");
    if (h.n_samples != e.n_samples)
      fail(ErrorKind::kData, file.string() + ": sample count differs from manifest");
    auto samples = read_subject_tensor(
        file, {e.subject_id, *c.labels.label_of(e.subject_id), c.manifest.dataset_id});
    std::move(samples.begin(), samples.end(), std::back_inserter(c.samples));
  }
  return c;
}

}  // namespace lead::io
