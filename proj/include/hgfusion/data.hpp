#pragma once

// Dataset handling: a manifest JSON names every subject, its per-event
// feature files and its personality file. Feature files are raw row-major
// little-endian float64 (float32 accepted when the manifest says so and
// widened exactly on load). Padding, binary label collapse and the
// subject-disjoint train/val split live here too.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hgfusion/rng.hpp"
#include "hgfusion/tensor.hpp"

namespace hgf {

struct EventFeatures {
  Tensor visual;  // [T, visual_dim]
  Tensor audio;   // [T, audio_dim]
  int frames() const { return visual.shape()[0]; }
};

struct Sample {
  std::string id;
  int label = 0;
  std::vector<EventFeatures> events;
  Tensor personality;  // [S, personality_dim]

  int max_frames() const {
    int m = 0;
    for (const auto& e : events) m = std::max(m, e.frames());
    return m;
  }
};

// Parameters the synthetic generator plants; carried in the manifest so
// oracles can verify separability without re-deriving anything.
struct PlantedSignal {
  bool present = false;
  std::uint64_t seed = 0;
  double signal_public = 0.0;
  double signal_private = 0.0;
  double noise = 0.0;
  double personality_scale_min = 0.0;
  double personality_scale_max = 0.0;
  std::vector<double> class_coeffs;
  std::vector<double> visual_direction;
  std::vector<double> audio_direction;
};

struct Dataset {
  int events = 0;  // K
  int num_classes = 0;
  int visual_dim = 0;
  int audio_dim = 0;
  int personality_dim = 0;
  std::vector<Sample> samples;
  PlantedSignal planted;

  std::vector<int> class_counts() const {
    std::vector<int> counts(num_classes, 0);
    for (const Sample& s : samples) {
      if (s.label < 0 || s.label >= num_classes) {
        throw std::logic_error("Dataset: label out of range for sample " + s.id);
      }
      ++counts[s.label];
    }
    return counts;
  }
};

namespace detail {

inline void write_f64_file(const std::string& path, const double* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!out.good()) throw std::runtime_error("dataset: short write to " + path);
}

inline std::vector<double> read_feature_file(const std::string& path, std::size_t rows,
                                             std::size_t cols, const std::string& dtype) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  const std::size_t bytes = static_cast<std::size_t>(in.tellg());
  const std::size_t unit = dtype == "f32" ? 4 : 8;
  const std::size_t expect = rows * cols * unit;
  if (bytes != expect) {
    throw std::runtime_error("dataset: " + path + " holds " + std::to_string(bytes) +
                             " bytes, expected " + std::to_string(expect) + " (" +
                             std::to_string(rows) + "x" + std::to_string(cols) + " " + dtype + ")");
  }
  in.seekg(0);
  std::vector<double> out(rows * cols);
  if (dtype == "f32") {
    std::vector<float> tmp(rows * cols);
    in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(bytes));
    for (std::size_t i = 0; i < tmp.size(); ++i) out[i] = static_cast<double>(tmp[i]);
  } else {
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  }
  if (!in.good()) throw std::runtime_error("dataset: short read from " + path);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) {
      throw std::runtime_error("dataset: non-finite value in " + path + " at flat index " +
                               std::to_string(i));
    }
  }
  return out;
}

}  // namespace detail

// Manifest layout (version 1):
// {
//   "version": 1, "events": K, "num_classes": C,
//   "dims": {"visual": V, "audio": A, "personality": P},
//   "samples": [{"id", "label", "personality": {"rows", "path", "dtype"?},
//                "events": [{"rows", "visual_path", "audio_path", "dtype"?}, ...]}],
//   "planted": {...}?   // generator parameters, optional
// }
// Paths are relative to the manifest's directory.
inline void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "data");
  nlohmann::json samples = nlohmann::json::array();
  for (const Sample& s : ds.samples) {
    nlohmann::json events = nlohmann::json::array();
    for (std::size_t k = 0; k < s.events.size(); ++k) {
      const EventFeatures& e = s.events[k];
      const std::string vis = "data/" + s.id + "_e" + std::to_string(k) + "_vis.bin";
      const std::string aud = "data/" + s.id + "_e" + std::to_string(k) + "_aud.bin";
      detail::write_f64_file((fs::path(dir) / vis).string(), e.visual.data(), e.visual.size());
      detail::write_f64_file((fs::path(dir) / aud).string(), e.audio.data(), e.audio.size());
      events.push_back({{"rows", e.frames()}, {"visual_path", vis}, {"audio_path", aud}});
    }
    const std::string per = "data/" + s.id + "_per.bin";
    detail::write_f64_file((fs::path(dir) / per).string(), s.personality.data(),
                           s.personality.size());
    samples.push_back({{"id", s.id},
                       {"label", s.label},
                       {"personality", {{"rows", s.personality.shape()[0]}, {"path", per}}},
                       {"events", events}});
  }
  nlohmann::json manifest = {
      {"version", 1},
      {"events", ds.events},
      {"num_classes", ds.num_classes},
      {"dims",
       {{"visual", ds.visual_dim}, {"audio", ds.audio_dim}, {"personality", ds.personality_dim}}},
      {"samples", samples}};
  if (ds.planted.present) {
    manifest["planted"] = {{"seed", ds.planted.seed},
                           {"signal_public", ds.planted.signal_public},
                           {"signal_private", ds.planted.signal_private},
                           {"noise", ds.planted.noise},
                           {"personality_scale_min", ds.planted.personality_scale_min},
                           {"personality_scale_max", ds.planted.personality_scale_max},
                           {"class_coeffs", ds.planted.class_coeffs},
                           {"visual_direction", ds.planted.visual_direction},
                           {"audio_direction", ds.planted.audio_direction}};
  }
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("dataset: cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("dataset: cannot open " + manifest_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("dataset: " + manifest_path + " is not valid JSON: " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1) {
    throw std::runtime_error("dataset: unsupported manifest version in " + manifest_path);
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  Dataset ds;
  ds.events = j.at("events").get<int>();
  ds.num_classes = j.at("num_classes").get<int>();
  ds.visual_dim = j.at("dims").at("visual").get<int>();
  ds.audio_dim = j.at("dims").at("audio").get<int>();
  ds.personality_dim = j.at("dims").at("personality").get<int>();
  if (ds.events < 1 || ds.num_classes < 2 || ds.visual_dim < 1 || ds.audio_dim < 1 ||
      ds.personality_dim < 1) {
    throw std::runtime_error("dataset: manifest dimensions out of range in " + manifest_path);
  }
  for (const auto& sj : j.at("samples")) {
    Sample s;
    s.id = sj.at("id").get<std::string>();
    s.label = sj.at("label").get<int>();
    if (s.label < 0 || s.label >= ds.num_classes) {
      throw std::runtime_error("dataset: label out of range for sample " + s.id);
    }
    const auto& events = sj.at("events");
    if (static_cast<int>(events.size()) != ds.events) {
      throw std::runtime_error("dataset: sample " + s.id + " has " +
                               std::to_string(events.size()) + " events, manifest says " +
                               std::to_string(ds.events));
    }
    for (const auto& ej : events) {
      const int rows = ej.at("rows").get<int>();
      if (rows < 1) throw std::runtime_error("dataset: sample " + s.id + " has an empty event");
      const std::string dtype = ej.contains("dtype") ? ej["dtype"].get<std::string>() : "f64";
      if (dtype != "f64" && dtype != "f32") {
        throw std::runtime_error("dataset: unknown dtype \"" + dtype + "\" for sample " + s.id);
      }
      EventFeatures e;
      e.visual = Tensor::from_data(
          {rows, ds.visual_dim},
          detail::read_feature_file((base / ej.at("visual_path").get<std::string>()).string(),
                                    rows, ds.visual_dim, dtype));
      e.audio = Tensor::from_data(
          {rows, ds.audio_dim},
          detail::read_feature_file((base / ej.at("audio_path").get<std::string>()).string(), rows,
                                    ds.audio_dim, dtype));
      s.events.push_back(std::move(e));
    }
    const auto& pj = sj.at("personality");
    const int prows = pj.at("rows").get<int>();
    if (prows < 1) throw std::runtime_error("dataset: sample " + s.id + " has no personality rows");
    const std::string pdtype = pj.contains("dtype") ? pj["dtype"].get<std::string>() : "f64";
    s.personality = Tensor::from_data(
        {prows, ds.personality_dim},
        detail::read_feature_file((base / pj.at("path").get<std::string>()).string(), prows,
                                  ds.personality_dim, pdtype));
    ds.samples.push_back(std::move(s));
  }
  if (j.contains("planted")) {
    const auto& g = j["planted"];
    ds.planted.present = true;
    ds.planted.seed = g.at("seed").get<std::uint64_t>();
    ds.planted.signal_public = g.at("signal_public").get<double>();
    ds.planted.signal_private = g.at("signal_private").get<double>();
    ds.planted.noise = g.at("noise").get<double>();
    ds.planted.personality_scale_min = g.at("personality_scale_min").get<double>();
    ds.planted.personality_scale_max = g.at("personality_scale_max").get<double>();
    ds.planted.class_coeffs = g.at("class_coeffs").get<std::vector<double>>();
    ds.planted.visual_direction = g.at("visual_direction").get<std::vector<double>>();
    ds.planted.audio_direction = g.at("audio_direction").get<std::vector<double>>();
  }
  return ds;
}

enum class PaddingMode { Cyclic, RepeatLast };

inline PaddingMode parse_padding(const std::string& name) {
  if (name == "cyclic") return PaddingMode::Cyclic;
  if (name == "repeat_last") return PaddingMode::RepeatLast;
  throw std::invalid_argument("padding: unknown mode \"" + name + "\"");
}

// Pads one [T,D] feature matrix to target_t rows. Cyclic: row t of the
// padded output is row (t mod T) of the original; RepeatLast holds the
// final row. target_t < T is an error (no truncation here).
inline Tensor pad_rows(const Tensor& feat, int target_t, PaddingMode mode) {
  const int t_len = feat.shape()[0], d = feat.shape()[1];
  if (target_t < t_len) {
    throw std::invalid_argument("pad_rows: target " + std::to_string(target_t) +
                                " shorter than input " + std::to_string(t_len));
  }
  if (target_t == t_len) return feat;
  Tensor out = Tensor::zeros({target_t, d});
  for (int t = 0; t < target_t; ++t) {
    const int src = mode == PaddingMode::Cyclic ? t % t_len : std::min(t, t_len - 1);
    std::copy(feat.data() + static_cast<std::size_t>(src) * d,
              feat.data() + static_cast<std::size_t>(src + 1) * d,
              out.data() + static_cast<std::size_t>(t) * d);
  }
  return out;
}

// Pads every event of a sample to a common length. Personality tokens are
// never padded.
inline Sample pad_events(const Sample& s, int target_t, PaddingMode mode) {
  Sample out;
  out.id = s.id;
  out.label = s.label;
  out.personality = s.personality;
  for (const EventFeatures& e : s.events) {
    EventFeatures p;
    p.visual = pad_rows(e.visual, target_t, mode);
    p.audio = pad_rows(e.audio, target_t, mode);
    out.events.push_back(std::move(p));
  }
  return out;
}

// Ternary -> binary collapse: control (0) stays 0, both depressed grades
// {1,2} map to 1.
inline int collapse_label_binary(int label) {
  if (label < 0 || label > 2) {
    throw std::invalid_argument("collapse_label_binary: label " + std::to_string(label) +
                                " outside the ternary range");
  }
  return label == 0 ? 0 : 1;
}

inline Dataset collapse_binary(const Dataset& ds) {
  Dataset out = ds;
  out.num_classes = 2;
  for (Sample& s : out.samples) s.label = collapse_label_binary(s.label);
  return out;
}

// Stratified subject-disjoint split. Per class, a seeded shuffle sends
// round(fraction * n_c) subjects (at least 1, at most n_c - 1) to
// validation. Iteration order is fixed, so the split is reproducible.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double val_fraction,
                                                 std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split_dataset: val_fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> per_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const int label = ds.samples[i].label;
    if (label < 0 || label >= ds.num_classes) {
      throw std::invalid_argument("split_dataset: label out of range for sample " +
                                  ds.samples[i].id);
    }
    per_class[label].push_back(i);
  }
  std::vector<bool> in_val(ds.samples.size(), false);
  Rng rng = Rng::stream(seed, 0x5311755eedULL);
  for (int c = 0; c < ds.num_classes; ++c) {
    auto& idx = per_class[c];
    if (idx.size() < 2) {
      throw std::invalid_argument("split_dataset: class " + std::to_string(c) +
                                  " has fewer than 2 subjects");
    }
    rng.shuffle(idx);
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(idx.size())));
    n_val = std::max<std::size_t>(1, std::min(n_val, idx.size() - 1));
    for (std::size_t k = 0; k < n_val; ++k) in_val[idx[k]] = true;
  }
  Dataset train = ds, val = ds;
  train.samples.clear();
  val.samples.clear();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    (in_val[i] ? val : train).samples.push_back(ds.samples[i]);
  }
  return {train, val};
}

}  // namespace hgf
