#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "hgfusion/data.hpp"
#include "hgfusion/synthetic.hpp"

namespace fs = std::filesystem;
using namespace hgf;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("hgf_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SyntheticSpec micro_spec() {
  SyntheticSpec spec;
  spec.subjects = 24;
  spec.events = 2;
  spec.t_min = 6;
  spec.t_max = 10;
  spec.visual_dim = 24;
  spec.audio_dim = 16;
  spec.personality_dim = 12;
  spec.personality_tokens = 3;
  spec.seed = 7;
  return spec;
}

bool tensors_bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool datasets_bitwise_equal(const Dataset& a, const Dataset& b) {
  if (a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const Sample& x = a.samples[i];
    const Sample& y = b.samples[i];
    if (x.id != y.id || x.label != y.label) return false;
    if (x.events.size() != y.events.size()) return false;
    if (!tensors_bitwise_equal(x.personality, y.personality)) return false;
    for (std::size_t k = 0; k < x.events.size(); ++k) {
      if (!tensors_bitwise_equal(x.events[k].visual, y.events[k].visual)) return false;
      if (!tensors_bitwise_equal(x.events[k].audio, y.events[k].audio)) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("cyclic padding wraps row indices modulo the original length", "[data]") {
  Tensor feat = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor padded = pad_rows(feat, 5, PaddingMode::Cyclic);
  REQUIRE(padded.shape() == Shape{5, 2});
  // Rows: x1 x2 x3 x1 x2.
  const std::vector<double> want = {1, 2, 3, 4, 5, 6, 1, 2, 3, 4};
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(padded.data()[i] == want[i]);
  // Index oracle for a longer target.
  Tensor far = pad_rows(feat, 11, PaddingMode::Cyclic);
  for (int t = 0; t < 11; ++t) {
    for (int d = 0; d < 2; ++d) CHECK(far.at(t, d) == feat.at(t % 3, d));
  }
}

TEST_CASE("repeat-last padding holds the final row", "[data]") {
  Tensor feat = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor padded = pad_rows(feat, 5, PaddingMode::RepeatLast);
  const std::vector<double> want = {1, 2, 3, 4, 5, 6, 5, 6, 5, 6};
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(padded.data()[i] == want[i]);
}

TEST_CASE("padding to the current length is the identity and shrinking throws", "[data]") {
  Tensor feat = Tensor::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor same = pad_rows(feat, 3, PaddingMode::Cyclic);
  CHECK(tensors_bitwise_equal(feat, same));
  CHECK_THROWS_AS(pad_rows(feat, 2, PaddingMode::Cyclic), std::invalid_argument);
  CHECK_THROWS_AS(parse_padding("mirror"), std::invalid_argument);
  CHECK(parse_padding("cyclic") == PaddingMode::Cyclic);
  CHECK(parse_padding("repeat_last") == PaddingMode::RepeatLast);
}

TEST_CASE("event padding reaches every event but never the personality tokens", "[data]") {
  Sample s;
  s.id = "a";
  s.label = 1;
  EventFeatures e1;
  e1.visual = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  e1.audio = Tensor::from_data({2, 1}, {9, 8});
  EventFeatures e2;
  e2.visual = Tensor::from_data({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  e2.audio = Tensor::from_data({4, 1}, {1, 2, 3, 4});
  s.events = {e1, e2};
  s.personality = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});

  Sample padded = pad_events(s, 4, PaddingMode::Cyclic);
  REQUIRE(padded.events.size() == 2);
  CHECK(padded.events[0].visual.shape() == Shape{4, 2});
  CHECK(padded.events[0].audio.shape() == Shape{4, 1});
  CHECK(padded.events[0].visual.at(2, 0) == 1.0);  // wrapped
  CHECK(padded.events[1].visual.shape() == Shape{4, 2});
  CHECK(tensors_bitwise_equal(padded.personality, s.personality));
  CHECK(padded.id == "a");
  CHECK(padded.label == 1);
}

TEST_CASE("binary collapse keeps controls and merges both depressed grades", "[data]") {
  CHECK(collapse_label_binary(0) == 0);
  CHECK(collapse_label_binary(1) == 1);
  CHECK(collapse_label_binary(2) == 1);
  CHECK_THROWS_AS(collapse_label_binary(3), std::invalid_argument);
  CHECK_THROWS_AS(collapse_label_binary(-1), std::invalid_argument);

  SyntheticSpec spec = micro_spec();
  Dataset ds = generate_synthetic(spec);
  const std::vector<int> before = ds.class_counts();
  Dataset bin = collapse_binary(ds);
  CHECK(bin.num_classes == 2);
  const std::vector<int> after = bin.class_counts();
  REQUIRE(after.size() == 2);
  CHECK(after[0] == before[0]);
  CHECK(after[1] == before[1] + before[2]);
  // Everything else untouched.
  CHECK(datasets_bitwise_equal(ds, Dataset{bin.events, 3, bin.visual_dim, bin.audio_dim,
                                           bin.personality_dim, ds.samples, bin.planted}));
}

TEST_CASE("stratified split is subject-disjoint with both classes on both sides", "[data]") {
  SyntheticSpec spec = micro_spec();
  Dataset ds = generate_synthetic(spec);
  auto [train, val] = split_dataset(ds, 0.2, 11);
  CHECK(train.samples.size() + val.samples.size() == ds.samples.size());

  std::set<std::string> train_ids, val_ids;
  for (const Sample& s : train.samples) train_ids.insert(s.id);
  for (const Sample& s : val.samples) val_ids.insert(s.id);
  CHECK(train_ids.size() == train.samples.size());
  CHECK(val_ids.size() == val.samples.size());
  for (const std::string& id : val_ids) CHECK(train_ids.count(id) == 0);

  const std::vector<int> tc = train.class_counts();
  const std::vector<int> vc = val.class_counts();
  for (int c = 0; c < ds.num_classes; ++c) {
    CHECK(tc[c] >= 1);
    CHECK(vc[c] >= 1);
    // round(0.2 * 8) = 2 per class.
    CHECK(vc[c] == 2);
  }

  // Same seed reproduces the split exactly; order within splits is stable.
  auto [train2, val2] = split_dataset(ds, 0.2, 11);
  CHECK(datasets_bitwise_equal(train, train2));
  CHECK(datasets_bitwise_equal(val, val2));

  CHECK_THROWS_AS(split_dataset(ds, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(ds, 1.0, 1), std::invalid_argument);

  Dataset tiny = ds;
  tiny.samples.resize(4);  // labels 0,1,2,0 -> classes 1 and 2 have one subject
  CHECK_THROWS_AS(split_dataset(tiny, 0.2, 1), std::invalid_argument);
}

TEST_CASE("generation is deterministic in the seed", "[data][synthetic]") {
  SyntheticSpec spec = micro_spec();
  Dataset a = generate_synthetic(spec);
  Dataset b = generate_synthetic(spec);
  CHECK(datasets_bitwise_equal(a, b));
  CHECK(a.planted.present);
  CHECK(a.planted.visual_direction == b.planted.visual_direction);

  spec.seed = 8;
  Dataset c = generate_synthetic(spec);
  CHECK_FALSE(tensors_bitwise_equal(a.samples[0].events[0].visual,
                                    c.samples[0].events[0].visual));
}

TEST_CASE("generated shapes, labels and lengths honour the request", "[data][synthetic]") {
  SyntheticSpec spec = micro_spec();
  Dataset ds = generate_synthetic(spec);
  REQUIRE(static_cast<int>(ds.samples.size()) == spec.subjects);
  CHECK(ds.events == spec.events);
  CHECK(ds.num_classes == 3);
  const std::vector<int> counts = ds.class_counts();
  CHECK(counts == std::vector<int>{8, 8, 8});  // round-robin labels
  for (const Sample& s : ds.samples) {
    REQUIRE(static_cast<int>(s.events.size()) == spec.events);
    for (const EventFeatures& e : s.events) {
      CHECK(e.frames() >= spec.t_min);
      CHECK(e.frames() <= spec.t_max);
      CHECK(e.visual.shape()[1] == spec.visual_dim);
      CHECK(e.audio.shape()[1] == spec.audio_dim);
      CHECK(e.visual.shape()[0] == e.audio.shape()[0]);
    }
    CHECK(s.personality.shape() == Shape{spec.personality_tokens, spec.personality_dim});
  }
  CHECK(ds.planted.class_coeffs == std::vector<double>{-1.0, 0.0, 1.0});
}

TEST_CASE("generator validation rejects malformed requests", "[data][synthetic]") {
  SyntheticSpec spec = micro_spec();
  spec.subjects = 5;  // < 2 per class
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = micro_spec();
  spec.t_min = 11;  // > t_max
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = micro_spec();
  spec.personality_scale_min = 0.0;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = micro_spec();
  spec.num_classes = 4;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
  spec = micro_spec();
  spec.noise = -0.1;
  CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("save and load round-trip the dataset exactly", "[data][io]") {
  SyntheticSpec spec = micro_spec();
  Dataset ds = generate_synthetic(spec);
  const fs::path dir = fresh_dir("roundtrip");
  save_dataset(ds, dir.string());
  Dataset loaded = load_dataset((dir / "manifest.json").string());

  CHECK(loaded.events == ds.events);
  CHECK(loaded.num_classes == ds.num_classes);
  CHECK(loaded.visual_dim == ds.visual_dim);
  CHECK(loaded.audio_dim == ds.audio_dim);
  CHECK(loaded.personality_dim == ds.personality_dim);
  CHECK(datasets_bitwise_equal(ds, loaded));
  CHECK(loaded.planted.present);
  CHECK(loaded.planted.seed == ds.planted.seed);
  CHECK(loaded.planted.visual_direction == ds.planted.visual_direction);
  CHECK(loaded.planted.audio_direction == ds.planted.audio_direction);
  CHECK(loaded.planted.class_coeffs == ds.planted.class_coeffs);
  fs::remove_all(dir);
}

TEST_CASE("loading a truncated feature file reports the path and byte counts", "[data][io]") {
  SyntheticSpec spec = micro_spec();
  spec.subjects = 6;
  Dataset ds = generate_synthetic(spec);
  const fs::path dir = fresh_dir("truncated");
  save_dataset(ds, dir.string());
  const fs::path victim = dir / "data" / "subj002_e1_aud.bin";
  REQUIRE(fs::exists(victim));
  fs::resize_file(victim, fs::file_size(victim) - 8);
  try {
    load_dataset((dir / "manifest.json").string());
    FAIL("expected a load error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("subj002_e1_aud.bin") != std::string::npos);
    CHECK(msg.find("expected") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("float32 feature files widen exactly on load", "[data][io]") {
  const fs::path dir = fresh_dir("f32");
  fs::create_directories(dir / "data");
  const std::vector<float> vis = {1.5f, -2.25f, 0.125f, 3.0f, -0.5f, 7.75f};   // 2x3
  const std::vector<float> aud = {0.25f, 8.0f, -1.0f, 2.5f};                   // 2x2
  const std::vector<float> per = {0.5f, 1.25f};                                // 1x2
  auto dump = [&](const std::string& name, const std::vector<float>& v) {
    std::ofstream out(dir / "data" / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  };
  dump("vis.bin", vis);
  dump("aud.bin", aud);
  dump("per.bin", per);
  nlohmann::json manifest = {
      {"version", 1},
      {"events", 1},
      {"num_classes", 2},
      {"dims", {{"visual", 3}, {"audio", 2}, {"personality", 2}}},
      {"samples",
       {{{"id", "s0"},
         {"label", 1},
         {"personality", {{"rows", 1}, {"path", "data/per.bin"}, {"dtype", "f32"}}},
         {"events",
          {{{"rows", 2},
            {"visual_path", "data/vis.bin"},
            {"audio_path", "data/aud.bin"},
            {"dtype", "f32"}}}}}}}};
  {
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
  Dataset ds = load_dataset((dir / "manifest.json").string());
  REQUIRE(ds.samples.size() == 1);
  const Sample& s = ds.samples[0];
  for (std::size_t i = 0; i < vis.size(); ++i) {
    CHECK(s.events[0].visual.data()[i] == static_cast<double>(vis[i]));
  }
  for (std::size_t i = 0; i < aud.size(); ++i) {
    CHECK(s.events[0].audio.data()[i] == static_cast<double>(aud[i]));
  }
  for (std::size_t i = 0; i < per.size(); ++i) {
    CHECK(s.personality.data()[i] == static_cast<double>(per[i]));
  }
  fs::remove_all(dir);
}

TEST_CASE("loader rejects non-finite values, bad versions and bad labels", "[data][io]") {
  SyntheticSpec spec = micro_spec();
  spec.subjects = 6;
  Dataset ds = generate_synthetic(spec);
  const fs::path dir = fresh_dir("reject");
  save_dataset(ds, dir.string());

  SECTION("NaN in a feature file") {
    const fs::path victim = dir / "data" / "subj000_e0_vis.bin";
    std::fstream f(victim, std::ios::binary | std::ios::in | std::ios::out);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    f.seekp(3 * sizeof(double));
    f.write(reinterpret_cast<const char*>(&nan), sizeof(double));
    f.close();
    try {
      load_dataset((dir / "manifest.json").string());
      FAIL("expected a load error");
    } catch (const std::runtime_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("subj000_e0_vis.bin") != std::string::npos);
      CHECK(msg.find("index 3") != std::string::npos);
    }
  }

  SECTION("unsupported manifest version") {
    nlohmann::json j;
    {
      std::ifstream in(dir / "manifest.json");
      in >> j;
    }
    j["version"] = 2;
    {
      std::ofstream out(dir / "manifest.json");
      out << j.dump(2) << "\n";
    }
    CHECK_THROWS_AS(load_dataset((dir / "manifest.json").string()), std::runtime_error);
  }

  SECTION("label outside the class range") {
    nlohmann::json j;
    {
      std::ifstream in(dir / "manifest.json");
      in >> j;
    }
    j["samples"][0]["label"] = 3;
    {
      std::ofstream out(dir / "manifest.json");
      out << j.dump(2) << "\n";
    }
    CHECK_THROWS_AS(load_dataset((dir / "manifest.json").string()), std::runtime_error);
  }

  SECTION("event count disagreeing with the header") {
    nlohmann::json j;
    {
      std::ifstream in(dir / "manifest.json");
      in >> j;
    }
    j["events"] = 3;
    {
      std::ofstream out(dir / "manifest.json");
      out << j.dump(2) << "\n";
    }
    CHECK_THROWS_AS(load_dataset((dir / "manifest.json").string()), std::runtime_error);
  }

  SECTION("manifest that is not JSON at all") {
    {
      std::ofstream out(dir / "manifest.json");
      out << "not json\n";
    }
    CHECK_THROWS_AS(load_dataset((dir / "manifest.json").string()), std::runtime_error);
  }
  fs::remove_all(dir);
}

TEST_CASE("planted class signal is recoverable by a simple projection model", "[data][synthetic]") {
  SyntheticSpec spec = micro_spec();
  spec.subjects = 60;
  Dataset ds = generate_synthetic(spec);
  const double acc = planted_signal_accuracy(ds);
  CHECK(acc >= 0.90);

  // Removing the public signal collapses the same oracle toward chance.
  SyntheticSpec null_spec = spec;
  null_spec.signal_public = 0.0;
  Dataset null_ds = generate_synthetic(null_spec);
  const double null_acc = planted_signal_accuracy(null_ds);
  CHECK(null_acc < 0.75);
  CHECK(acc > null_acc + 0.2);
}

TEST_CASE("planted-signal oracle needs the planted parameters", "[data][synthetic]") {
  SyntheticSpec spec = micro_spec();
  Dataset ds = generate_synthetic(spec);
  ds.planted.present = false;
  CHECK_THROWS_AS(planted_signal_accuracy(ds), std::invalid_argument);
  ds = generate_synthetic(spec);
  ds.planted.visual_direction.pop_back();
  CHECK_THROWS_AS(planted_signal_accuracy(ds), std::invalid_argument);
}
