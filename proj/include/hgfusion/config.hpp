#pragma once

// Run configuration: one flat JSON object, unknown keys rejected, every
// constraint checked up front so failures happen before any training work.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace hgf {

struct ModelConfig {
  // Architecture widths.
  int d1 = 128;              // gated encoder output width (even: split across LSTM directions)
  int d2 = 64;               // hypergraph/attention width (even, divisible by heads)
  int d3 = 32;               // disentangled representation width
  int visual_dim = 2048;
  int audio_dim = 1024;
  int personality_dim = 768;

  // Fusion block.
  int window = 11;           // sliding hyperedge window; clamped to T per sample
  int heads = 4;
  int conv_layers = 2;
  std::string conv_activation = "relu";  // relu | tanh | identity
  bool attention_per_head_scale = false; // false: scores scaled by 1/sqrt(d2)
  bool attention_layer_norm = false;     // accepted only as false

  // Task shape.
  int events = 3;            // K
  int num_classes = 3;

  // Loss mixture; must sum to 1.
  double alpha = 0.8;
  double beta = 0.1;
  double gamma = 0.1;

  // Encoders.
  int lstm_layers = 1;
  int encoder_depth = 1;     // affine+ReLU layers in each domain encoder
  std::string personality_pooling = "final";  // final | mean

  // Optimization.
  double lr_main_hi = 1e-4;
  double lr_main_lo = 1e-5;
  std::optional<double> lr_disc_hi;  // mirrors main when absent
  std::optional<double> lr_disc_lo;
  double weight_decay = 5e-4;
  double grad_clip_norm = 5.0;       // <= 0 disables clipping
  std::string optimizer = "adam";    // adam | sgd
  int batch_size = 20;
  int max_epochs = 300;
  int patience = 20;                 // epochs without val improvement before stopping
  double val_fraction = 0.2;
  std::string padding = "cyclic";    // cyclic | repeat_last
  std::uint64_t seed = 1;

  double lr_disc_hi_eff() const { return lr_disc_hi.value_or(lr_main_hi); }
  double lr_disc_lo_eff() const { return lr_disc_lo.value_or(lr_main_lo); }

  void validate() const {
    auto positive = [](int v, const char* key) {
      if (v <= 0) throw std::invalid_argument(std::string("config: ") + key + " must be positive");
    };
    positive(d1, "d1");
    positive(d2, "d2");
    positive(d3, "d3");
    positive(visual_dim, "visual_dim");
    positive(audio_dim, "audio_dim");
    positive(personality_dim, "personality_dim");
    positive(window, "window");
    positive(heads, "heads");
    positive(conv_layers, "conv_layers");
    positive(events, "events");
    positive(lstm_layers, "lstm_layers");
    positive(encoder_depth, "encoder_depth");
    positive(batch_size, "batch_size");
    positive(max_epochs, "max_epochs");
    if (patience < 0) throw std::invalid_argument("config: patience must be >= 0");
    if (d1 % 2 != 0) throw std::invalid_argument("config: d1 must be even");
    if (d2 % 2 != 0) throw std::invalid_argument("config: d2 must be even");
    if (d2 % heads != 0) throw std::invalid_argument("config: d2 must be divisible by heads");
    if (num_classes != 2 && num_classes != 3) {
      throw std::invalid_argument("config: num_classes must be 2 or 3");
    }
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
      throw std::invalid_argument("config: loss weights must be non-negative");
    }
    if (std::fabs(alpha + beta + gamma - 1.0) > 1e-12) {
      throw std::invalid_argument("config: alpha + beta + gamma must equal 1, got " +
                                  std::to_string(alpha + beta + gamma));
    }
    auto positive_lr = [](double v, const char* key) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("config: ") + key + " must be a positive number");
      }
    };
    positive_lr(lr_main_hi, "lr_main_hi");
    positive_lr(lr_main_lo, "lr_main_lo");
    if (lr_disc_hi) positive_lr(*lr_disc_hi, "lr_disc_hi");
    if (lr_disc_lo) positive_lr(*lr_disc_lo, "lr_disc_lo");
    if (lr_main_lo > lr_main_hi) {
      throw std::invalid_argument("config: lr_main_lo must not exceed lr_main_hi");
    }
    if (lr_disc_lo_eff() > lr_disc_hi_eff()) {
      throw std::invalid_argument("config: lr_disc_lo must not exceed lr_disc_hi");
    }
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
      throw std::invalid_argument("config: val_fraction must lie in (0, 1)");
    }
    if (conv_activation != "relu" && conv_activation != "tanh" && conv_activation != "identity") {
      throw std::invalid_argument("config: conv_activation must be relu, tanh or identity");
    }
    if (personality_pooling != "final" && personality_pooling != "mean") {
      throw std::invalid_argument("config: personality_pooling must be final or mean");
    }
    if (optimizer != "adam" && optimizer != "sgd") {
      throw std::invalid_argument("config: optimizer must be adam or sgd");
    }
    if (padding != "cyclic" && padding != "repeat_last") {
      throw std::invalid_argument("config: padding must be cyclic or repeat_last");
    }
    if (attention_layer_norm) {
      throw std::invalid_argument(
          "config: attention_layer_norm=true is not implemented; the op set has no "
          "row-normalization primitive. Set it to false.");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j{
        {"d1", d1},
        {"d2", d2},
        {"d3", d3},
        {"visual_dim", visual_dim},
        {"audio_dim", audio_dim},
        {"personality_dim", personality_dim},
        {"window", window},
        {"heads", heads},
        {"conv_layers", conv_layers},
        {"conv_activation", conv_activation},
        {"attention_per_head_scale", attention_per_head_scale},
        {"attention_layer_norm", attention_layer_norm},
        {"events", events},
        {"num_classes", num_classes},
        {"alpha", alpha},
        {"beta", beta},
        {"gamma", gamma},
        {"lstm_layers", lstm_layers},
        {"encoder_depth", encoder_depth},
        {"personality_pooling", personality_pooling},
        {"lr_main_hi", lr_main_hi},
        {"lr_main_lo", lr_main_lo},
        {"weight_decay", weight_decay},
        {"grad_clip_norm", grad_clip_norm},
        {"optimizer", optimizer},
        {"batch_size", batch_size},
        {"max_epochs", max_epochs},
        {"patience", patience},
        {"val_fraction", val_fraction},
        {"padding", padding},
        {"seed", seed},
    };
    if (lr_disc_hi) j["lr_disc_hi"] = *lr_disc_hi;
    if (lr_disc_lo) j["lr_disc_lo"] = *lr_disc_lo;
    return j;
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
    static const std::set<std::string> known = {
        "d1", "d2", "d3", "visual_dim", "audio_dim", "personality_dim",
        "window", "heads", "conv_layers", "conv_activation", "attention_per_head_scale",
        "attention_layer_norm", "events", "num_classes", "alpha", "beta", "gamma",
        "lstm_layers", "encoder_depth", "personality_pooling",
        "lr_main_hi", "lr_main_lo", "lr_disc_hi", "lr_disc_lo",
        "weight_decay", "grad_clip_norm", "optimizer", "batch_size", "max_epochs",
        "patience", "val_fraction", "padding", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!known.count(it.key())) {
        throw std::invalid_argument("config: unknown key \"" + it.key() + "\"");
      }
    }
    ModelConfig c;
    auto get_int = [&](const char* key, int& out) {
      if (!j.contains(key)) return;
      if (!j[key].is_number_integer()) {
        throw std::invalid_argument(std::string("config: ") + key + " must be an integer");
      }
      out = j[key].get<int>();
    };
    auto get_num = [&](const char* key, double& out) {
      if (!j.contains(key)) return;
      if (!j[key].is_number()) {
        throw std::invalid_argument(std::string("config: ") + key + " must be a number");
      }
      out = j[key].get<double>();
    };
    auto get_str = [&](const char* key, std::string& out) {
      if (!j.contains(key)) return;
      if (!j[key].is_string()) {
        throw std::invalid_argument(std::string("config: ") + key + " must be a string");
      }
      out = j[key].get<std::string>();
    };
    auto get_bool = [&](const char* key, bool& out) {
      if (!j.contains(key)) return;
      if (!j[key].is_boolean()) {
        throw std::invalid_argument(std::string("config: ") + key + " must be a boolean");
      }
      out = j[key].get<bool>();
    };
    get_int("d1", c.d1);
    get_int("d2", c.d2);
    get_int("d3", c.d3);
    get_int("visual_dim", c.visual_dim);
    get_int("audio_dim", c.audio_dim);
    get_int("personality_dim", c.personality_dim);
    get_int("window", c.window);
    get_int("heads", c.heads);
    get_int("conv_layers", c.conv_layers);
    get_str("conv_activation", c.conv_activation);
    get_bool("attention_per_head_scale", c.attention_per_head_scale);
    get_bool("attention_layer_norm", c.attention_layer_norm);
    get_int("events", c.events);
    get_int("num_classes", c.num_classes);
    get_num("alpha", c.alpha);
    get_num("beta", c.beta);
    get_num("gamma", c.gamma);
    get_int("lstm_layers", c.lstm_layers);
    get_int("encoder_depth", c.encoder_depth);
    get_str("personality_pooling", c.personality_pooling);
    get_num("lr_main_hi", c.lr_main_hi);
    get_num("lr_main_lo", c.lr_main_lo);
    if (j.contains("lr_disc_hi")) {
      double v = 0;
      get_num("lr_disc_hi", v);
      c.lr_disc_hi = v;
    }
    if (j.contains("lr_disc_lo")) {
      double v = 0;
      get_num("lr_disc_lo", v);
      c.lr_disc_lo = v;
    }
    get_num("weight_decay", c.weight_decay);
    get_num("grad_clip_norm", c.grad_clip_norm);
    get_str("optimizer", c.optimizer);
    get_int("batch_size", c.batch_size);
    get_int("max_epochs", c.max_epochs);
    get_int("patience", c.patience);
    get_num("val_fraction", c.val_fraction);
    get_str("padding", c.padding);
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
        throw std::invalid_argument("config: seed must be a non-negative integer");
      }
      const auto s = j["seed"].get<std::int64_t>();
      if (s < 0) throw std::invalid_argument("config: seed must be a non-negative integer");
      c.seed = static_cast<std::uint64_t>(s);
    }
    c.validate();
    return c;
  }

  static ModelConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config: " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
  }

  // FNV-1a over the canonical (sorted-key) JSON dump. Stable across runs;
  // used to key run directories and stamp checkpoints.
  std::uint64_t hash() const {
    const std::string dump = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::string hash_hex() const {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = hash();
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
      out[i] = digits[h & 0xf];
      h >>= 4;
    }
    return out;
  }
};

}  // namespace hgf
