#pragma once

// Run artifacts. Reports are deterministic: no timestamps, no environment
// capture, canonical (sorted-key) JSON, and atomic writes so a crash never
// leaves a partial file behind.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace hgf {

struct EpochRecord {
  int epoch = 0;
  double lr_main = 0.0;
  double lr_disc = 0.0;
  double loss_dep = 0.0;
  double loss_disc = 0.0;
  double loss_adv = 0.0;
  double loss_hsic = 0.0;
  double loss_main = 0.0;
  double disc_accuracy = 0.0;
  double val_accuracy = 0.0;
  double val_weighted_f1 = 0.0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},
            {"lr_main", lr_main},
            {"lr_disc", lr_disc},
            {"loss_dep", loss_dep},
            {"loss_disc", loss_disc},
            {"loss_adv", loss_adv},
            {"loss_hsic", loss_hsic},
            {"loss_main", loss_main},
            {"disc_accuracy", disc_accuracy},
            {"val_accuracy", val_accuracy},
            {"val_weighted_f1", val_weighted_f1}};
  }

  static EpochRecord from_json(const nlohmann::json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.lr_main = j.at("lr_main").get<double>();
    r.lr_disc = j.at("lr_disc").get<double>();
    r.loss_dep = j.at("loss_dep").get<double>();
    r.loss_disc = j.at("loss_disc").get<double>();
    r.loss_adv = j.at("loss_adv").get<double>();
    r.loss_hsic = j.at("loss_hsic").get<double>();
    r.loss_main = j.at("loss_main").get<double>();
    r.disc_accuracy = j.at("disc_accuracy").get<double>();
    r.val_accuracy = j.at("val_accuracy").get<double>();
    r.val_weighted_f1 = j.at("val_weighted_f1").get<double>();
    return r;
  }
};

struct RunReport {
  std::string task;                 // "ternary" | "binary"
  nlohmann::json config;            // exact config used
  std::string config_hash;          // hex
  std::uint64_t seed = 0;
  int best_epoch = -1;
  int stopped_epoch = -1;
  double best_val_accuracy = 0.0;
  double best_val_weighted_f1 = 0.0;
  double final_train_accuracy = 0.0;
  double final_train_weighted_f1 = 0.0;
  double public_separation_ratio = 0.0;
  double private_separation_ratio = 0.0;
  std::vector<std::vector<long long>> val_confusion;
  std::vector<EpochRecord> history;

  nlohmann::json to_json() const {
    nlohmann::json hist = nlohmann::json::array();
    for (const EpochRecord& r : history) hist.push_back(r.to_json());
    return {{"task", task},
            {"config", config},
            {"config_hash", config_hash},
            {"seed", seed},
            {"best_epoch", best_epoch},
            {"stopped_epoch", stopped_epoch},
            {"best_val_accuracy", best_val_accuracy},
            {"best_val_weighted_f1", best_val_weighted_f1},
            {"final_train_accuracy", final_train_accuracy},
            {"final_train_weighted_f1", final_train_weighted_f1},
            {"public_separation_ratio", public_separation_ratio},
            {"private_separation_ratio", private_separation_ratio},
            {"val_confusion", val_confusion},
            {"history", hist}};
  }

  static RunReport from_json(const nlohmann::json& j) {
    RunReport r;
    r.task = j.at("task").get<std::string>();
    r.config = j.at("config");
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.stopped_epoch = j.at("stopped_epoch").get<int>();
    r.best_val_accuracy = j.at("best_val_accuracy").get<double>();
    r.best_val_weighted_f1 = j.at("best_val_weighted_f1").get<double>();
    r.final_train_accuracy = j.at("final_train_accuracy").get<double>();
    r.final_train_weighted_f1 = j.at("final_train_weighted_f1").get<double>();
    r.public_separation_ratio = j.at("public_separation_ratio").get<double>();
    r.private_separation_ratio = j.at("private_separation_ratio").get<double>();
    r.val_confusion = j.at("val_confusion").get<std::vector<std::vector<long long>>>();
    for (const auto& e : j.at("history")) r.history.push_back(EpochRecord::from_json(e));
    return r;
  }

  std::string summary() const {
    std::string out;
    out += "task: " + task + "\n";
    out += "config_hash: " + config_hash + "\n";
    out += "seed: " + std::to_string(seed) + "\n";
    out += "epochs_run: " + std::to_string(stopped_epoch + 1) + "\n";
    out += "best_epoch: " + std::to_string(best_epoch) + "\n";
    out += "best_val_accuracy: " + std::to_string(best_val_accuracy) + "\n";
    out += "best_val_weighted_f1: " + std::to_string(best_val_weighted_f1) + "\n";
    out += "public_separation_ratio: " + std::to_string(public_separation_ratio) + "\n";
    out += "private_separation_ratio: " + std::to_string(private_separation_ratio) + "\n";
    return out;
  }
};

// Writes text to path atomically via a sibling temp file + rename.
inline void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_file_atomic: cannot open " + tmp);
    out << text;
    if (!out.good()) throw std::runtime_error("write_file_atomic: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("write_file_atomic: rename to " + path + " failed");
  }
}

inline void save_report(const RunReport& report, const std::string& path) {
  write_file_atomic(path, report.to_json().dump(2) + "\n");
}

inline RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_report: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return RunReport::from_json(j);
}

}  // namespace hgf
