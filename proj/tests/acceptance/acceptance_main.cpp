// Acceptance gate: ten numbered criteria, one PASS/FAIL line each, nonzero
// exit when any fail. Each criterion is self-contained and uses independent
// oracles (Eigen eigensolver, brute-force metrics, closed forms) rather than
// the library's own fused paths wherever a cross-check is possible.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hgfusion/diagnostics.hpp"
#include "hgfusion/synthetic.hpp"
#include "hgfusion/trainer.hpp"

namespace fs = std::filesystem;
using namespace hgf;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("[criterion %2d] %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient integrity: the grad-check CLI command on the full micro-config
// loss (T=4, K=2, all modules engaged, adversarial + HSIC terms on).

void criterion_1() {
  const fs::path log = fs::temp_directory_path() / "hgf_gradcheck.log";
  const auto t0 = Clock::now();
  const std::string cmd =
      std::string(HGF_CLI_PATH) + " grad-check --tolerance 1e-4 > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  const double secs = seconds_since(t0);

  // Pull the worst relative error out of the command's TOTAL line.
  std::string worst = "?";
  {
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) {
      const auto pos = line.find("worst relative error ");
      if (pos != std::string::npos) {
        worst = line.substr(pos + 21, 9);
        break;
      }
    }
  }
  std::error_code ec;
  fs::remove(log, ec);
  const bool pass = rc == 0 && secs < 60.0;
  report(1, pass,
         fmt("grad-check exit %d, worst relative error %s (tol 1e-4), %.1f s (budget 60 s)",
             rc, worst.c_str(), secs));
}

// ---------------------------------------------------------------------------
// 2. Hypergraph census, exhaustive for 1 <= w <= T <= 32.

void criterion_2() {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail;
  long long structures = 0;
  for (int t = 1; t <= 32 && pass; ++t) {
    for (int w = 1; w <= t && pass; ++w) {
      const IncidenceStructure inc = build_incidence(t, w);
      ++structures;
      const int expected = (t - w + 1) * (2 + 2 * w);
      if (inc.edge_count != expected ||
          static_cast<int>(inc.edges.size()) != expected) {
        pass = false;
        detail = fmt("T=%d w=%d: %d edges, expected %d", t, w, inc.edge_count, expected);
        break;
      }
      for (const HyperEdge& e : inc.edges) {
        const bool intra = e.kind == EdgeKind::AudioIntra || e.kind == EdgeKind::VisualIntra;
        const std::size_t want = intra ? static_cast<std::size_t>(w)
                                       : static_cast<std::size_t>(w) + 1;
        if (e.nodes.size() != want) {
          pass = false;
          detail = fmt("T=%d w=%d: %s edge with %zu nodes, expected %zu", t, w,
                       edge_kind_name(e.kind), e.nodes.size(), want);
          break;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  if (pass && secs >= 10.0) {
    pass = false;
    detail = fmt("census exceeded budget: %.1f s", secs);
  }
  if (pass) {
    // The documented T=5, w=2 worked example: 24 edges, one line each.
    const std::string listing = build_incidence(5, 2).edge_list();
    const long lines = std::count(listing.begin(), listing.end(), '\n');
    if (lines != 24) {
      pass = false;
      detail = fmt("T=5 w=2 edge list has %ld lines, expected 24", lines);
    } else {
      detail = fmt("%lld structures verified, %.2f s (budget 10 s); T=5 w=2 lists 24 edges",
                   structures, secs);
    }
  }
  report(2, pass, detail);
}

// ---------------------------------------------------------------------------
// 3. Propagation-matrix spectrum via an independent eigensolver.

void criterion_3() {
  bool pass = true;
  std::string detail;
  double lo_seen = 1.0, hi_seen = 0.0;
  for (int t = 1; t <= 8 && pass; ++t) {
    for (int w = 1; w <= t && pass; ++w) {
      const Tensor g = build_incidence(t, w).propagation();
      const int n = g.shape()[0];
      Eigen::MatrixXd m(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          m(i, j) = g.at(i, j);
          if (g.at(i, j) != g.at(j, i)) {
            pass = false;
            detail = fmt("T=%d w=%d: G[%d,%d] != G[%d,%d] bitwise", t, w, i, j, j, i);
          }
        }
      }
      if (!pass) break;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().maxCoeff();
      lo_seen = std::min(lo_seen, lo);
      hi_seen = std::max(hi_seen, hi);
      if (lo < -1e-9 || hi > 1.0 + 1e-9) {
        pass = false;
        detail = fmt("T=%d w=%d: spectrum [%.3e, %.9f] outside [-1e-9, 1+1e-9]", t, w, lo, hi);
      }
    }
  }
  if (pass) {
    detail = fmt("all T<=8: bitwise symmetric, eigenvalues within [%.2e, %.9f]", lo_seen, hi_seen);
  }
  report(3, pass, detail);
}

// ---------------------------------------------------------------------------
// 4. HSIC suite: symmetry, constants, closed form, independence statistic.

Tensor random_rows(int t, int d, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(t) * d);
  for (double& x : v) x = rng.normal();
  return Tensor::from_data({t, d}, std::move(v));
}

void criterion_4() {
  bool pass = true;
  std::string detail;

  Rng rng = Rng::stream(7, 0xABCD0001ULL);
  double worst_sym = 0.0;
  for (int rep_i = 0; rep_i < 20; ++rep_i) {
    Tape tape;
    NoGradGuard guard(tape);
    Tensor x = random_rows(12, 3, rng);
    Tensor y = random_rows(12, 3, rng);
    const double xy = hsic(tape, x, y).value();
    const double yx = hsic(tape, y, x).value();
    worst_sym = std::max(worst_sym, std::abs(xy - yx));
  }
  if (worst_sym > 1e-12) {
    pass = false;
    detail = fmt("symmetry violated: |hsic(X,Y)-hsic(Y,X)| = %.3e", worst_sym);
  }

  if (pass) {  // Constant input annihilates.
    Tape tape;
    NoGradGuard guard(tape);
    Tensor c = Tensor::from_data({6, 2}, std::vector<double>(12, 0.75));
    Tensor y = random_rows(6, 2, rng);
    const double v = std::abs(hsic(tape, c, y).value());
    if (v > 1e-15) {
      pass = false;
      detail = fmt("constant input gives %.3e, expected <= 1e-15", v);
    }
  }

  double closed_err = 0.0;
  if (pass) {  // 2x2 closed form: X=[[0],[1]], Y=[[0],[2]].
    Tape tape;
    NoGradGuard guard(tape);
    Tensor x = Tensor::from_data({2, 1}, {0.0, 1.0});
    Tensor y = Tensor::from_data({2, 1}, {0.0, 2.0});
    const double got = hsic(tape, x, y).value();
    const double want = 0.5 * (1.0 - std::exp(-0.5)) * (1.0 - std::exp(-2.0));
    closed_err = std::abs(got - want);
    if (closed_err > 1e-10) {
      pass = false;
      detail = fmt("closed-form case: got %.12f, want %.12f", got, want);
    }
  }

  int ok_seeds = 0;
  if (pass) {  // Independence statistic at T=200 over 100 seeds.
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng r = Rng::stream(seed, 0x1D5EEDULL);
      Tape tape;
      NoGradGuard guard(tape);
      Tensor x = random_rows(200, 1, r);
      Tensor y = random_rows(200, 1, r);
      const double stat = hsic(tape, x, y).value() / (200.0 * 200.0);
      if (stat < 0.02) ++ok_seeds;
    }
    if (ok_seeds < 95) {
      pass = false;
      detail = fmt("independence: only %d/100 seeds under 0.02", ok_seeds);
    }
  }

  if (pass) {
    detail = fmt("symmetry %.1e; constant zero; closed form err %.1e; independence %d/100",
                 worst_sym, closed_err, ok_seeds);
  }
  report(4, pass, detail);
}

// ---------------------------------------------------------------------------
// 5. Loss bookkeeping identity + config rejection + exact adversarial sign.

void criterion_5() {
  bool pass = true;
  std::string detail;

  ModelConfig cfg = gradcheck_config();
  std::vector<Sample> samples = gradcheck_samples(cfg, 99, 4, 4);
  Rng rng = Rng::stream(17, 0x5EED5EEDULL);
  Network net(cfg, rng);
  Trainer trainer(net, cfg);
  trainer.main_optimizer().set_lr(1e-3);
  trainer.discriminator_optimizer().set_lr(1e-3);

  double worst_identity = 0.0;
  for (int step = 0; step < 10 && pass; ++step) {
    std::vector<const Sample*> batch{&samples[step % 4], &samples[(step + 1) % 4]};
    LossBundle b = trainer.train_step(batch);
    const double gap = std::abs(b.main - (cfg.alpha * b.dep + cfg.beta * b.adv + cfg.gamma * b.hsic));
    worst_identity = std::max(worst_identity, gap);
    if (gap > 1e-10) {
      pass = false;
      detail = fmt("step %d: |L_main - mixture| = %.3e > 1e-10", step, gap);
    }
    if (b.adv != -b.disc) {
      pass = false;
      detail = fmt("step %d: L_adv (%.17g) != -L_disc (%.17g)", step, b.adv, -b.disc);
    }
  }

  if (pass) {
    ModelConfig bad = cfg;
    bad.alpha = 0.5;
    bad.beta = 0.3;
    bad.gamma = 0.3;
    bool rejected = false;
    try {
      bad.validate();
    } catch (const std::invalid_argument&) {
      rejected = true;
    }
    if (!rejected) {
      pass = false;
      detail = "config accepted alpha+beta+gamma = 1.1";
    } else {
      detail = fmt("identity gap <= %.1e over 10 steps; L_adv == -L_disc exactly; bad mixture rejected",
                   worst_identity);
    }
  }
  report(5, pass, detail);
}

// ---------------------------------------------------------------------------
// 6. Alternation contract: phase-wise bitwise isolation of parameter groups.

void criterion_6() {
  ModelConfig cfg = gradcheck_config();
  std::vector<Sample> samples = gradcheck_samples(cfg, 5, 2, 4);
  std::vector<const Sample*> batch{&samples[0], &samples[1]};

  Rng rng = Rng::stream(32, 0x517EULL);
  Network net(cfg, rng);
  Trainer trainer(net, cfg);
  trainer.main_optimizer().set_lr(1e-3);
  trainer.discriminator_optimizer().set_lr(1e-3);

  auto snapshot = [&]() {
    std::vector<std::vector<double>> out;
    for (const NamedParam& p : net.named_parameters()) {
      out.emplace_back(p.tensor.data(), p.tensor.data() + p.tensor.size());
    }
    return out;
  };
  auto is_disc = [](const std::string& name) { return name.rfind("disc.", 0) == 0; };

  const auto before = snapshot();
  Tape tape;
  auto bt = trainer.compute_batch_terms(tape, batch);

  // Step 1: discriminator update.
  tape.backward(bt.disc, net.discriminator_parameters());
  trainer.discriminator_optimizer().step();
  const auto mid = snapshot();

  bool pass = true;
  std::string detail;
  const auto& named = net.named_parameters();
  bool disc_moved = false;
  for (std::size_t i = 0; i < named.size() && pass; ++i) {
    if (is_disc(named[i].name)) {
      disc_moved = disc_moved || mid[i] != before[i];
    } else if (mid[i] != before[i]) {
      pass = false;
      detail = "step 1 modified main parameter " + named[i].name;
    }
  }
  if (pass && !disc_moved) {
    pass = false;
    detail = "step 1 left the discriminator untouched";
  }

  if (pass) {
    // Step 2: main update.
    tape.backward(bt.main, net.main_parameters());
    trainer.main_optimizer().step();
    const auto after = snapshot();
    bool main_moved = false;
    for (std::size_t i = 0; i < named.size() && pass; ++i) {
      if (is_disc(named[i].name)) {
        if (after[i] != mid[i]) {
          pass = false;
          detail = "step 2 modified discriminator parameter " + named[i].name;
        }
      } else {
        main_moved = main_moved || after[i] != mid[i];
      }
    }
    if (pass && !main_moved) {
      pass = false;
      detail = "step 2 left the main parameters untouched";
    }
  }
  if (pass) detail = "both phases bitwise-isolated to their own parameter group";
  report(6, pass, detail);
}

// ---------------------------------------------------------------------------
// 7 + 8. Synthetic benchmark: full model vs ablation, plus discriminator
// equilibrium over the full run's closing epochs.

ModelConfig benchmark_config() {
  ModelConfig cfg;  // architecture defaults: d1=128, d2=64, d3=32, w=11, 4 heads
  cfg.batch_size = 8;
  cfg.max_epochs = 50;
  cfg.patience = 20;
  cfg.lr_main_hi = 3e-4;
  cfg.lr_main_lo = 3e-5;
  cfg.lr_disc_hi = 9e-5;
  cfg.lr_disc_lo = 9e-6;
  cfg.grad_clip_norm = 2.0;
  cfg.seed = 2;
  return cfg;
}

void criteria_7_and_8() {
  const auto t0 = Clock::now();
  const SyntheticSpec spec;  // the default generator spec, seed-fixed
  Dataset ds = generate_synthetic(spec);
  const double oracle = planted_signal_accuracy(ds);

  ModelConfig cfg = benchmark_config();
  auto [train_set, val_set] = split_dataset(ds, cfg.val_fraction, cfg.seed);

  Rng rng = Rng::stream(cfg.seed, 0xA11CEULL);
  Network net(cfg, rng);
  Trainer trainer(net, cfg);
  FitResult full = trainer.fit(train_set, val_set);
  EvalResult full_eval = trainer.evaluate(val_set);
  const double full_secs = seconds_since(t0);

  // Ablation: same data, same seeds, disentanglement terms disabled.
  ModelConfig abl_cfg = cfg;
  abl_cfg.alpha = 1.0;
  abl_cfg.beta = 0.0;
  abl_cfg.gamma = 0.0;
  Rng abl_rng = Rng::stream(abl_cfg.seed, 0xA11CEULL);
  Network abl_net(abl_cfg, abl_rng);
  Trainer abl_trainer(abl_net, abl_cfg);
  FitResult abl = abl_trainer.fit(train_set, val_set);
  EvalResult abl_eval = abl_trainer.evaluate(val_set);

  const double r_full = full_eval.separation.public_ratio;
  const double r_abl = abl_eval.separation.public_ratio;
  const bool sep_ok = std::abs(r_abl - 1.0) > std::abs(r_full - 1.0);
  const bool pass7 = oracle >= 0.90 && full.best_val_accuracy >= 0.90 &&
                     full.best_epoch < 50 && full_secs < 600.0 && sep_ok;
  report(7, pass7,
         fmt("oracle %.3f; full val acc %.3f (best epoch %d, %.0f s, budget 600 s); "
             "public ratio full %.4f vs ablated %.4f (|full-1|=%.4f, |abl-1|=%.4f)",
             oracle, full.best_val_accuracy, full.best_epoch, full_secs, r_full, r_abl,
             std::abs(r_full - 1.0), std::abs(r_abl - 1.0)));

  // Criterion 8: mean discriminator accuracy across the last 20% of epochs.
  const std::size_t n = full.history.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 5);
  double mean_disc = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) mean_disc += full.history[i].disc_accuracy;
  mean_disc /= static_cast<double>(tail);
  const double lo = 1.0 / 3.0 - 0.1, hi = 1.0 / 3.0 + 0.1;
  const bool pass8 = mean_disc >= lo && mean_disc <= hi;
  report(8, pass8,
         fmt("mean discriminator accuracy %.4f over final %zu epochs (target [%.4f, %.4f])",
             mean_disc, tail, lo, hi));
}

// ---------------------------------------------------------------------------
// 9. Metric oracles: brute-force recomputation + the worked example.

void criterion_9() {
  bool pass = true;
  std::string detail;

  // Brute-force, structured differently from the library: per-class arrays
  // computed from an explicit prediction list.
  auto brute = [](const ConfusionMatrix& cm) {
    long long total = 0, hits = 0;
    for (int i = 0; i < cm.classes; ++i) {
      for (int j = 0; j < cm.classes; ++j) total += cm.at(i, j);
      hits += cm.at(i, i);
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(total);
    double wf1 = 0.0;
    for (int c = 0; c < cm.classes; ++c) {
      long long tp = cm.at(c, c), fp = 0, fn = 0;
      for (int i = 0; i < cm.classes; ++i) {
        if (i != c) {
          fp += cm.at(i, c);
          fn += cm.at(c, i);
        }
      }
      const long long support = tp + fn;
      if (support == 0) continue;
      const double denom = 2.0 * tp + fp + fn;
      const double f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
      wf1 += f1 * static_cast<double>(support) / static_cast<double>(total);
    }
    return std::pair<double, double>(acc, wf1);
  };

  Rng rng = Rng::stream(123, 0xC0FFEEULL);
  double worst = 0.0;
  for (int trial = 0; trial < 1000 && pass; ++trial) {
    const int classes = 2 + static_cast<int>(rng.uniform(0.0, 3.0));  // 2..4
    ConfusionMatrix cm(classes);
    bool any = false;
    for (int i = 0; i < classes; ++i) {
      for (int j = 0; j < classes; ++j) {
        const long long n = static_cast<long long>(rng.uniform(0.0, 20.0));
        cm.add(i, j, n);
        any = any || n > 0;
      }
    }
    if (!any) cm.add(0, 0, 1);
    const auto [acc_ref, wf1_ref] = brute(cm);
    const double da = std::abs(accuracy(cm) - acc_ref);
    const double dw = std::abs(weighted_f1(cm) - wf1_ref);
    worst = std::max({worst, da, dw});
    if (da > 1e-12 || dw > 1e-12) {
      pass = false;
      detail = fmt("trial %d: accuracy off by %.3e, weighted F1 off by %.3e", trial, da, dw);
    }
  }

  if (pass) {
    ConfusionMatrix cm(2);
    cm.add(0, 0, 3);
    cm.add(0, 1, 1);
    cm.add(1, 0, 2);
    cm.add(1, 1, 4);
    const double acc = accuracy(cm);
    const double wf1 = weighted_f1(cm);
    // F1_0 = 2/3, F1_1 = 8/11; weighted: 0.4*(2/3) + 0.6*(8/11) = 116/165.
    if (acc != 0.7 || std::abs(wf1 - 116.0 / 165.0) > 1e-12) {
      pass = false;
      detail = fmt("worked case: acc %.17g (want 0.7), wF1 %.17g (want %.17g)", acc, wf1,
                   116.0 / 165.0);
    } else {
      detail = fmt("1000 random matrices within %.1e; worked case acc 0.7, wF1 116/165", worst);
    }
  }
  report(9, pass, detail);
}

// ---------------------------------------------------------------------------
// 10. CLI determinism: identical invocations, byte-identical artifacts.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_10() {
  bool pass = true;
  std::string detail;
  const fs::path root = fs::temp_directory_path() / "hgf_acceptance";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);

  const std::string spec_json = R"({
    "subjects": 60, "events": 2, "num_classes": 3,
    "t_min": 4, "t_max": 6,
    "visual_dim": 6, "audio_dim": 5, "personality_dim": 4, "personality_tokens": 2,
    "signal_public": 3.0, "seed": 9
  })";
  const std::string model_json = R"({
    "d1": 8, "d2": 8, "d3": 4,
    "visual_dim": 6, "audio_dim": 5, "personality_dim": 4,
    "window": 3, "heads": 2, "conv_layers": 2,
    "events": 2, "num_classes": 3,
    "batch_size": 8, "max_epochs": 12, "patience": 12,
    "lr_main_hi": 3e-3, "lr_main_lo": 3e-4,
    "lr_disc_hi": 3e-2, "lr_disc_lo": 3e-3,
    "seed": 2
  })";
  {
    std::ofstream(root / "spec.json") << spec_json;
    std::ofstream(root / "model.json") << model_json;
  }

  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(HGF_CLI_PATH) + " " + args + " > " +
                            (root / "cli.log").string() + " 2>&1";
    return std::system(cmd.c_str());
  };

  if (run("gen-data --config " + (root / "spec.json").string() + " --out " +
          (root / "data").string()) != 0) {
    pass = false;
    detail = "gen-data failed: " + slurp(root / "cli.log");
  }
  for (int i = 1; i <= 2 && pass; ++i) {
    const std::string out = (root / ("run" + std::to_string(i))).string();
    if (run("train --config " + (root / "model.json").string() + " --data " +
            (root / "data/manifest.json").string() + " --out " + out) != 0) {
      pass = false;
      detail = "train invocation " + std::to_string(i) + " failed: " + slurp(root / "cli.log");
    }
  }

  if (pass) {
    auto find_artifact = [&](int i, const char* name) {
      for (const auto& entry : fs::recursive_directory_iterator(root / ("run" + std::to_string(i)))) {
        if (entry.path().filename() == name) return entry.path();
      }
      return fs::path();
    };
    const std::string rep1 = slurp(find_artifact(1, "report.json"));
    const std::string rep2 = slurp(find_artifact(2, "report.json"));
    const std::string ck1 = slurp(find_artifact(1, "checkpoint.bin"));
    const std::string ck2 = slurp(find_artifact(2, "checkpoint.bin"));
    if (rep1.empty() || ck1.empty()) {
      pass = false;
      detail = "train run produced no artifacts";
    } else if (rep1 != rep2) {
      pass = false;
      detail = "reports differ between identical runs";
    } else if (ck1 != ck2) {
      pass = false;
      detail = "checkpoints differ between identical runs";
    } else {
      detail = fmt("two train runs byte-identical (report %zu bytes, checkpoint %zu bytes)",
                   rep1.size(), ck1.size());
    }
  }
  fs::remove_all(root, ec);
  report(10, pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
  // Optional args: criterion numbers to run (default all ten).
  std::vector<bool> wanted(11, argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > 10) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
      return 2;
    }
    wanted[static_cast<std::size_t>(n)] = true;
  }
  std::printf("acceptance suite: 10 criteria\n");
  if (wanted[1]) criterion_1();
  if (wanted[2]) criterion_2();
  if (wanted[3]) criterion_3();
  if (wanted[4]) criterion_4();
  if (wanted[5]) criterion_5();
  if (wanted[6]) criterion_6();
  if (wanted[7] || wanted[8]) criteria_7_and_8();
  if (wanted[9]) criterion_9();
  if (wanted[10]) criterion_10();
  if (g_failures == 0) {
    std::printf("acceptance suite: all criteria passed\n");
  } else {
    std::printf("acceptance suite: %d criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
