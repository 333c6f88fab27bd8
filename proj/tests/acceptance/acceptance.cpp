// Acceptance gate: one PASS/FAIL line per primary criterion.
//   acceptance [--only NAME]... [--skip NAME]... [--report PATH]
// Exit status is 0 only if every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>
#include <unistd.h>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "inkless/core/log.hpp"
#include "inkless/dataset/dataset.hpp"
#include "inkless/eval/classifier.hpp"
#include "inkless/eval/gradient.hpp"
#include "inkless/eval/nuclei.hpp"
#include "inkless/eval/report.hpp"
#include "inkless/model/tensor_io.hpp"
#include "inkless/restore/restore.hpp"
#include "inkless/synth/synthetic_ink.hpp"
#include "inkless/synth/tissue.hpp"
#include "inkless/training/trainer.hpp"
#include "toy_data.hpp"

using namespace inkless;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- stitching

Outcome stitching_identity() {
  RngStream rng(21, 0);
  synth::TissueSpec spec;
  spec.width = spec.height = 512;
  spec.lumen_fraction = 0.1;
  const auto slide = synth::generate_tissue(spec, rng).image;
  // Ink cells at downsample 8: a diagonal band and an isolated block.
  auto mask = MarkerMask::empty_for("accept", 512, 512, 8);
  for (int my = 0; my < 64; ++my) {
    for (int mx = 0; mx < 64; ++mx) {
      if (std::abs(mx - my) < 3 || (mx >= 50 && mx < 54 && my >= 5 && my < 9)) mask.mask.at(mx, my) = 255;
    }
  }
  const auto plan = restore::plan_tiles(512, 512, mask, 128, 100);
  const auto out = restore::restore_slide(slide, mask, restore::identity_generator(), plan);

  std::vector<std::uint8_t> footprint(512 * 512, 0);
  for (const auto& t : plan.ink_tiles()) {
    for (int y = t.y; y < t.y + 128; ++y) {
      for (int x = t.x; x < t.x + 128; ++x) footprint[static_cast<std::size_t>(y) * 512 + x] = 1;
    }
  }
  int max_diff = 0;
  std::size_t changed_outside = 0;
  for (int y = 0; y < 512; ++y) {
    for (int x = 0; x < 512; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int d = std::abs(static_cast<int>(out.at(x, y, c)) - static_cast<int>(slide.at(x, y, c)));
        max_diff = std::max(max_diff, d);
        if (!footprint[static_cast<std::size_t>(y) * 512 + x] && d != 0) ++changed_outside;
      }
    }
  }
  const bool nontrivial = plan.ink_tile_count() > 0 && plan.ink_tile_count() < plan.tiles.size();
  return {nontrivial && max_diff <= 1 && changed_outside == 0,
          "ink tiles " + std::to_string(plan.ink_tile_count()) + "/" + std::to_string(plan.tiles.size()) +
              ", max diff " + std::to_string(max_diff) + ", changed outside footprint " +
              std::to_string(changed_outside)};
}

// ---------------------------------------------------------------- tile plan

std::vector<int> hand_origins(int dim, int tile, int stride) {
  std::vector<int> o;
  for (int x = 0; x + tile <= dim; x += stride) o.push_back(x);
  if (o.back() + tile < dim) o.push_back(dim - tile);
  return o;
}

Outcome tile_plan_oracle() {
  std::mt19937_64 gen(1234);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  int failures = 0;
  for (int c = 0; c < 200; ++c) {
    const int w = uni(16, 300), h = uni(16, 300);
    const int tile = uni(4, std::min(w, h));
    const int stride = uni(1, tile);
    const int d = std::array<int, 4>{1, 2, 4, 8}[static_cast<std::size_t>(uni(0, 3))];
    auto mask = MarkerMask::empty_for("t", w, h, d);
    const int cells = uni(0, 6);
    for (int k = 0; k < cells; ++k) mask.mask.at(uni(0, mask.mask.width() - 1), uni(0, mask.mask.height() - 1)) = 255;
    const auto plan = restore::plan_tiles(w, h, mask, tile, stride);

    // Expected lattice from the hand rule.
    const auto xs = hand_origins(w, tile, stride);
    const auto ys = hand_origins(h, tile, stride);
    std::set<std::pair<int, int>> expected, got;
    for (int y : ys) {
      for (int x : xs) expected.insert({x, y});
    }
    for (const auto& t : plan.tiles) got.insert({t.x, t.y});
    if (expected != got || got.size() != plan.tiles.size()) {
      ++failures;
      continue;
    }
    // Brute-force per-pixel ink map and coverage by ink tiles.
    std::vector<std::uint8_t> ink(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) ink[static_cast<std::size_t>(y) * w + x] = mask.mask.at(x / d, y / d) != 0;
    }
    std::vector<int> cover(ink.size(), 0);
    bool ok = true;
    for (const auto& t : plan.tiles) {
      bool touches = false;
      for (int y = t.y; y < t.y + tile; ++y) {
        for (int x = t.x; x < t.x + tile; ++x) touches = touches || ink[static_cast<std::size_t>(y) * w + x];
      }
      ok = ok && touches == t.ink;
      if (!t.ink) continue;
      for (int y = t.y; y < t.y + tile; ++y) {
        for (int x = t.x; x < t.x + tile; ++x) ++cover[static_cast<std::size_t>(y) * w + x];
      }
    }
    for (std::size_t i = 0; i < ink.size(); ++i) ok = ok && (!ink[i] || cover[i] >= 1);
    if (!ok) ++failures;
  }
  return {failures == 0, "200 cases, " + std::to_string(failures) + " mismatches"};
}

// ------------------------------------------------------ gradient correlation

// Sobel with replicated borders written out as explicit 3x3 correlation.
std::vector<double> oracle_magnitude(const RasterImage& img) {
  const int w = img.width(), h = img.height();
  static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  static const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  auto lum = [&](int x, int y) {
    x = std::min(std::max(x, 0), w - 1);
    y = std::min(std::max(y, 0), h - 1);
    return 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
  };
  std::vector<double> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double gx = 0, gy = 0;
      for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
          gx += kx[j][i] * lum(x + i - 1, y + j - 1);
          gy += ky[j][i] * lum(x + i - 1, y + j - 1);
        }
      }
      out.push_back(std::hypot(gx, gy));
    }
  }
  return out;
}

double oracle_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  long double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  const long double n = static_cast<long double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    sab += static_cast<long double>(a[i]) * b[i];
    saa += static_cast<long double>(a[i]) * a[i];
    sbb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>((n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb)));
}

RasterImage noise_image(int side, std::mt19937_64& gen) {
  RasterImage img(side, side, 3, 0);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(gen() & 0xff);
  return img;
}

Outcome gradient_correlation_oracle() {
  std::mt19937_64 gen(77);
  double worst = 0, worst_self = 0;
  for (int i = 0; i < 100; ++i) {
    const auto a = noise_image(16, gen);
    const auto b = noise_image(16, gen);
    const double r = eval::gradient_correlation(a, b);
    worst = std::max(worst, std::abs(r - oracle_pearson(oracle_magnitude(a), oracle_magnitude(b))));
    worst_self = std::max(worst_self, std::abs(eval::gradient_correlation(a, a) - 1.0));
  }
  return {worst <= 1e-9 && worst_self <= 1e-12,
          "max |r - oracle| " + fmt(worst, 3) + ", max |r(x,x) - 1| " + fmt(worst_self, 3)};
}

// ------------------------------------------------------------ gradient check

Outcome gradient_check() {
  const auto r = test::generator_gradcheck(11, 24);
  return {r.checked >= 20 && r.max_rel_error <= 1e-3,
          std::to_string(r.checked) + " parameters, max relative error " + fmt(r.max_rel_error, 3)};
}

// -------------------------------------------------------- dataset invariants

dataset::SlideEntry random_slide(const std::string& id, std::mt19937_64& gen) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  const int w = uni(96, 224), h = uni(96, 224);
  dataset::SlideEntry s;
  s.id = id;
  s.category = static_cast<InkCategory>(uni(0, 3));
  s.image = RasterImage(w, h, 3, 0);
  const int glass = uni(w / 6, w / 3);
  const int ink_rows = uni(h / 5, h / 3);
  const int ink_top = uni(0, h - ink_rows);
  s.mask = MarkerMask::empty_for(id, w, h, 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool is_glass = x >= w - glass;
      const bool is_ink = y >= ink_top && y < ink_top + ink_rows && !is_glass;
      const int jitter = uni(-10, 10);
      if (is_ink) {
        s.image.at(x, y, 0) = static_cast<std::uint8_t>(30 + jitter);
        s.image.at(x, y, 1) = static_cast<std::uint8_t>(60 + jitter);
        s.image.at(x, y, 2) = static_cast<std::uint8_t>(140 + jitter);
        s.mask.mask.at(x / 4, y / 4) = 255;
      } else if (is_glass) {
        for (int c = 0; c < 3; ++c) s.image.at(x, y, c) = static_cast<std::uint8_t>(240 + jitter / 2);
      } else {
        s.image.at(x, y, 0) = static_cast<std::uint8_t>(200 + jitter);
        s.image.at(x, y, 1) = static_cast<std::uint8_t>(90 + jitter);
        s.image.at(x, y, 2) = static_cast<std::uint8_t>(160 + jitter);
      }
    }
  }
  return s;
}

Outcome dataset_invariants() {
  std::mt19937_64 gen(2024);
  int failures = 0;
  std::string first_failure;
  for (int run = 0; run < 50; ++run) {
    std::vector<dataset::SlideEntry> slides;
    const int n = std::uniform_int_distribution<int>(1, 4)(gen);
    for (int i = 0; i < n; ++i) slides.push_back(random_slide("r" + std::to_string(run) + "_" + std::to_string(i), gen));
    dataset::SamplerConfig cfg;
    cfg.patch_size = 16;
    cfg.total_patches = static_cast<std::size_t>(std::uniform_int_distribution<int>(20, 200)(gen));
    cfg.seed = gen();
    try {
      const auto m = dataset::build_manifest(slides, cfg);
      m.check_invariants(cfg.background_cap, cfg.marker_fraction, cfg.balance_tolerance);
      if (m.records.size() != cfg.total_patches) throw std::runtime_error("record count");
      for (const auto& r : m.records) {
        const auto& s = *std::find_if(slides.begin(), slides.end(), [&](const auto& e) { return e.id == r.slide_id; });
        if (dataset::classify_at(s, r.x, r.y, r.size, cfg.tissue_threshold) != r.label) {
          throw std::runtime_error("label re-check failed for " + r.slide_id);
        }
      }
      auto again = cfg;
      again.jobs = 3;
      if (to_jsonl(m) != to_jsonl(dataset::build_manifest(slides, again))) {
        throw std::runtime_error("re-run differs");
      }
    } catch (const std::exception& e) {
      if (failures++ == 0) first_failure = "run " + std::to_string(run) + ": " + e.what();
    }
  }
  return {failures == 0, "50 runs, " + std::to_string(failures) + " failures" +
                             (first_failure.empty() ? "" : " (" + first_failure + ")")};
}

// -------------------------------------------------------------- end to end

struct E2eSettings {
  int corpus = 2400;
  int pool = 1000;  // marker pool [0, pool), clean pool [pool, 2 pool), test beyond
  int steps = 2000;
  int batch = 8;
  std::string report;
};

Outcome end_to_end(const E2eSettings& e) {
  const auto t0 = std::chrono::steady_clock::now();
  synth::CorpusConfig cc;
  cc.n = e.corpus;
  cc.patch_size = 64;
  cc.seed = 7;
  cc.mix = synth::CategoryMix::parse("black=1,green=1,blue=1");
  const auto triplets = synth::generate_triplets({}, {}, cc);
  std::vector<RasterImage> marker, clean, test_in, test_gt;
  std::vector<std::optional<InkCategory>> test_cat;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (i < static_cast<std::size_t>(e.pool)) {
      marker.push_back(t.inked);
    } else if (i < static_cast<std::size_t>(2 * e.pool)) {
      clean.push_back(t.clean);
    } else {
      test_in.push_back(t.inked);
      test_gt.push_back(t.clean);
      test_cat.push_back(t.spec.category);
    }
  }

  // Independent classifier corpus.
  auto cls_cc = cc;
  cls_cc.seed = 99;
  cls_cc.n = 800;
  std::vector<RasterImage> cls_marker, cls_clean;
  for (const auto& t : synth::generate_triplets({}, {}, cls_cc)) {
    (t.index % 2 ? cls_marker : cls_clean).push_back(t.index % 2 ? t.inked : t.clean);
  }
  eval::ClassifierConfig ccfg;
  ccfg.width = 16;
  ccfg.epochs = 5;
  ccfg.batch_size = 32;
  ccfg.lr = 1e-3;
  ccfg.input_size = 64;
  ccfg.seed = 5;
  const auto cls = eval::train_classifier(cls_marker, cls_clean, ccfg);

  model::ModelConfig mc;
  mc.gen_filters = 16;
  mc.residual_blocks = 4;
  mc.disc_filters = 16;
  training::TrainConfig tc;  // paper optimizer split: Adam 2e-4 / SGD 1e-4
  tc.batch_size = e.batch;
  tc.seed = 1;
  tc.checkpoint_every = 0;
  const std::int64_t per_epoch = (e.pool + e.batch - 1) / e.batch;
  tc.epochs = static_cast<int>((e.steps + per_epoch - 1) / per_epoch);
  training::Trainer trainer(model::ModelBundle(mc, tc.seed), tc, training::PatchPool(marker),
                            training::PatchPool(clean));
  trainer.run(e.steps);

  // Each 64x64 patch is restored as one tile through the stitching engine.
  auto remover = trainer.bundle().remover;
  const auto gen = model::tile_generator(remover);
  std::vector<RasterImage> restored;
  for (const auto& p : test_in) {
    auto mask = MarkerMask::empty_for("p", 64, 64, 64);
    mask.mask.at(0, 0) = 255;
    restored.push_back(restore::restore_batchwise(p, mask, gen, restore::plan_tiles(64, 64, mask, 64, 64), 1));
  }

  std::vector<eval::GradCorrEntry> corr_entries;
  std::vector<double> corrs;
  for (std::size_t i = 0; i < restored.size(); ++i) {
    std::optional<double> r;
    try {
      r = eval::gradient_correlation(restored[i], test_gt[i]);
      corrs.push_back(*r);
    } catch (const UndefinedCorrelation&) {
    }
    corr_entries.push_back({"test_" + std::to_string(i), test_cat[i], r});
  }
  const double mean_corr = eval::summarize(corrs).mean;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < restored.size(); ++i) ids.push_back("test_" + std::to_string(i));
  const auto fooling = eval::fooling_rate(cls.classifier, restored, ids, test_cat);

  const auto& log = trainer.log();
  const std::size_t decile = std::max<std::size_t>(1, log.size() / 10);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < decile; ++i) {
    first += log[i].loss_cyc;
    last += log[log.size() - 1 - i].loss_cyc;
  }
  first /= static_cast<double>(decile);
  last /= static_cast<double>(decile);

  if (!e.report.empty()) {
    eval::ReportInputs in;
    in.fooling = fooling.log;
    in.grad_corr = corr_entries;
    in.config = {{"model", mc.to_json()}, {"training", tc.to_json()}, {"steps", e.steps},
                 {"classifier", ccfg.to_json()}, {"classifier_holdout_accuracy", cls.holdout_accuracy}};
    in.checkpoint = "in-memory";
    in.classifier_checkpoint = "in-memory";
    write_text_atomic(e.report, eval::assemble_report(in).dump(2) + "\n");
  }

  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  const bool pass = mean_corr >= 0.80 && fooling.overall.rate() >= 0.70 && last < first &&
                    trainer.step() >= 1500 && e.corpus >= 2000;
  return {pass, "steps " + std::to_string(trainer.step()) + ", grad corr " + fmt(mean_corr) + " (>= 0.80)" +
                    ", fooling " + fmt(fooling.overall.rate()) + " (>= 0.70)" + ", cycle loss first/last decile " +
                    fmt(first) + "/" + fmt(last) + ", classifier holdout " + fmt(cls.holdout_accuracy) + ", " +
                    fmt(minutes, 3) + " min"};
}

// -------------------------------------------------------------- nuclei delta

Outcome nuclei_delta_oracle() {
  std::string detail;
  bool pass = true;
  for (int hidden : {7, 3, 12}) {
    const auto s = test::occluded_blob_slide(5, 4, hidden, 1.0);
    const auto d = eval::nuclei_delta(s.inked, s.clean);
    pass = pass && d.revived == hidden && d.after == s.blobs;
    detail += (detail.empty() ? "" : "; ") + std::string("hidden ") + std::to_string(hidden) + " -> before " +
              std::to_string(d.before) + ", after " + std::to_string(d.after) + ", revived " +
              std::to_string(d.revived);
  }
  return {pass, detail};
}

// ------------------------------------------------------- reproducibility

Outcome training_reproducibility() {
  const auto pools = test::toy_pools(128, 32, 3);
  model::ModelConfig mc;
  mc.gen_filters = 4;
  mc.residual_blocks = 1;
  mc.disc_filters = 4;
  training::TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 64;
  tc.seed = 5;
  tc.checkpoint_every = 0;
  auto make = [&] {
    return training::Trainer(model::ModelBundle(mc, tc.seed), tc, training::PatchPool(pools.marker),
                             training::PatchPool(pools.clean));
  };
  auto a = make();
  auto b = make();
  a.run();
  b.run();
  const bool same_logs = a.log() == b.log();

  const auto dir = std::filesystem::temp_directory_path() / ("inkless_accept_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto first = make();
  first.run(a.total_steps() / 2);
  first.save_checkpoint(dir / "half.pt");
  auto resumed = training::Trainer::resume(dir / "half.pt", tc, training::PatchPool(pools.marker),
                                           training::PatchPool(pools.clean));
  resumed.run();
  std::filesystem::remove_all(dir);

  auto params = [](const model::ModelBundle& m) {
    auto p = m.generator_parameters();
    const auto d = m.discriminator_parameters();
    p.insert(p.end(), d.begin(), d.end());
    return p;
  };
  const auto pa = params(a.bundle());
  const auto pr = params(resumed.bundle());
  bool same_params = pa.size() == pr.size();
  for (std::size_t i = 0; same_params && i < pa.size(); ++i) same_params = torch::equal(pa[i], pr[i]);
  return {same_logs && same_params && resumed.log() == a.log(),
          std::to_string(a.total_steps()) + " steps; identical logs " + (same_logs ? "yes" : "no") +
              "; resume vs straight-through parameters identical " + (same_params ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inkless acceptance gate"};
  std::vector<std::string> only, skip;
  E2eSettings e2e;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--skip", skip, "Skip these criteria");
  app.add_option("--report", e2e.report, "Write the end-to-end evaluation report here");
  CLI11_PARSE(app, argc, argv);
  log::set_level("warn");

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"stitching-identity", stitching_identity},
      {"tile-plan-oracle", tile_plan_oracle},
      {"gradient-correlation-oracle", gradient_correlation_oracle},
      {"gradient-check", gradient_check},
      {"dataset-invariants", dataset_invariants},
      {"desk-scale-end-to-end", [&] { return end_to_end(e2e); }},
      {"nuclei-delta-oracle", nuclei_delta_oracle},
      {"training-reproducibility", training_reproducibility},
  };
  bool all = true;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    if (std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(secs, 3) << " s]"
              << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
