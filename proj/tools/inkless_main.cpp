#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "inkless/blindtest/server.hpp"
#include "inkless/cli/config.hpp"
#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "inkless/core/log.hpp"
#include "inkless/core/manifest.hpp"
#include "inkless/dataset/dataset.hpp"
#include "inkless/eval/classifier.hpp"
#include "inkless/eval/fooling.hpp"
#include "inkless/eval/gradient.hpp"
#include "inkless/eval/nuclei.hpp"
#include "inkless/eval/report.hpp"
#include "inkless/model/checkpoint.hpp"
#include "inkless/model/tensor_io.hpp"
#include "inkless/restore/restore.hpp"
#include "inkless/segment/ink_segmentation.hpp"
#include "inkless/synth/synthetic_ink.hpp"
#include "inkless/training/trainer.hpp"

#ifndef INKLESS_VERSION
#define INKLESS_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace inkless;

namespace {

struct Options {
  std::string config_path;
  std::string log_level = "info";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;

  struct {
    std::string slide, out, slide_id, override_path, mode = "union";
    std::optional<int> downsample;
  } segment;
  struct {
    std::string slides, masks, out;
    std::optional<std::size_t> total;
    std::optional<int> patch_size;
  } build;
  struct {
    std::string manifest, slides, masks, out;
  } materialize;
  struct {
    std::string out, clean_dir, mix = "black=0.5,green=0.3,blue=0.1,opaque=0.1";
    int n = 100;
    int patch_size = 64;
  } synth;
  struct {
    std::string marker, clean, out, resume;
    std::optional<int> epochs, batch_size;
    std::optional<std::int64_t> max_steps;
  } train;
  struct {
    std::string marker, clean, out;
    std::optional<int> epochs, depth, width, input_size;
  } classifier;
  struct {
    std::string slide, mask, checkpoint, out;
    std::optional<int> tile, stride, batch;
    bool identity = false;
  } restore;
  struct {
    std::string corrected, clean, checkpoint, report, grad_corr, categories;
    std::vector<std::string> nuclei;
  } evaluate;
  struct {
    std::string clean, corrected, data, host, ui;
    std::optional<int> port;
  } serve;
};

std::vector<RasterImage> load_dir(const fs::path& dir, std::vector<std::string>* names = nullptr) {
  if (!fs::is_directory(dir)) throw IoError("directory not found: " + dir.string());
  std::vector<RasterImage> out;
  for (const auto& file : list_files(dir, ".png")) {
    out.push_back(load_raster(file));
    if (names) names->push_back(file.filename().string());
  }
  return out;
}

// file name -> category, from a synthetic-corpus manifest (.jsonl) or a "file,category" CSV.
std::map<std::string, InkCategory> load_categories(const fs::path& path) {
  std::map<std::string, InkCategory> out;
  std::istringstream in(read_text(path));
  std::string line;
  const bool jsonl = path.extension() == ".jsonl";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (jsonl) {
      const auto row = json::parse(line);
      if (row.contains("file") && row.contains("category")) {
        out[row["file"].get<std::string>()] = parse_category(row["category"].get<std::string>());
      }
    } else {
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw FormatError("expected file,category in " + path.string());
      const auto name = line.substr(0, comma);
      const auto category = line.substr(comma + 1);
      if (name == "file") continue;
      out[name] = parse_category(category);
    }
  }
  return out;
}

void log_seed(const cli::PipelineConfig& config) {
  log::info("resolved seed " + std::to_string(config.seed) + ", jobs " + std::to_string(config.jobs));
}

int run_segment(const Options& o, const cli::PipelineConfig& config) {
  const auto slide = load_raster(o.segment.slide);
  const int downsample = o.segment.downsample.value_or(config.ink.downsample);
  const auto id = o.segment.slide_id.empty() ? fs::path(o.segment.slide).stem().string() : o.segment.slide_id;
  auto mask = segment::segment_ink(slide, config.ink.thresholds, downsample, id);
  if (!o.segment.override_path.empty()) {
    auto manual = load_mask(o.segment.override_path);
    mask = segment::apply_mask_override(mask, manual, segment::parse_override_mode(o.segment.mode));
  }
  save_mask(mask, o.segment.out);
  log::info("ink cells: " + std::to_string(mask.ink_cells()) + " of " +
            std::to_string(static_cast<std::size_t>(mask.mask.width()) * mask.mask.height()));
  return 0;
}

int run_build(const Options& o, cli::PipelineConfig config) {
  if (o.build.total) config.sampler.total_patches = *o.build.total;
  if (o.build.patch_size) config.sampler.patch_size = *o.build.patch_size;
  config.validate();
  log_seed(config);
  const auto slides = dataset::load_slide_set(o.build.slides, o.build.masks);
  const auto manifest = dataset::build_manifest(slides, config.sampler);
  save_manifest(manifest, o.build.out);
  log::info("manifest with " + std::to_string(manifest.records.size()) + " records written to " + o.build.out);
  return 0;
}

int run_materialize(const Options& o) {
  const auto manifest = load_manifest(o.materialize.manifest);
  const auto slides = dataset::load_slide_set(o.materialize.slides, o.materialize.masks);
  dataset::materialize(manifest, slides, o.materialize.out);
  return 0;
}

int run_synth(const Options& o, const cli::PipelineConfig& config) {
  synth::CorpusConfig cc;
  cc.n = o.synth.n;
  cc.patch_size = o.synth.patch_size;
  cc.mix = synth::CategoryMix::parse(o.synth.mix);
  cc.seed = config.seed;
  cc.jobs = config.jobs;
  cc.tissue.width = cc.tissue.height = cc.patch_size;
  std::vector<RasterImage> sources;
  std::vector<std::string> names;
  if (!o.synth.clean_dir.empty()) sources = load_dir(o.synth.clean_dir, &names);
  log_seed(config);
  synth::generate_paired_corpus(sources, names, cc, o.synth.out);
  return 0;
}

int run_train(const Options& o, cli::PipelineConfig config) {
  if (o.train.epochs) config.training.epochs = *o.train.epochs;
  if (o.train.batch_size) config.training.batch_size = *o.train.batch_size;
  config.validate();
  log_seed(config);
  auto marker = training::PatchPool::from_directory(o.train.marker);
  auto clean = training::PatchPool::from_directory(o.train.clean);
  auto trainer = o.train.resume.empty()
                     ? training::Trainer(model::ModelBundle(config.model, config.seed), config.training,
                                         std::move(marker), std::move(clean))
                     : training::Trainer::resume(o.train.resume, config.training, std::move(marker),
                                                 std::move(clean), &config.model);
  trainer.set_output_dir(o.train.out);
  log::info("training " + std::to_string(trainer.total_steps()) + " steps (" +
            std::to_string(trainer.steps_per_epoch()) + " per epoch) from step " + std::to_string(trainer.step()));
  std::optional<std::int64_t> stop;
  if (o.train.max_steps) stop = *o.train.max_steps;
  trainer.run(stop);
  return 0;
}

int run_train_classifier(const Options& o, cli::PipelineConfig config) {
  auto& cc = config.evaluation.classifier;
  if (o.classifier.epochs) cc.epochs = *o.classifier.epochs;
  if (o.classifier.depth) cc.depth = *o.classifier.depth;
  if (o.classifier.width) cc.width = *o.classifier.width;
  if (o.classifier.input_size) cc.input_size = *o.classifier.input_size;
  config.validate();
  log_seed(config);
  const auto marker = load_dir(o.classifier.marker);
  const auto clean = load_dir(o.classifier.clean);
  auto trained = eval::train_classifier(marker, clean, cc);
  trained.classifier.save(o.classifier.out, trained.holdout_accuracy);
  std::ostringstream msg;
  msg << "held-out accuracy " << trained.holdout_accuracy << " on " << trained.holdout_size << " patches";
  log::info(msg.str());
  return 0;
}

int run_restore(const Options& o, cli::PipelineConfig config) {
  auto& r = config.restore;
  if (o.restore.tile) r.tile = *o.restore.tile;
  if (o.restore.stride) r.stride = *o.restore.stride;
  if (o.restore.batch) r.batch = *o.restore.batch;
  config.validate();
  const auto slide = load_raster(o.restore.slide);
  const auto mask = load_mask(o.restore.mask);
  mask.check_aligned(slide.width(), slide.height());
  restore::TileGenerator generator;
  if (o.restore.identity) {
    generator = restore::identity_generator();
  } else {
    if (o.restore.checkpoint.empty()) throw InputError("restore needs --checkpoint unless --identity-test is set");
    auto bundle = model::load_bundle(o.restore.checkpoint);
    generator = model::tile_generator(bundle.remover);
  }
  const auto plan = restore::plan_tiles(slide.width(), slide.height(), mask, r.tile, r.stride);
  restore::RestoreStats stats;
  const auto out = restore::restore_batchwise(slide, mask, generator, plan, r.batch, &stats);
  save_raster(out, o.restore.out);
  log::info("restored " + std::to_string(stats.tiles_processed) + " ink tiles of " +
            std::to_string(plan.tiles.size()) + " in " + std::to_string(stats.generator_calls) + " batches");
  return 0;
}

int run_evaluate(const Options& o, const cli::PipelineConfig& config) {
  eval::ReportInputs in;
  in.config = cli::to_json(config);
  std::map<std::string, InkCategory> categories;
  if (!o.evaluate.categories.empty()) categories = load_categories(o.evaluate.categories);
  auto category_of = [&](const std::string& name) -> std::optional<InkCategory> {
    auto it = categories.find(name);
    if (it == categories.end()) return std::nullopt;
    return it->second;
  };

  if (!o.evaluate.corrected.empty()) {
    std::vector<std::string> names;
    const auto corrected = load_dir(o.evaluate.corrected, &names);
    if (!o.evaluate.checkpoint.empty()) {
      const auto classifier = eval::TorchPatchClassifier::load(o.evaluate.checkpoint);
      in.classifier_checkpoint = o.evaluate.checkpoint;
      std::vector<RasterImage> kept;
      std::vector<std::string> ids;
      std::vector<std::optional<InkCategory>> cats;
      for (std::size_t i = 0; i < corrected.size(); ++i) {
        if (dataset::tissue_fraction(corrected[i]) < config.evaluation.tissue_threshold) continue;
        kept.push_back(corrected[i]);
        ids.push_back(names[i]);
        cats.push_back(category_of(names[i]));
      }
      log::info("fooling rate over " + std::to_string(kept.size()) + " non-background patches");
      in.fooling = eval::fooling_rate(classifier, kept, ids, cats).log;
    }
    if (!o.evaluate.clean.empty()) {
      std::vector<eval::GradCorrEntry> entries;
      for (std::size_t i = 0; i < corrected.size(); ++i) {
        const auto counterpart = fs::path(o.evaluate.clean) / names[i];
        if (!fs::exists(counterpart)) continue;
        eval::GradCorrEntry e{names[i], category_of(names[i]), std::nullopt};
        try {
          e.r = eval::gradient_correlation(corrected[i], load_raster(counterpart), config.evaluation.gradient_mode);
        } catch (const UndefinedCorrelation&) {
        }
        entries.push_back(std::move(e));
      }
      in.grad_corr = std::move(entries);
    }
  }
  if (!o.evaluate.grad_corr.empty()) {
    // Rows: id,input,output[,category]
    std::vector<eval::GradCorrEntry> entries = in.grad_corr.value_or(std::vector<eval::GradCorrEntry>{});
    std::istringstream rows(read_text(o.evaluate.grad_corr));
    std::string line;
    while (std::getline(rows, line)) {
      if (line.empty() || line.rfind("id,", 0) == 0) continue;
      std::vector<std::string> cols;
      std::istringstream cells(line);
      for (std::string cell; std::getline(cells, cell, ',');) cols.push_back(cell);
      if (cols.size() < 3) throw FormatError("grad-corr rows need id,input,output: " + line);
      eval::GradCorrEntry e{cols[0], std::nullopt, std::nullopt};
      if (cols.size() > 3 && !cols[3].empty()) e.category = parse_category(cols[3]);
      try {
        e.r = eval::gradient_correlation(load_raster(cols[1]), load_raster(cols[2]), config.evaluation.gradient_mode);
      } catch (const UndefinedCorrelation&) {
      }
      entries.push_back(std::move(e));
    }
    in.grad_corr = std::move(entries);
  }
  if (!o.evaluate.nuclei.empty()) {
    if (o.evaluate.nuclei.size() != 2) throw InputError("--nuclei takes a before and an after image");
    const auto delta = eval::nuclei_delta(load_raster(o.evaluate.nuclei[0]), load_raster(o.evaluate.nuclei[1]),
                                          config.evaluation.nuclei);
    in.nuclei = std::vector<eval::NucleiEntry>{
        {fs::path(o.evaluate.nuclei[0]).stem().string(), delta.before, delta.after, delta.revived}};
  }
  const auto report = eval::assemble_report(in);
  write_text_atomic(o.evaluate.report, report.dump(2) + "\n");
  log::info("report written to " + o.evaluate.report);
  return 0;
}

int run_serve(const Options& o, const cli::PipelineConfig& config) {
  blindtest::SessionStore store(o.serve.data, list_files(o.serve.clean, ".png"), list_files(o.serve.corrected, ".png"));
  blindtest::ServerOptions so;
  so.host = o.serve.host.empty() ? config.blindtest.host : o.serve.host;
  so.port = o.serve.port.value_or(config.blindtest.port);
  so.static_dir = o.serve.ui;
  if (const char* token = std::getenv(blindtest::kTokenEnvVar)) so.token = token;
  blindtest::Server server(store, so);
  const int port = server.bind();
  log::info("blind-test service on http://" + so.host + ":" + std::to_string(port) +
            (so.token.empty() ? " (no token)" : " (token required)"));
  server.listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marker-ink removal for H&E whole-slide images", "inkless"};
  app.set_version_flag("--version", INKLESS_VERSION);
  Options o;
  bool dump = false;
  app.add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag("--config-dump", dump, "Print the effective configuration as JSON and exit");
  app.add_option("--seed", o.seed, "Global seed (overrides the config file)");
  app.add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", o.log_level, "trace, debug, info, warn, error, off");

  auto* seg = app.add_subcommand("segment-ink", "Detect pen ink and write a marker mask");
  seg->add_option("--slide", o.segment.slide)->required()->check(CLI::ExistingFile);
  seg->add_option("--out", o.segment.out, "Mask PNG; the sidecar goes to <out>.json")->required();
  seg->add_option("--downsample", o.segment.downsample)->check(CLI::PositiveNumber);
  seg->add_option("--slide-id", o.segment.slide_id);
  seg->add_option("--override", o.segment.override_path, "Manually corrected mask")->check(CLI::ExistingFile);
  seg->add_option("--mode", o.segment.mode, "replace, union or subtract")
      ->check(CLI::IsMember({"replace", "union", "subtract"}));

  auto* build = app.add_subcommand("build-dataset", "Sample a labeled patch manifest from slides and masks");
  build->add_option("--slides", o.build.slides)->required()->check(CLI::ExistingDirectory);
  build->add_option("--masks", o.build.masks)->required()->check(CLI::ExistingDirectory);
  build->add_option("--out", o.build.out, "Manifest (.jsonl)")->required();
  build->add_option("--total", o.build.total);
  build->add_option("--patch-size", o.build.patch_size);

  auto* mat = app.add_subcommand("materialize", "Write the patches of a manifest to disk");
  mat->add_option("--manifest", o.materialize.manifest)->required()->check(CLI::ExistingFile);
  mat->add_option("--slides", o.materialize.slides)->required()->check(CLI::ExistingDirectory);
  mat->add_option("--masks", o.materialize.masks)->required()->check(CLI::ExistingDirectory);
  mat->add_option("--out", o.materialize.out)->required();

  auto* syn = app.add_subcommand("synth-corpus", "Generate paired clean/inked patches");
  syn->add_option("--out", o.synth.out)->required();
  syn->add_option("--n", o.synth.n)->check(CLI::PositiveNumber);
  syn->add_option("--patch-size", o.synth.patch_size)->check(CLI::PositiveNumber);
  syn->add_option("--mix", o.synth.mix, "Category weights, e.g. black=0.5,green=0.5");
  syn->add_option("--clean-dir", o.synth.clean_dir, "Clean source patches (default: procedural tissue)")
      ->check(CLI::ExistingDirectory);

  auto* tr = app.add_subcommand("train", "Train the marker-removal model");
  tr->add_option("--marker", o.train.marker)->required()->check(CLI::ExistingDirectory);
  tr->add_option("--clean", o.train.clean)->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", o.train.out)->required();
  tr->add_option("--resume", o.train.resume, "Training checkpoint to continue from")->check(CLI::ExistingFile);
  tr->add_option("--epochs", o.train.epochs)->check(CLI::PositiveNumber);
  tr->add_option("--batch-size", o.train.batch_size)->check(CLI::PositiveNumber);
  tr->add_option("--max-steps", o.train.max_steps, "Stop early at this global step")->check(CLI::PositiveNumber);

  auto* tc = app.add_subcommand("train-classifier", "Train the marker-vs-clean evaluation classifier");
  tc->add_option("--marker", o.classifier.marker)->required()->check(CLI::ExistingDirectory);
  tc->add_option("--clean", o.classifier.clean)->required()->check(CLI::ExistingDirectory);
  tc->add_option("--out", o.classifier.out)->required();
  tc->add_option("--epochs", o.classifier.epochs)->check(CLI::PositiveNumber);
  tc->add_option("--depth", o.classifier.depth)->check(CLI::IsMember({18, 34, 50}));
  tc->add_option("--width", o.classifier.width)->check(CLI::PositiveNumber);
  tc->add_option("--input-size", o.classifier.input_size)->check(CLI::PositiveNumber);

  auto* rs = app.add_subcommand("restore", "Remove ink from a slide tile by tile");
  rs->add_option("--slide", o.restore.slide)->required()->check(CLI::ExistingFile);
  rs->add_option("--mask", o.restore.mask)->required()->check(CLI::ExistingFile);
  rs->add_option("--checkpoint", o.restore.checkpoint)->check(CLI::ExistingFile);
  rs->add_option("--out", o.restore.out)->required();
  rs->add_option("--tile", o.restore.tile);
  rs->add_option("--stride", o.restore.stride);
  rs->add_option("--batch", o.restore.batch);
  rs->add_flag("--identity-test", o.restore.identity, "Bypass the network (stitching check)");

  auto* ev = app.add_subcommand("evaluate", "Compute metrics and write the evaluation report");
  ev->add_option("--corrected", o.evaluate.corrected, "Corrected patches")->check(CLI::ExistingDirectory);
  ev->add_option("--clean", o.evaluate.clean, "Ground-truth clean patches, matched by file name")
      ->check(CLI::ExistingDirectory);
  ev->add_option("--checkpoint", o.evaluate.checkpoint, "Classifier checkpoint")->check(CLI::ExistingFile);
  ev->add_option("--report", o.evaluate.report)->required();
  ev->add_option("--grad-corr", o.evaluate.grad_corr, "CSV id,input,output[,category]")->check(CLI::ExistingFile);
  ev->add_option("--nuclei", o.evaluate.nuclei, "Before and after images")->expected(2)->check(CLI::ExistingFile);
  ev->add_option("--categories", o.evaluate.categories, "Corpus manifest or file,category CSV")
      ->check(CLI::ExistingFile);

  auto* bt = app.add_subcommand("blindtest", "Blind-test session service");
  auto* serve = bt->add_subcommand("serve", "Serve the blind-test HTTP API");
  bt->require_subcommand(1);
  serve->add_option("--clean", o.serve.clean)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--corrected", o.serve.corrected)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--data", o.serve.data, "Session storage directory")->required();
  serve->add_option("--port", o.serve.port);
  serve->add_option("--host", o.serve.host);
  serve->add_option("--ui", o.serve.ui, "Static UI assets")->check(CLI::ExistingDirectory);

  app.require_subcommand(0, 1);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    log::set_level(o.log_level);
    cli::PipelineConfig config;
    if (!o.config_path.empty()) config = cli::load_config(o.config_path);
    if (o.seed) config.seed = *o.seed;
    if (o.jobs) config.jobs = *o.jobs;
    config.propagate();
    config.validate();

    if (dump) {
      std::cout << cli::dump_config(config);
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }
    if (seg->parsed()) return run_segment(o, config);
    if (build->parsed()) return run_build(o, config);
    if (mat->parsed()) return run_materialize(o);
    if (syn->parsed()) return run_synth(o, config);
    if (tr->parsed()) return run_train(o, config);
    if (tc->parsed()) return run_train_classifier(o, config);
    if (rs->parsed()) return run_restore(o, config);
    if (ev->parsed()) return run_evaluate(o, config);
    if (serve->parsed()) return run_serve(o, config);
    return 2;
  } catch (const SamplingExhausted& e) {
    log::error(std::string(e.what()) + " (label " + e.label() + ")");
    return 1;
  } catch (const Error& e) {
    log::error(e.what());
    return 1;
  }
}
