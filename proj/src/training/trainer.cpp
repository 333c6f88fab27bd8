#include "inkless/training/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "inkless/core/log.hpp"
#include "inkless/core/rng.hpp"
#include "inkless/model/checkpoint.hpp"
#include "inkless/model/losses.hpp"

namespace inkless::training {

namespace fs = std::filesystem;
using model::ModelBundle;

namespace {

constexpr std::uint64_t kMarkerOrderStream = 0x4d41524bULL;
constexpr std::uint64_t kCleanOrderStream = 0x434c4e31ULL;
constexpr std::uint64_t kStepStream = 0x53544550ULL;
constexpr const char* kTrainingKind = "cyclegan";

std::vector<std::int64_t> epoch_order(std::uint64_t seed, std::uint64_t stream, std::int64_t epoch,
                                      std::int64_t n) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = RngStream(seed, stream).derive(static_cast<std::uint64_t>(epoch));
  rng.shuffle(order);
  return order;
}

bool finite(const torch::Tensor& t) { return std::isfinite(t.item<double>()); }

}  // namespace

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& text) {
  if (text == "adam") return OptimizerKind::Adam;
  if (text == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + text + "' (expected adam or sgd)");
}

nlohmann::json OptimizerConfig::to_json() const {
  return {{"kind", to_string(kind)}, {"lr", lr}, {"beta1", beta1}, {"beta2", beta2}, {"momentum", momentum}};
}

OptimizerConfig OptimizerConfig::from_json(const nlohmann::json& j) {
  OptimizerConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k == "kind") c.kind = parse_optimizer(it->get<std::string>());
    else if (k == "lr") c.lr = it->get<double>();
    else if (k == "beta1") c.beta1 = it->get<double>();
    else if (k == "beta2") c.beta2 = it->get<double>();
    else if (k == "momentum") c.momentum = it->get<double>();
    else throw ConfigError("unknown optimizer key '" + k + "'");
  }
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  for (const auto* o : {&gen_optimizer, &disc_optimizer}) {
    if (!(o->lr > 0)) throw ConfigError("learning rates must be > 0");
    if (o->beta1 < 0 || o->beta1 >= 1 || o->beta2 < 0 || o->beta2 >= 1) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (o->momentum < 0) throw ConfigError("momentum must be >= 0");
  }
  if (lr_decay != "none") throw ConfigError("unsupported lr_decay '" + lr_decay + "' (only none)");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (history_size < 0) throw ConfigError("history_size must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"gen_optimizer", gen_optimizer.to_json()},
          {"disc_optimizer", disc_optimizer.to_json()},
          {"lr_decay", lr_decay},
          {"flips", flips},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"history_size", history_size},
          {"deterministic", deterministic}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k == "epochs") c.epochs = it->get<int>();
    else if (k == "batch_size") c.batch_size = it->get<int>();
    else if (k == "gen_optimizer") c.gen_optimizer = OptimizerConfig::from_json(*it);
    else if (k == "disc_optimizer") c.disc_optimizer = OptimizerConfig::from_json(*it);
    else if (k == "lr_decay") c.lr_decay = it->get<std::string>();
    else if (k == "flips") c.flips = it->get<bool>();
    else if (k == "seed") c.seed = it->get<std::uint64_t>();
    else if (k == "checkpoint_every") c.checkpoint_every = it->get<int>();
    else if (k == "history_size") c.history_size = it->get<int>();
    else if (k == "deterministic") c.deterministic = it->get<bool>();
    else throw ConfigError("unknown training key '" + k + "'");
  }
  c.validate();
  return c;
}

PatchPool::PatchPool(const std::vector<RasterImage>& patches) {
  if (patches.empty()) return;
  const int side = patches.front().width();
  bytes_ = torch::empty({static_cast<long>(patches.size()), side, side, 3}, torch::kUInt8);
  auto* dst = bytes_.data_ptr<std::uint8_t>();
  const auto per = static_cast<std::size_t>(side) * side * 3;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    if (p.width() != side || p.height() != side || p.channels() != 3) {
      throw ShapeError("training patches must be square RGB of one size");
    }
    std::copy(p.data().begin(), p.data().end(), dst + i * per);
  }
}

PatchPool PatchPool::from_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("patch directory not found: " + dir.string());
  std::vector<RasterImage> patches;
  for (const auto& file : list_files(dir, ".png")) {
    auto image = load_raster(file);
    if (image.channels() != 3) throw FormatError("patch is not RGB: " + file.string());
    patches.push_back(std::move(image));
  }
  return PatchPool(patches);
}

torch::Tensor PatchPool::batch(const std::vector<std::int64_t>& rows, const std::vector<int>& flips,
                               torch::Dtype dtype) const {
  auto index = torch::tensor(rows, torch::kLong);
  auto picked = bytes_.index_select(0, index).permute({0, 3, 1, 2}).to(dtype);
  std::vector<torch::Tensor> items;
  items.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto item = picked[static_cast<long>(i)];
    const int code = flips.empty() ? 0 : flips[i];
    if (code & 1) item = item.flip({2});
    if (code & 2) item = item.flip({1});
    items.push_back(item);
  }
  return torch::stack(items).div(127.5).sub(1.0).contiguous();
}

void write_loss_csv(const std::vector<LossRecord>& log, const fs::path& path) {
  std::ostringstream out;
  out.precision(17);
  out << "step,loss_D,loss_G_adv,loss_cyc\n";
  for (const auto& r : log) out << r.step << ',' << r.loss_d << ',' << r.loss_g_adv << ',' << r.loss_cyc << '\n';
  write_text_atomic(path, out.str());
}

std::vector<LossRecord> read_loss_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line != "step,loss_D,loss_G_adv,loss_cyc") throw FormatError("unexpected loss log header in " + path.string());
  std::vector<LossRecord> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossRecord r;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream row(line);
    if (!(row >> r.step >> c1 >> r.loss_d >> c2 >> r.loss_g_adv >> c3 >> r.loss_cyc) || c1 != ',' ||
        c2 != ',' || c3 != ',') {
      throw FormatError("malformed loss log row: " + line);
    }
    log.push_back(r);
  }
  return log;
}

struct Trainer::State {
  ModelBundle bundle;
  TrainConfig config;
  PatchPool marker;
  PatchPool clean;
  std::unique_ptr<torch::optim::Optimizer> gen_opt;
  std::unique_ptr<torch::optim::Optimizer> disc_opt;
  std::int64_t step = 0;
  std::vector<LossRecord> log;
  std::vector<torch::Tensor> history;
  fs::path out_dir;
  torch::Dtype dtype = torch::kFloat32;

  // Cached epoch orders.
  std::int64_t order_epoch = -1;
  std::vector<std::int64_t> marker_order;
  std::vector<std::int64_t> clean_order;
};

namespace {

std::unique_ptr<torch::optim::Optimizer> make_optimizer(const OptimizerConfig& c,
                                                        std::vector<torch::Tensor> params) {
  if (c.kind == OptimizerKind::Adam) {
    return std::make_unique<torch::optim::Adam>(
        std::move(params), torch::optim::AdamOptions(c.lr).betas({c.beta1, c.beta2}));
  }
  return std::make_unique<torch::optim::SGD>(std::move(params),
                                             torch::optim::SGDOptions(c.lr).momentum(c.momentum));
}

double optimizer_lr(const torch::optim::Optimizer& opt) {
  return opt.param_groups().front().options().get_lr();
}

}  // namespace

Trainer::Trainer(std::unique_ptr<State> state) : state_(std::move(state)) {}

Trainer::Trainer(ModelBundle bundle, TrainConfig config, PatchPool marker, PatchPool clean)
    : state_(std::make_unique<State>()) {
  config.validate();
  if (marker.size() == 0) throw DataError("marker patch pool is empty");
  if (clean.size() == 0) throw DataError("clean patch pool is empty");
  if (marker.side() != clean.side()) throw ShapeError("marker and clean patches differ in size");
  if (marker.side() % 4 != 0 || marker.side() < model::kGeneratorMinSide) {
    throw ShapeError("patch side must be a multiple of 4 and >= 8");
  }
  if (marker.side() < model::discriminator_min_side(bundle.config.disc_layers)) {
    throw ShapeError("patch side " + std::to_string(marker.side()) + " is below the critic minimum");
  }
  if (config.deterministic) torch::set_num_threads(1);
  auto& s = *state_;
  s.bundle = std::move(bundle);
  s.config = std::move(config);
  s.marker = std::move(marker);
  s.clean = std::move(clean);
  s.dtype = s.bundle.remover->parameters().front().scalar_type();
  s.gen_opt = make_optimizer(s.config.gen_optimizer, s.bundle.generator_parameters());
  s.disc_opt = make_optimizer(s.config.disc_optimizer, s.bundle.discriminator_parameters());
}

Trainer::~Trainer() = default;
Trainer::Trainer(Trainer&&) noexcept = default;
Trainer& Trainer::operator=(Trainer&&) noexcept = default;

std::int64_t Trainer::steps_per_epoch() const noexcept {
  const auto n = std::max(state_->marker.size(), state_->clean.size());
  return (n + state_->config.batch_size - 1) / state_->config.batch_size;
}

std::int64_t Trainer::total_steps() const noexcept { return steps_per_epoch() * state_->config.epochs; }
std::int64_t Trainer::step() const noexcept { return state_->step; }
const ModelBundle& Trainer::bundle() const { return state_->bundle; }
const TrainConfig& Trainer::config() const { return state_->config; }
const std::vector<LossRecord>& Trainer::log() const { return state_->log; }
torch::optim::Optimizer& Trainer::gen_optimizer() { return *state_->gen_opt; }
torch::optim::Optimizer& Trainer::disc_optimizer() { return *state_->disc_opt; }
void Trainer::set_output_dir(fs::path dir) { state_->out_dir = std::move(dir); }

LossRecord Trainer::train_step() {
  auto& s = *state_;
  if (finished()) throw InputError("training schedule already complete");
  const auto per_epoch = steps_per_epoch();
  const auto epoch = s.step / per_epoch;
  const auto within = s.step % per_epoch;
  if (epoch != s.order_epoch) {
    s.marker_order = epoch_order(s.config.seed, kMarkerOrderStream, epoch, s.marker.size());
    s.clean_order = epoch_order(s.config.seed, kCleanOrderStream, epoch, s.clean.size());
    s.order_epoch = epoch;
  }

  // Positions run over the larger pool; the smaller one wraps around.
  const auto n = std::max(s.marker.size(), s.clean.size());
  const auto begin = within * s.config.batch_size;
  const auto end = std::min<std::int64_t>(n, begin + s.config.batch_size);
  std::vector<std::int64_t> marker_rows, clean_rows;
  for (auto i = begin; i < end; ++i) {
    marker_rows.push_back(s.marker_order[static_cast<std::size_t>(i % s.marker.size())]);
    clean_rows.push_back(s.clean_order[static_cast<std::size_t>(i % s.clean.size())]);
  }
  RngStream rng = RngStream(s.config.seed, kStepStream).derive(static_cast<std::uint64_t>(s.step));
  std::vector<int> marker_flips(marker_rows.size(), 0), clean_flips(clean_rows.size(), 0);
  if (s.config.flips) {
    for (auto& f : marker_flips) f = static_cast<int>(rng.uniform_int(0, 3));
    for (auto& f : clean_flips) f = static_cast<int>(rng.uniform_int(0, 3));
  }
  const auto real_marker = s.marker.batch(marker_rows, marker_flips, s.dtype);
  const auto real_clean = s.clean.batch(clean_rows, clean_flips, s.dtype);
  auto& b = s.bundle;
  b.train(true);
  const double lambda = b.config.lambda_cycle;

  s.gen_opt->zero_grad();
  auto fake_clean = model::generator_forward(b.remover, real_marker);
  auto rec_marker = model::generator_forward(b.adder, fake_clean);
  auto g_adv = model::generator_adversarial_loss(model::discriminator_forward(b.clean_critic, fake_clean));
  auto g_cyc = model::cycle_loss(real_marker, rec_marker, lambda);
  torch::Tensor fake_marker;
  if (b.config.full_cyclegan) {
    fake_marker = model::generator_forward(b.adder, real_clean);
    auto rec_clean = model::generator_forward(b.remover, fake_marker);
    g_adv = g_adv + model::generator_adversarial_loss(model::discriminator_forward(b.marker_critic, fake_marker));
    g_cyc = g_cyc + model::cycle_loss(real_clean, rec_clean, lambda);
  }
  (g_adv + g_cyc).backward();

  auto critic_fakes = fake_clean.detach();
  if (s.config.history_size > 0) {
    std::vector<torch::Tensor> chosen;
    for (long i = 0; i < critic_fakes.size(0); ++i) {
      auto item = critic_fakes[i].clone();
      if (static_cast<int>(s.history.size()) < s.config.history_size) {
        s.history.push_back(item);
        chosen.push_back(item);
      } else if (rng.bernoulli(0.5)) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, s.config.history_size - 1));
        chosen.push_back(s.history[j]);
        s.history[j] = item;
      } else {
        chosen.push_back(item);
      }
    }
    critic_fakes = torch::stack(chosen);
  }

  s.disc_opt->zero_grad();
  auto d_loss = model::discriminator_loss(model::discriminator_forward(b.clean_critic, real_clean),
                                          model::discriminator_forward(b.clean_critic, critic_fakes));
  if (b.config.full_cyclegan) {
    d_loss = d_loss + model::discriminator_loss(model::discriminator_forward(b.marker_critic, real_marker),
                                                model::discriminator_forward(b.marker_critic, fake_marker.detach()));
  }
  d_loss.backward();

  if (!finite(g_adv) || !finite(g_cyc) || !finite(d_loss)) {
    if (!s.out_dir.empty()) {
      fs::create_directories(s.out_dir);
      save_checkpoint(s.out_dir / "diagnostic.pt");
    }
    throw TrainingDiverged("non-finite loss at step " + std::to_string(s.step));
  }
  s.gen_opt->step();
  s.disc_opt->step();

  LossRecord record{s.step, d_loss.item<double>(), g_adv.item<double>(), g_cyc.item<double>()};
  s.log.push_back(record);
  ++s.step;
  return record;
}

void Trainer::run(std::optional<std::int64_t> stop_step) {
  auto& s = *state_;
  const auto stop = std::min(stop_step.value_or(total_steps()), total_steps());
  const auto per_epoch = steps_per_epoch();
  if (!s.out_dir.empty()) fs::create_directories(s.out_dir);
  while (s.step < stop) {
    const auto r = train_step();
    if (s.step % std::max<std::int64_t>(1, per_epoch / 4) == 0 || s.step == stop) {
      std::ostringstream msg;
      msg << "step " << s.step << "/" << total_steps() << " loss_D " << r.loss_d << " loss_G_adv "
          << r.loss_g_adv << " loss_cyc " << r.loss_cyc;
      log::info(msg.str());
    }
    if (s.out_dir.empty()) continue;
    if (s.step % per_epoch == 0 && s.config.checkpoint_every > 0) {
      const auto epoch = s.step / per_epoch;
      if (epoch % s.config.checkpoint_every == 0) {
        std::ostringstream name;
        name << "checkpoint_epoch_" << std::setw(4) << std::setfill('0') << epoch << ".pt";
        save_checkpoint(s.out_dir / name.str());
      }
    }
  }
  if (!s.out_dir.empty()) {
    write_loss_csv(s.log, s.out_dir / "loss_log.csv");
    if (finished()) save_checkpoint(s.out_dir / "final.pt");
  }
}

void Trainer::save_checkpoint(const fs::path& path) const {
  const auto& s = *state_;
  torch::serialize::OutputArchive archive;
  nlohmann::json meta;
  meta["model"] = s.bundle.config.to_json();
  meta["dtype"] = s.dtype == torch::kFloat64 ? "float64" : "float32";
  meta["training"] = s.config.to_json();
  meta["step"] = s.step;
  meta["total_steps"] = total_steps();
  meta["lr"] = {{"generators", optimizer_lr(*s.gen_opt)}, {"critics", optimizer_lr(*s.disc_opt)}};
  model::write_meta(archive, meta, kTrainingKind);
  model::write_bundle(archive, s.bundle);

  torch::serialize::OutputArchive gen_state, disc_state;
  s.gen_opt->save(gen_state);
  s.disc_opt->save(disc_state);
  archive.write("optim_gen", gen_state);
  archive.write("optim_disc", disc_state);

  auto log_tensor = torch::zeros({static_cast<long>(s.log.size()), 4}, torch::kFloat64);
  for (std::size_t i = 0; i < s.log.size(); ++i) {
    const auto& r = s.log[i];
    log_tensor[static_cast<long>(i)] = torch::tensor(
        {static_cast<double>(r.step), r.loss_d, r.loss_g_adv, r.loss_cyc}, torch::kFloat64);
  }
  archive.write("loss_log", log_tensor);
  if (!s.history.empty()) archive.write("history", torch::stack(s.history));

  const auto tmp = path.string() + ".tmp";
  try {
    archive.save_to(tmp);
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  fs::rename(tmp, path);
}

Trainer Trainer::resume(const fs::path& checkpoint, TrainConfig config, PatchPool marker, PatchPool clean,
                        const model::ModelConfig* expected) {
  torch::serialize::InputArchive archive;
  model::load_archive(archive, checkpoint);
  const auto meta = model::read_meta(archive, kTrainingKind);
  if (!meta.contains("step") || !meta.contains("training")) {
    throw CheckpointError("checkpoint carries no training state: " + checkpoint.string());
  }
  auto bundle = model::read_bundle(archive, meta, expected);
  Trainer trainer(std::move(bundle), std::move(config), std::move(marker), std::move(clean));
  auto& s = *trainer.state_;
  try {
    torch::serialize::InputArchive gen_state, disc_state;
    archive.read("optim_gen", gen_state);
    archive.read("optim_disc", disc_state);
    s.gen_opt->load(gen_state);
    s.disc_opt->load(disc_state);
  } catch (const c10::Error& e) {
    throw CheckpointError(std::string("checkpoint optimizer state unreadable: ") + e.what_without_backtrace());
  }
  s.step = meta.at("step").get<std::int64_t>();
  torch::Tensor log_tensor;
  if (!archive.try_read("loss_log", log_tensor)) throw CheckpointError("checkpoint lacks the loss log");
  auto acc = log_tensor.accessor<double, 2>();
  for (long i = 0; i < log_tensor.size(0); ++i) {
    s.log.push_back({static_cast<std::int64_t>(acc[i][0]), acc[i][1], acc[i][2], acc[i][3]});
  }
  torch::Tensor history;
  if (archive.try_read("history", history)) {
    for (long i = 0; i < history.size(0); ++i) s.history.push_back(history[i].clone());
  }
  if (s.step > trainer.total_steps()) {
    throw CheckpointError("checkpoint step " + std::to_string(s.step) + " exceeds the configured schedule");
  }
  return trainer;
}

std::pair<double, double> checkpoint_learning_rates(const fs::path& checkpoint) {
  const auto meta = model::peek_meta(checkpoint, kTrainingKind);
  if (!meta.contains("lr")) throw CheckpointError("checkpoint carries no optimizer settings");
  return {meta["lr"].at("generators").get<double>(), meta["lr"].at("critics").get<double>()};
}

}  // namespace inkless::training
