#include "inkless/model/checkpoint.hpp"

#include "inkless/core/error.hpp"

namespace inkless::model {

namespace {

std::string key_for(const std::string& prefix, const std::string& name) {
  std::string out = prefix + "__";
  for (char c : name) {
    if (c == '.') {
      out += "__";
    } else {
      out += c;
    }
  }
  return out;
}

void read_into(torch::serialize::InputArchive& archive, const std::string& key, torch::Tensor& target,
               bool is_buffer) {
  torch::Tensor stored;
  if (!archive.try_read(key, stored, is_buffer)) {
    throw CheckpointError("checkpoint lacks tensor '" + key + "'");
  }
  if (stored.sizes() != target.sizes()) {
    throw CheckpointError("checkpoint tensor '" + key + "' has a different shape");
  }
  if (stored.scalar_type() != target.scalar_type()) {
    throw CheckpointError("checkpoint tensor '" + key + "' has a different dtype");
  }
  torch::NoGradGuard guard;
  target.copy_(stored);
}

}  // namespace

void write_module(torch::serialize::OutputArchive& archive, const std::string& prefix,
                  const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters(true)) {
    archive.write(key_for(prefix, p.key()), p.value().detach());
  }
  for (const auto& b : module.named_buffers(true)) {
    archive.write(key_for(prefix, b.key()), b.value(), /*is_buffer=*/true);
  }
}

void read_module(torch::serialize::InputArchive& archive, const std::string& prefix,
                 torch::nn::Module& module) {
  for (auto& p : module.named_parameters(true)) read_into(archive, key_for(prefix, p.key()), p.value(), false);
  for (auto& b : module.named_buffers(true)) read_into(archive, key_for(prefix, b.key()), b.value(), true);
}

void write_meta(torch::serialize::OutputArchive& archive, nlohmann::json meta, const std::string& kind) {
  meta["format"] = kCheckpointFormat;
  meta["version"] = kCheckpointVersion;
  meta["kind"] = kind;
  archive.write("meta", c10::IValue(meta.dump()));
}

nlohmann::json read_meta(torch::serialize::InputArchive& archive, const std::string& kind) {
  c10::IValue value;
  if (!archive.try_read("meta", value) || !value.isString()) {
    throw CheckpointError("checkpoint has no metadata block");
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(value.toStringRef());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata unreadable: ") + e.what());
  }
  if (meta.value("format", "") != kCheckpointFormat) throw CheckpointError("not an inkless checkpoint");
  if (meta.value("version", -1) != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + meta.value("version", nlohmann::json(-1)).dump() +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  if (meta.value("kind", "") != kind) {
    throw CheckpointError("checkpoint holds a '" + meta.value("kind", "") + "', expected '" + kind + "'");
  }
  return meta;
}

void write_bundle(torch::serialize::OutputArchive& archive, const ModelBundle& bundle) {
  write_module(archive, "g_rm", *bundle.remover);
  write_module(archive, "g_add", *bundle.adder);
  write_module(archive, "d_clean", *bundle.clean_critic);
  if (bundle.marker_critic) write_module(archive, "d_marker", *bundle.marker_critic);
}

ModelBundle read_bundle(torch::serialize::InputArchive& archive, const nlohmann::json& meta,
                        const ModelConfig* expected) {
  ModelConfig recorded;
  try {
    recorded = ModelConfig::from_json(meta.at("model"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint model config unreadable: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint model config invalid: ") + e.what());
  }
  if (expected && !(*expected == recorded)) {
    throw CheckpointError("checkpoint architecture " + recorded.to_json().dump() +
                          " does not match the requested " + expected->to_json().dump());
  }
  ModelBundle bundle(recorded, 0);
  const auto dtype = meta.value("dtype", std::string("float32"));
  if (dtype == "float64") bundle.to(torch::kFloat64);
  read_module(archive, "g_rm", *bundle.remover);
  read_module(archive, "g_add", *bundle.adder);
  read_module(archive, "d_clean", *bundle.clean_critic);
  if (bundle.marker_critic) read_module(archive, "d_marker", *bundle.marker_critic);
  return bundle;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path, nlohmann::json extra) {
  torch::serialize::OutputArchive archive;
  extra["model"] = bundle.config.to_json();
  extra["dtype"] = bundle.remover->parameters().front().scalar_type() == torch::kFloat64 ? "float64"
                                                                                          : "float32";
  write_meta(archive, std::move(extra), "cyclegan");
  write_bundle(archive, bundle);
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

void load_archive(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw CheckpointError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

ModelBundle load_bundle(const std::filesystem::path& path, const ModelConfig* expected) {
  torch::serialize::InputArchive archive;
  load_archive(archive, path);
  const auto meta = read_meta(archive, "cyclegan");
  return read_bundle(archive, meta, expected);
}

nlohmann::json peek_meta(const std::filesystem::path& path, const std::string& kind) {
  torch::serialize::InputArchive archive;
  load_archive(archive, path);
  return read_meta(archive, kind);
}

}  // namespace inkless::model
