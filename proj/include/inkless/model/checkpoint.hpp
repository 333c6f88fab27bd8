#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "inkless/model/networks.hpp"

namespace inkless::model {

inline constexpr const char* kCheckpointFormat = "inkless-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// Parameters and buffers are stored under "<prefix>__<layer path>" with the
// module path separators spelled "__".
void write_module(torch::serialize::OutputArchive& archive, const std::string& prefix,
                  const torch::nn::Module& module);
// Throws CheckpointError on a missing tensor or a shape/dtype disagreement.
void read_module(torch::serialize::InputArchive& archive, const std::string& prefix,
                 torch::nn::Module& module);

// "meta" entry: JSON with format, version and kind plus caller fields.
void write_meta(torch::serialize::OutputArchive& archive, nlohmann::json meta,
                const std::string& kind);
// Throws CheckpointError if the format, version or kind do not match.
nlohmann::json read_meta(torch::serialize::InputArchive& archive, const std::string& kind);

void write_bundle(torch::serialize::OutputArchive& archive, const ModelBundle& bundle);
// Builds a bundle of the recorded architecture and fills it; throws
// CheckpointError when `expected` is given and disagrees with the recorded config.
ModelBundle read_bundle(torch::serialize::InputArchive& archive, const nlohmann::json& meta,
                        const ModelConfig* expected = nullptr);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path,
                 nlohmann::json extra = nlohmann::json::object());
ModelBundle load_bundle(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

// Reads only the metadata block of a checkpoint of the given kind.
nlohmann::json peek_meta(const std::filesystem::path& path, const std::string& kind);

void load_archive(torch::serialize::InputArchive& archive, const std::filesystem::path& path);

}  // namespace inkless::model
