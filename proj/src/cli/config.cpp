#include "inkless/cli/config.hpp"

#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"

namespace inkless::cli {

using nlohmann::json;

namespace {

// Calls `assign(key, value)` for each member, turning type mismatches into ConfigError.
template <class Fn>
void each_key(const json& j, const std::string& section, Fn&& assign) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    try {
      if (!assign(it.key(), *it)) throw ConfigError("unknown key '" + section + "." + it.key() + "'");
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + section + "." + it.key() + "': " + e.what());
    }
  }
}

json hue_json(const segment::HueRule& r) {
  return {{"hue_lo", r.hue_lo}, {"hue_hi", r.hue_hi}, {"saturation_min", r.saturation_min}, {"value_max", r.value_max}};
}

segment::HueRule hue_from(const json& j, const std::string& section) {
  segment::HueRule r;
  each_key(j, section, [&](const std::string& k, const json& v) {
    if (k == "hue_lo") r.hue_lo = v.get<double>();
    else if (k == "hue_hi") r.hue_hi = v.get<double>();
    else if (k == "saturation_min") r.saturation_min = v.get<double>();
    else if (k == "value_max") r.value_max = v.get<double>();
    else return false;
    return true;
  });
  return r;
}

std::string gradient_mode_name(eval::GradientMode m) {
  return m == eval::GradientMode::Luminance ? "luminance" : "per_channel";
}

eval::GradientMode parse_gradient_mode(const std::string& s) {
  if (s == "luminance") return eval::GradientMode::Luminance;
  if (s == "per_channel") return eval::GradientMode::PerChannel;
  throw ConfigError("gradient_mode must be luminance or per_channel");
}

// Module configs carry their own seed; in the pipeline file only the global one exists.
json without_seed(json j) {
  j.erase("seed");
  return j;
}

void reject_seed(const json& j, const std::string& section) {
  if (j.is_object() && j.contains("seed")) {
    throw ConfigError("'" + section + ".seed' is not configurable; set the top-level seed");
  }
}

}  // namespace

void PipelineConfig::propagate() {
  sampler.seed = seed;
  sampler.jobs = jobs;
  training.seed = seed;
  evaluation.classifier.seed = seed;
}

void PipelineConfig::validate() const {
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  ink.thresholds.validate();
  if (ink.downsample < 1) throw ConfigError("ink.downsample must be >= 1");
  sampler.validate();
  model.validate();
  training.validate();
  if (restore.tile < model::kGeneratorMinSide || restore.tile % 4 != 0) {
    throw ConfigError("restore.tile must be a multiple of 4 and >= 8");
  }
  if (restore.stride < 1 || restore.stride > restore.tile) throw ConfigError("restore.stride must lie in [1, tile]");
  if (restore.batch < 1) throw ConfigError("restore.batch must be >= 1");
  evaluation.classifier.validate();
  if (evaluation.nuclei.min_area < 1) throw ConfigError("evaluation.nuclei.min_area must be >= 1");
  if (!(evaluation.nuclei.otsu_ceiling > evaluation.nuclei.min_hematoxylin)) {
    throw ConfigError("evaluation.nuclei.otsu_ceiling must exceed min_hematoxylin");
  }
  if (evaluation.nuclei.max_area < 0) throw ConfigError("evaluation.nuclei.max_area must be >= 0");
  if (evaluation.tissue_threshold < 0 || evaluation.tissue_threshold > 1) {
    throw ConfigError("evaluation.tissue_threshold must lie in [0, 1]");
  }
  if (blindtest.n < 2 || blindtest.n % 2 != 0) throw ConfigError("blindtest.n must be a positive even number");
  if (blindtest.patch_size < 1) throw ConfigError("blindtest.patch_size must be >= 1");
  if (blindtest.port < 0 || blindtest.port > 65535) throw ConfigError("blindtest.port out of range");
}

json to_json(const PipelineConfig& c) {
  const auto& t = c.ink.thresholds;
  const auto& s = c.sampler;
  const auto& n = c.evaluation.nuclei;
  return {
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"ink",
       {{"downsample", c.ink.downsample},
        {"dark_max", t.dark_max},
        {"green", hue_json(t.green)},
        {"blue", hue_json(t.blue)},
        {"close_radius", t.close_radius},
        {"min_area", t.min_area}}},
      {"sampler",
       {{"patch_size", s.patch_size},
        {"total_patches", s.total_patches},
        {"marker_fraction", s.marker_fraction},
        {"background_cap", s.background_cap},
        {"tissue_threshold", s.tissue_threshold},
        {"balance_tolerance", s.balance_tolerance},
        {"max_attempts_factor", s.max_attempts_factor}}},
      {"model", c.model.to_json()},
      {"training", without_seed(c.training.to_json())},
      {"restore", {{"tile", c.restore.tile}, {"stride", c.restore.stride}, {"batch", c.restore.batch}}},
      {"evaluation",
       {{"classifier", without_seed(c.evaluation.classifier.to_json())},
        {"nuclei",
         {{"min_area", n.min_area},
          {"max_area", n.max_area},
          {"min_hematoxylin", n.min_hematoxylin},
          {"otsu_ceiling", n.otsu_ceiling},
          {"split_dynamic", n.split_dynamic}}},
        {"gradient_mode", gradient_mode_name(c.evaluation.gradient_mode)},
        {"tissue_threshold", c.evaluation.tissue_threshold}}},
      {"blindtest",
       {{"n", c.blindtest.n},
        {"patch_size", c.blindtest.patch_size},
        {"host", c.blindtest.host},
        {"port", c.blindtest.port}}},
  };
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  each_key(j, "config", [&](const std::string& k, const json& v) {
    if (k == "seed") {
      c.seed = v.get<std::uint64_t>();
    } else if (k == "jobs") {
      c.jobs = v.get<int>();
    } else if (k == "ink") {
      auto& t = c.ink.thresholds;
      each_key(v, "ink", [&](const std::string& key, const json& x) {
        if (key == "downsample") c.ink.downsample = x.get<int>();
        else if (key == "dark_max") t.dark_max = x.get<double>();
        else if (key == "green") t.green = hue_from(x, "ink.green");
        else if (key == "blue") t.blue = hue_from(x, "ink.blue");
        else if (key == "close_radius") t.close_radius = x.get<int>();
        else if (key == "min_area") t.min_area = x.get<int>();
        else return false;
        return true;
      });
    } else if (k == "sampler") {
      auto& s = c.sampler;
      each_key(v, "sampler", [&](const std::string& key, const json& x) {
        if (key == "patch_size") s.patch_size = x.get<int>();
        else if (key == "total_patches") s.total_patches = x.get<std::size_t>();
        else if (key == "marker_fraction") s.marker_fraction = x.get<double>();
        else if (key == "background_cap") s.background_cap = x.get<double>();
        else if (key == "tissue_threshold") s.tissue_threshold = x.get<double>();
        else if (key == "balance_tolerance") s.balance_tolerance = x.get<double>();
        else if (key == "max_attempts_factor") s.max_attempts_factor = x.get<std::size_t>();
        else return false;
        return true;
      });
    } else if (k == "model") {
      json merged = c.model.to_json();
      merged.update(v);
      c.model = model::ModelConfig::from_json(merged);
    } else if (k == "training") {
      reject_seed(v, "training");
      json merged = c.training.to_json();
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (it.key() == "gen_optimizer" || it.key() == "disc_optimizer") {
          merged[it.key()].update(it.value());
        } else {
          merged[it.key()] = it.value();
        }
      }
      c.training = training::TrainConfig::from_json(merged);
    } else if (k == "restore") {
      each_key(v, "restore", [&](const std::string& key, const json& x) {
        if (key == "tile") c.restore.tile = x.get<int>();
        else if (key == "stride") c.restore.stride = x.get<int>();
        else if (key == "batch") c.restore.batch = x.get<int>();
        else return false;
        return true;
      });
    } else if (k == "evaluation") {
      auto& e = c.evaluation;
      each_key(v, "evaluation", [&](const std::string& key, const json& x) {
        if (key == "classifier") {
          reject_seed(x, "evaluation.classifier");
          json merged = e.classifier.to_json();
          merged.update(x);
          e.classifier = eval::ClassifierConfig::from_json(merged);
        } else if (key == "nuclei") {
          each_key(x, "evaluation.nuclei", [&](const std::string& nk, const json& nv) {
            if (nk == "min_area") e.nuclei.min_area = nv.get<int>();
            else if (nk == "max_area") e.nuclei.max_area = nv.get<int>();
            else if (nk == "min_hematoxylin") e.nuclei.min_hematoxylin = nv.get<double>();
            else if (nk == "otsu_ceiling") e.nuclei.otsu_ceiling = nv.get<double>();
            else if (nk == "split_dynamic") e.nuclei.split_dynamic = nv.get<double>();
            else return false;
            return true;
          });
        } else if (key == "gradient_mode") {
          e.gradient_mode = parse_gradient_mode(x.get<std::string>());
        } else if (key == "tissue_threshold") {
          e.tissue_threshold = x.get<double>();
        } else {
          return false;
        }
        return true;
      });
    } else if (k == "blindtest") {
      each_key(v, "blindtest", [&](const std::string& key, const json& x) {
        if (key == "n") c.blindtest.n = x.get<int>();
        else if (key == "patch_size") c.blindtest.patch_size = x.get<int>();
        else if (key == "host") c.blindtest.host = x.get<std::string>();
        else if (key == "port") c.blindtest.port = x.get<int>();
        else return false;
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
  c.propagate();
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::string dump_config(const PipelineConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace inkless::cli
