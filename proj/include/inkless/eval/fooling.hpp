#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "inkless/core/raster.hpp"
#include "inkless/core/types.hpp"

namespace inkless::eval {

// Marker-vs-clean decision for a batch of patches.
class PatchClassifier {
 public:
  virtual ~PatchClassifier() = default;
  // true = classified as clean tissue.
  virtual std::vector<bool> classify_clean(const std::vector<RasterImage>& patches) const = 0;
};

// Degenerate classifier returning a fixed answer.
class ConstantClassifier final : public PatchClassifier {
 public:
  explicit ConstantClassifier(bool clean) : clean_(clean) {}
  std::vector<bool> classify_clean(const std::vector<RasterImage>& patches) const override {
    return std::vector<bool>(patches.size(), clean_);
  }

 private:
  bool clean_;
};

struct FoolingEntry {
  std::string id;
  std::optional<InkCategory> category;
  bool classified_clean = false;
};

struct RateSummary {
  std::size_t n = 0;
  std::size_t n_clean = 0;
  double rate() const noexcept { return n == 0 ? 0.0 : static_cast<double>(n_clean) / n; }
};

struct FoolingResult {
  RateSummary overall;
  std::map<InkCategory, RateSummary> per_category;
  std::vector<FoolingEntry> log;
};

// Fraction of (corrected, non-background) patches the classifier calls clean.
// ids/categories may be empty; throws InputError on empty input.
FoolingResult fooling_rate(const PatchClassifier& classifier, const std::vector<RasterImage>& patches,
                           const std::vector<std::string>& ids = {},
                           const std::vector<std::optional<InkCategory>>& categories = {});

FoolingResult summarize_fooling(std::vector<FoolingEntry> log);

}  // namespace inkless::eval
