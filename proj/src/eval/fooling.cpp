#include "inkless/eval/fooling.hpp"

#include "inkless/core/error.hpp"

namespace inkless::eval {

FoolingResult summarize_fooling(std::vector<FoolingEntry> log) {
  FoolingResult r;
  for (const auto& e : log) {
    ++r.overall.n;
    r.overall.n_clean += e.classified_clean;
    if (e.category) {
      auto& c = r.per_category[*e.category];
      ++c.n;
      c.n_clean += e.classified_clean;
    }
  }
  r.log = std::move(log);
  return r;
}

FoolingResult fooling_rate(const PatchClassifier& classifier, const std::vector<RasterImage>& patches,
                           const std::vector<std::string>& ids,
                           const std::vector<std::optional<InkCategory>>& categories) {
  if (patches.empty()) throw InputError("fooling_rate needs at least one patch");
  if (!ids.empty() && ids.size() != patches.size()) throw InputError("ids/patches length mismatch");
  if (!categories.empty() && categories.size() != patches.size()) {
    throw InputError("categories/patches length mismatch");
  }
  const auto decisions = classifier.classify_clean(patches);
  if (decisions.size() != patches.size()) throw InputError("classifier returned wrong count");
  std::vector<FoolingEntry> log;
  log.reserve(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    log.push_back(FoolingEntry{ids.empty() ? std::to_string(i) : ids[i],
                               categories.empty() ? std::nullopt : categories[i],
                               static_cast<bool>(decisions[i])});
  }
  return summarize_fooling(std::move(log));
}

}  // namespace inkless::eval
