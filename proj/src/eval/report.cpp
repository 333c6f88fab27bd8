#include "inkless/eval/report.hpp"

#include <cmath>

#include "inkless/core/error.hpp"
#include "inkless/eval/gradient.hpp"

namespace inkless::eval {

using json = nlohmann::json;

double BlindConfusion::corrected_as_original_rate() const noexcept {
  const long n = corrected_as_original + corrected_as_corrected;
  return n == 0 ? 0.0 : static_cast<double>(corrected_as_original) / static_cast<double>(n);
}

double BlindConfusion::clean_as_corrected_rate() const noexcept {
  const long n = clean_as_original + clean_as_corrected;
  return n == 0 ? 0.0 : static_cast<double>(clean_as_corrected) / static_cast<double>(n);
}

json reference_values() {
  return {
      {"fooling_rate",
       {{"overall", {{"small_model", 0.96}, {"large_model", 0.97}}},
        {"small_model", {{"black", 0.98}, {"green", 0.94}, {"blue", 0.96}, {"opaque", 0.97}}},
        {"large_model", {{"black", 0.98}, {"green", 0.93}, {"blue", 0.98}, {"opaque", 0.98}}}}},
      {"grad_corr",
       {{"non_opaque", {{"mean", 0.93}, {"std", 0.02}, {"min", 0.83}, {"max", 0.97}}},
        {"black", {{"mean", 0.95}, {"std", 0.02}}},
        {"blue", {{"mean", 0.93}, {"std", 0.02}}},
        {"green", {{"mean", 0.92}, {"std", 0.03}}},
        {"opaque", {{"mean", 0.61}, {"std", 0.21}}}}},
      {"nuclei",
       json::array({{{"slide", 1}, {"before", 385314}, {"after", 461880}, {"revived", 76566}},
                    {{"slide", 2}, {"before", 205608}, {"after", 290564}, {"revived", 84956}},
                    {{"slide", 3}, {"before", 130292}, {"after", 184489}, {"revived", 54197}},
                    {{"slide", 4}, {"before", 314552}, {"after", 387201}, {"revived", 72649}},
                    {{"slide", 5}, {"before", 215444}, {"after", 310112}, {"revived", 94668}}})},
      {"blind_test",
       {{"n", 100},
        {"patch_size", 500},
        {"corrected_as_original", 35},
        {"clean_as_corrected", 20},
        {"corrected_as_original_rate", 0.70},
        {"clean_as_corrected_rate", 0.40}}},
  };
}

namespace {

json category_json(const std::optional<InkCategory>& c) {
  return c ? json(std::string(to_string(*c))) : json(nullptr);
}

json rate_json(const RateSummary& r) {
  return {{"rate", r.rate()}, {"n", r.n}, {"n_clean", r.n_clean}};
}

json stats_json(const std::vector<double>& values, std::size_t undefined) {
  const auto s = summarize(values);
  json j = {{"n", s.n}, {"undefined", undefined}};
  if (s.n == 0) {
    j["mean"] = nullptr;
    j["std"] = nullptr;
    j["min"] = nullptr;
    j["max"] = nullptr;
  } else {
    j["mean"] = s.mean;
    j["std"] = s.std;
    j["min"] = s.min;
    j["max"] = s.max;
  }
  return j;
}

json fooling_section(const std::vector<FoolingEntry>& entries) {
  if (entries.empty()) throw ReportError("fooling section has no entries");
  const auto result = summarize_fooling(entries);
  json per_category = json::object();
  for (const auto& [c, r] : result.per_category) per_category[std::string(to_string(c))] = rate_json(r);
  json per_patch = json::array();
  for (const auto& e : entries) {
    per_patch.push_back(
        {{"id", e.id}, {"category", category_json(e.category)}, {"classified_clean", e.classified_clean}});
  }
  return {{"overall", rate_json(result.overall)}, {"per_category", per_category}, {"per_patch", per_patch}};
}

json grad_corr_section(const std::vector<GradCorrEntry>& entries) {
  if (entries.empty()) throw ReportError("grad_corr section has no entries");
  std::vector<double> all;
  std::size_t all_undefined = 0;
  std::map<InkCategory, std::pair<std::vector<double>, std::size_t>> by_cat;
  json rows = json::array();
  for (const auto& e : entries) {
    if (e.r && !(std::isfinite(*e.r) && *e.r >= -1.0 && *e.r <= 1.0)) {
      throw ReportError("correlation for " + e.id + " outside [-1,1]");
    }
    rows.push_back({{"id", e.id}, {"category", category_json(e.category)},
                    {"r", e.r ? json(*e.r) : json(nullptr)}});
    if (e.r) {
      all.push_back(*e.r);
    } else {
      ++all_undefined;
    }
    if (e.category) {
      auto& slot = by_cat[*e.category];
      if (e.r) {
        slot.first.push_back(*e.r);
      } else {
        ++slot.second;
      }
    }
  }
  json per_category = json::object();
  for (const auto& [c, v] : by_cat) per_category[std::string(to_string(c))] = stats_json(v.first, v.second);
  return {{"overall", stats_json(all, all_undefined)}, {"per_category", per_category}, {"entries", rows}};
}

json nuclei_section(const std::vector<NucleiEntry>& entries) {
  if (entries.empty()) throw ReportError("nuclei section has no entries");
  json rows = json::array();
  long before = 0, after = 0;
  for (const auto& e : entries) {
    if (e.revived != e.after - e.before) {
      throw ReportError("slide " + e.slide_id + ": revived must equal after - before");
    }
    if (e.before < 0 || e.after < 0) throw ReportError("nuclei counts must be non-negative");
    rows.push_back({{"slide_id", e.slide_id}, {"before", e.before}, {"after", e.after}, {"revived", e.revived}});
    before += e.before;
    after += e.after;
  }
  return {{"slides", rows}, {"total", {{"before", before}, {"after", after}, {"revived", after - before}}}};
}

json blind_section(const BlindConfusion& c) {
  for (long v : {c.clean_as_original, c.clean_as_corrected, c.corrected_as_original, c.corrected_as_corrected}) {
    if (v < 0) throw ReportError("confusion entries must be non-negative");
  }
  return {{"confusion",
           {{"clean_as_original", c.clean_as_original},
            {"clean_as_corrected", c.clean_as_corrected},
            {"corrected_as_original", c.corrected_as_original},
            {"corrected_as_corrected", c.corrected_as_corrected}}},
          {"n", c.total()},
          {"corrected_as_original_rate", c.corrected_as_original_rate()},
          {"clean_as_corrected_rate", c.clean_as_corrected_rate()}};
}

std::optional<InkCategory> category_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return parse_category(j.get<std::string>());
}

bool close(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return std::abs(a.get<double>() - b.get<double>()) <= 1e-9;
  if (a.is_object() && b.is_object()) {
    if (a.size() != b.size()) return false;
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key()) || !close(it.value(), b.at(it.key()))) return false;
    }
    return true;
  }
  if (a.is_array() && b.is_array()) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!close(a[i], b[i])) return false;
    }
    return true;
  }
  return a == b;
}

}  // namespace

json blind_test_section(const BlindConfusion& confusion) { return blind_section(confusion); }

json assemble_report(const ReportInputs& in) {
  if (!in.fooling && !in.grad_corr && !in.nuclei && !in.blind_test) {
    throw ReportError("a report needs at least one metric section");
  }
  json report = {{"schema_version", kReportSchemaVersion},
                 {"config", in.config},
                 {"checkpoint", in.checkpoint},
                 {"classifier_checkpoint", in.classifier_checkpoint}};
  report["fooling"] = in.fooling ? fooling_section(*in.fooling) : json(nullptr);
  report["grad_corr"] = in.grad_corr ? grad_corr_section(*in.grad_corr) : json(nullptr);
  report["nuclei"] = in.nuclei ? nuclei_section(*in.nuclei) : json(nullptr);
  report["blind_test"] = in.blind_test ? blind_section(*in.blind_test) : json(nullptr);
  report["reference"] = reference_values();
  return report;
}

void validate_report(const json& report) {
  try {
    if (!report.is_object()) throw ReportError("report must be a JSON object");
    if (report.value("schema_version", "") != kReportSchemaVersion) {
      throw ReportError("unsupported report schema_version");
    }
    for (const char* key : {"fooling", "grad_corr", "nuclei", "blind_test", "config", "reference"}) {
      if (!report.contains(key)) throw ReportError(std::string("report lacks '") + key + "'");
    }
    ReportInputs in;
    in.config = report.at("config");
    in.checkpoint = report.value("checkpoint", "");
    in.classifier_checkpoint = report.value("classifier_checkpoint", "");
    if (!report.at("fooling").is_null()) {
      std::vector<FoolingEntry> v;
      for (const auto& e : report.at("fooling").at("per_patch")) {
        v.push_back({e.at("id").get<std::string>(), category_from(e.at("category")),
                     e.at("classified_clean").get<bool>()});
      }
      in.fooling = std::move(v);
    }
    if (!report.at("grad_corr").is_null()) {
      std::vector<GradCorrEntry> v;
      for (const auto& e : report.at("grad_corr").at("entries")) {
        v.push_back({e.at("id").get<std::string>(), category_from(e.at("category")),
                     e.at("r").is_null() ? std::nullopt : std::optional<double>(e.at("r").get<double>())});
      }
      in.grad_corr = std::move(v);
    }
    if (!report.at("nuclei").is_null()) {
      std::vector<NucleiEntry> v;
      for (const auto& e : report.at("nuclei").at("slides")) {
        v.push_back({e.at("slide_id").get<std::string>(), e.at("before").get<long>(),
                     e.at("after").get<long>(), e.at("revived").get<long>()});
      }
      in.nuclei = std::move(v);
    }
    if (!report.at("blind_test").is_null()) {
      const auto& c = report.at("blind_test").at("confusion");
      in.blind_test = BlindConfusion{c.at("clean_as_original").get<long>(), c.at("clean_as_corrected").get<long>(),
                                     c.at("corrected_as_original").get<long>(),
                                     c.at("corrected_as_corrected").get<long>()};
    }
    const json rebuilt = assemble_report(in);
    for (const char* key : {"fooling", "grad_corr", "nuclei", "blind_test"}) {
      if (!close(rebuilt.at(key), report.at(key))) {
        throw ReportError(std::string("report section '") + key + "' is inconsistent with its entries");
      }
    }
  } catch (const json::exception& e) {
    throw ReportError(std::string("malformed report: ") + e.what());
  } catch (const FormatError& e) {
    throw ReportError(std::string("malformed report: ") + e.what());
  }
}

}  // namespace inkless::eval
