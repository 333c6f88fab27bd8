#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "inkless/core/types.hpp"
#include "inkless/eval/fooling.hpp"

namespace inkless::eval {

inline constexpr const char* kReportSchemaVersion = "inkless-eval-report/1";

struct GradCorrEntry {
  std::string id;
  std::optional<InkCategory> category;
  std::optional<double> r;  // nullopt: undefined (constant gradient map)
};

struct NucleiEntry {
  std::string slide_id;
  long before = 0;
  long after = 0;
  long revived = 0;
};

// Blind-test 2x2 confusion: rows are truth, columns the expert's answer.
struct BlindConfusion {
  long clean_as_original = 0;
  long clean_as_corrected = 0;
  long corrected_as_original = 0;
  long corrected_as_corrected = 0;

  long total() const noexcept {
    return clean_as_original + clean_as_corrected + corrected_as_original + corrected_as_corrected;
  }
  double corrected_as_original_rate() const noexcept;
  double clean_as_corrected_rate() const noexcept;
};

struct ReportInputs {
  std::optional<std::vector<FoolingEntry>> fooling;
  std::optional<std::vector<GradCorrEntry>> grad_corr;
  std::optional<std::vector<NucleiEntry>> nuclei;
  std::optional<BlindConfusion> blind_test;
  nlohmann::json config = nlohmann::json::object();
  std::string checkpoint;
  std::string classifier_checkpoint;
};

// Builds the versioned JSON report. Aggregates are recomputed from the raw
// entries; throws ReportError when no section is present or an entry breaks
// an invariant (e.g. revived != after - before, r outside [-1, 1]).
nlohmann::json assemble_report(const ReportInputs& inputs);

// Structural + consistency validation of a report document; throws ReportError.
void validate_report(const nlohmann::json& report);

// The blind_test section: confusion, n and the two rates.
nlohmann::json blind_test_section(const BlindConfusion& confusion);

// Published reference values carried in every report for comparison.
nlohmann::json reference_values();

}  // namespace inkless::eval
