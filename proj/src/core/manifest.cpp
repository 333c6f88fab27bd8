#include "inkless/core/manifest.hpp"

#include <cmath>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"

namespace inkless {

using ojson = nlohmann::ordered_json;

bool canonical_less(const PatchRecord& a, const PatchRecord& b) noexcept {
  return std::tie(a.slide_id, a.x, a.y) < std::tie(b.slide_id, b.x, b.y);
}

std::size_t ManifestCounts::total() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, v] : per_label) n += v;
  return n;
}

std::size_t ManifestCounts::of(PatchLabel l) const noexcept {
  auto it = per_label.find(l);
  return it == per_label.end() ? 0 : it->second;
}

ManifestCounts tally(const std::vector<PatchRecord>& records) {
  ManifestCounts counts;
  for (auto l : kAllLabels) counts.per_label[l] = 0;
  for (const auto& r : records) {
    ++counts.per_label[r.label];
    ++counts.per_category[r.category][r.label];
  }
  return counts;
}

void DatasetManifest::check_invariants(double background_cap, double marker_fraction,
                                       double balance_tolerance) const {
  const auto actual = tally(records);
  if (!(actual == counts)) throw DataError("manifest counts disagree with its records");
  const double bg = static_cast<double>(counts.of(PatchLabel::CleanBackground));
  const double clean = static_cast<double>(counts.clean());
  if (bg > background_cap * clean) {
    throw DataError("background patches exceed " + std::to_string(background_cap) +
                    " of clean patches");
  }
  const double total = static_cast<double>(counts.total());
  const double marker = static_cast<double>(counts.of(PatchLabel::Marker));
  // Integer quotas can miss a fractional target by up to one record.
  const double slack = std::max(balance_tolerance * total, 1.0);
  if (std::abs(marker - marker_fraction * total) > slack) {
    throw DataError("marker/clean balance outside tolerance");
  }
}

namespace {

ojson counts_json(const ManifestCounts& counts) {
  ojson per_label = ojson::object();
  for (auto l : kAllLabels) per_label[std::string(to_string(l))] = counts.of(l);
  ojson per_category = ojson::object();
  for (auto c : kAllCategories) {
    auto it = counts.per_category.find(c);
    if (it == counts.per_category.end()) continue;
    ojson row = ojson::object();
    for (auto l : kAllLabels) {
      auto jt = it->second.find(l);
      row[std::string(to_string(l))] = jt == it->second.end() ? 0 : jt->second;
    }
    per_category[std::string(to_string(c))] = row;
  }
  return ojson{{"per_label", per_label}, {"per_category", per_category}};
}

}  // namespace

std::string to_jsonl(const DatasetManifest& manifest) {
  std::ostringstream out;
  ojson header = {{"seed", manifest.seed}, {"counts", counts_json(manifest.counts)}};
  out << header.dump() << '\n';
  for (const auto& r : manifest.records) {
    ojson row = {{"slide_id", r.slide_id},
                 {"x", r.x},
                 {"y", r.y},
                 {"size", r.size},
                 {"label", to_string(r.label)},
                 {"category", to_string(r.category)},
                 {"split", to_string(r.split)}};
    out << row.dump() << '\n';
  }
  return out.str();
}

DatasetManifest parse_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  DatasetManifest manifest;
  bool have_header = false;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto j = ojson::parse(line);
      if (!have_header) {
        if (!j.contains("seed")) throw FormatError("manifest header must carry a seed");
        manifest.seed = j.at("seed").get<std::uint64_t>();
        have_header = true;
        continue;
      }
      PatchRecord r;
      r.slide_id = j.at("slide_id").get<std::string>();
      r.x = j.at("x").get<int>();
      r.y = j.at("y").get<int>();
      r.size = j.at("size").get<int>();
      r.label = parse_label(j.at("label").get<std::string>());
      r.category = parse_category(j.at("category").get<std::string>());
      r.split = parse_split(j.at("split").get<std::string>());
      manifest.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw FormatError("manifest has no header line");
  manifest.counts = tally(manifest.records);
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_text_atomic(path, to_jsonl(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_jsonl(read_text(path));
}

}  // namespace inkless
