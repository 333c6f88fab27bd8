#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "inkless/eval/report.hpp"

namespace inkless::blindtest {

enum class Truth { OriginalClean, Corrected };
enum class Answer { Unanswered, OriginalClean, Corrected };

std::string to_string(Truth truth);
std::string to_string(Answer answer);
Answer parse_answer(const std::string& text);  // throws InputError; "unanswered" is not accepted

struct BlindItem {
  std::string item_id;
  std::filesystem::path patch_file;
  int crop_x = 0;
  int crop_y = 0;
  Truth truth = Truth::OriginalClean;
  Answer answer = Answer::Unanswered;
};

struct BlindSession {
  std::string session_id;
  int patch_size = 500;
  std::uint64_t seed = 0;
  std::vector<BlindItem> items;
  std::string created;
  std::string completed;  // empty until the last answer

  std::size_t answered() const noexcept;
  bool complete() const noexcept { return answered() == items.size(); }

  // Full record including truth; for persistence only.
  nlohmann::json to_json() const;
  static BlindSession from_json(const nlohmann::json& j);
  // What the UI may see while answering: ids, answers, progress. No truth.
  nlohmann::json public_view() const;
};

// Draws n/2 files from each pool without replacement, a crop origin per item,
// and shuffles presentation order, all from the seed. Throws ConfigError for
// odd or non-positive n and InputError when a pool is too small or a sampled
// image is smaller than the patch.
BlindSession create_session(const std::vector<std::filesystem::path>& clean_pool,
                            const std::vector<std::filesystem::path>& corrected_pool, int n,
                            int patch_size, std::uint64_t seed, const std::string& session_id);

// Throws NotFound for an unknown id and Conflict for an answered item.
void record_answer(BlindSession& session, const std::string& item_id, Answer answer);

// Throws IncompleteSession unless every item is answered or `partial` is set;
// partial reports count answered items only.
eval::BlindConfusion session_report(const BlindSession& session, bool partial = false);
nlohmann::json report_json(const BlindSession& session, bool partial = false);

// PNG of the item's crop.
std::vector<std::uint8_t> item_image(const BlindItem& item, int patch_size);

// Sessions persisted as <data_dir>/<session_id>.json, rewritten atomically on
// every change. Mutations of one session are serialized; reads take a shared lock.
class SessionStore {
 public:
  SessionStore(std::filesystem::path data_dir, std::vector<std::filesystem::path> clean_pool,
               std::vector<std::filesystem::path> corrected_pool);

  // Random seed when none is given.
  BlindSession create(int n, int patch_size, std::optional<std::uint64_t> seed = std::nullopt);
  BlindSession get(const std::string& session_id) const;
  nlohmann::json items(const std::string& session_id) const;
  std::vector<std::uint8_t> image(const std::string& item_id) const;
  BlindSession answer(const std::string& item_id, Answer answer);
  nlohmann::json report(const std::string& session_id, bool partial) const;
  std::size_t size() const;

 private:
  struct Entry {
    mutable std::shared_mutex mutex;
    BlindSession session;
  };
  std::shared_ptr<Entry> find(const std::string& session_id) const;
  void persist(const BlindSession& session) const;

  std::filesystem::path data_dir_;
  std::vector<std::filesystem::path> clean_pool_;
  std::vector<std::filesystem::path> corrected_pool_;
  mutable std::mutex index_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace inkless::blindtest
