#include "inkless/blindtest/session.hpp"

#include <chrono>
#include <ctime>
#include <numeric>
#include <random>
#include <set>

#include "inkless/core/error.hpp"
#include "inkless/core/files.hpp"
#include "inkless/core/raster.hpp"
#include "inkless/core/rng.hpp"

namespace inkless::blindtest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kCleanPickStream = 0x424c4331ULL;
constexpr std::uint64_t kCorrectedPickStream = 0x424c4332ULL;
constexpr std::uint64_t kOrderStream = 0x424c4f52ULL;

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string random_hex(std::size_t chars) {
  static std::mutex mutex;
  static std::mt19937_64 engine{std::random_device{}()};
  std::lock_guard lock(mutex);
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  while (out.size() < chars) {
    auto v = engine();
    for (int i = 0; i < 16 && out.size() < chars; ++i, v >>= 4) out += digits[v & 0xf];
  }
  return out;
}

Truth parse_truth(const std::string& text) {
  if (text == "original_clean") return Truth::OriginalClean;
  if (text == "corrected") return Truth::Corrected;
  throw FormatError("unknown truth value '" + text + "'");
}

}  // namespace

std::string to_string(Truth truth) { return truth == Truth::OriginalClean ? "original_clean" : "corrected"; }

std::string to_string(Answer answer) {
  switch (answer) {
    case Answer::OriginalClean: return "original_clean";
    case Answer::Corrected: return "corrected";
    case Answer::Unanswered: break;
  }
  return "unanswered";
}

Answer parse_answer(const std::string& text) {
  if (text == "original_clean") return Answer::OriginalClean;
  if (text == "corrected") return Answer::Corrected;
  throw InputError("answer must be original_clean or corrected, got '" + text + "'");
}

std::size_t BlindSession::answered() const noexcept {
  std::size_t n = 0;
  for (const auto& item : items) n += item.answer != Answer::Unanswered;
  return n;
}

json BlindSession::to_json() const {
  json rows = json::array();
  for (const auto& item : items) {
    rows.push_back({{"item_id", item.item_id},
                    {"patch_file", item.patch_file.string()},
                    {"crop_x", item.crop_x},
                    {"crop_y", item.crop_y},
                    {"truth", to_string(item.truth)},
                    {"answer", to_string(item.answer)}});
  }
  return {{"session_id", session_id}, {"patch_size", patch_size}, {"seed", seed},
          {"created", created},       {"completed", completed},   {"items", rows}};
}

BlindSession BlindSession::from_json(const json& j) {
  try {
    BlindSession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.patch_size = j.at("patch_size").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.created = j.at("created").get<std::string>();
    s.completed = j.at("completed").get<std::string>();
    for (const auto& row : j.at("items")) {
      BlindItem item;
      item.item_id = row.at("item_id").get<std::string>();
      item.patch_file = row.at("patch_file").get<std::string>();
      item.crop_x = row.at("crop_x").get<int>();
      item.crop_y = row.at("crop_y").get<int>();
      item.truth = parse_truth(row.at("truth").get<std::string>());
      const auto answer = row.at("answer").get<std::string>();
      item.answer = answer == "unanswered" ? Answer::Unanswered : parse_answer(answer);
      s.items.push_back(std::move(item));
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed session record: ") + e.what());
  } catch (const InputError& e) {
    throw FormatError(std::string("malformed session record: ") + e.what());
  }
}

json BlindSession::public_view() const {
  json rows = json::array();
  for (const auto& item : items) {
    rows.push_back({{"item_id", item.item_id},
                    {"answer", item.answer == Answer::Unanswered ? json(nullptr) : json(to_string(item.answer))}});
  }
  return {{"session_id", session_id}, {"n", items.size()}, {"patch_size", patch_size},
          {"answered", answered()},   {"complete", complete()}, {"items", rows}};
}

BlindSession create_session(const std::vector<fs::path>& clean_pool, const std::vector<fs::path>& corrected_pool,
                            int n, int patch_size, std::uint64_t seed, const std::string& session_id) {
  if (n <= 0 || n % 2 != 0) throw ConfigError("blind-test size must be a positive even number, got " + std::to_string(n));
  if (patch_size < 1) throw ConfigError("patch_size must be >= 1");
  const auto half = static_cast<std::size_t>(n / 2);
  if (clean_pool.size() < half) {
    throw InputError("clean pool has " + std::to_string(clean_pool.size()) + " patches, need " + std::to_string(half));
  }
  if (corrected_pool.size() < half) {
    throw InputError("corrected pool has " + std::to_string(corrected_pool.size()) + " patches, need " +
                     std::to_string(half));
  }

  BlindSession session;
  session.session_id = session_id;
  session.patch_size = patch_size;
  session.seed = seed;
  session.created = utc_now();

  auto draw = [&](const std::vector<fs::path>& pool, Truth truth, std::uint64_t stream) {
    RngStream rng(seed, stream);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < half; ++i) {
      const auto& file = pool[order[i]];
      const auto image = load_raster(file);
      if (image.width() < patch_size || image.height() < patch_size) {
        throw InputError(file.string() + " is smaller than the " + std::to_string(patch_size) + " px patch");
      }
      BlindItem item;
      item.patch_file = file;
      item.crop_x = static_cast<int>(rng.uniform_int(0, image.width() - patch_size));
      item.crop_y = static_cast<int>(rng.uniform_int(0, image.height() - patch_size));
      item.truth = truth;
      session.items.push_back(std::move(item));
    }
  };
  draw(clean_pool, Truth::OriginalClean, kCleanPickStream);
  draw(corrected_pool, Truth::Corrected, kCorrectedPickStream);
  RngStream(seed, kOrderStream).shuffle(session.items);

  // Item ids are random tokens so nothing about an id hints at its source.
  std::set<std::string> used;
  for (auto& item : session.items) {
    do {
      item.item_id = session_id + "." + random_hex(12);
    } while (!used.insert(item.item_id).second);
  }
  return session;
}

void record_answer(BlindSession& session, const std::string& item_id, Answer answer) {
  if (answer == Answer::Unanswered) throw InputError("cannot record an empty answer");
  for (auto& item : session.items) {
    if (item.item_id != item_id) continue;
    if (item.answer != Answer::Unanswered) throw Conflict("item " + item_id + " is already answered");
    item.answer = answer;
    if (session.complete()) session.completed = utc_now();
    return;
  }
  throw NotFound("no item " + item_id + " in session " + session.session_id);
}

eval::BlindConfusion session_report(const BlindSession& session, bool partial) {
  if (!partial && !session.complete()) {
    throw IncompleteSession("session " + session.session_id + " has " +
                            std::to_string(session.items.size() - session.answered()) + " unanswered items");
  }
  eval::BlindConfusion c;
  for (const auto& item : session.items) {
    if (item.answer == Answer::Unanswered) continue;
    const bool said_original = item.answer == Answer::OriginalClean;
    if (item.truth == Truth::OriginalClean) {
      (said_original ? c.clean_as_original : c.clean_as_corrected)++;
    } else {
      (said_original ? c.corrected_as_original : c.corrected_as_corrected)++;
    }
  }
  return c;
}

json report_json(const BlindSession& session, bool partial) {
  auto out = eval::blind_test_section(session_report(session, partial));
  out["session_id"] = session.session_id;
  out["items"] = session.items.size();
  out["complete"] = session.complete();
  return out;
}

std::vector<std::uint8_t> item_image(const BlindItem& item, int patch_size) {
  const auto image = load_raster(item.patch_file);
  return encode_png(crop(image, item.crop_x, item.crop_y, patch_size, patch_size));
}

SessionStore::SessionStore(fs::path data_dir, std::vector<fs::path> clean_pool, std::vector<fs::path> corrected_pool)
    : data_dir_(std::move(data_dir)), clean_pool_(std::move(clean_pool)), corrected_pool_(std::move(corrected_pool)) {
  fs::create_directories(data_dir_);
  for (const auto& file : list_files(data_dir_, ".json")) {
    auto entry = std::make_shared<Entry>();
    entry->session = BlindSession::from_json(json::parse(read_text(file)));
    sessions_[entry->session.session_id] = entry;
  }
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& session_id) const {
  std::lock_guard lock(index_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw NotFound("no session " + session_id);
  return it->second;
}

void SessionStore::persist(const BlindSession& session) const {
  write_text_atomic(data_dir_ / (session.session_id + ".json"), session.to_json().dump(2));
}

BlindSession SessionStore::create(int n, int patch_size, std::optional<std::uint64_t> seed) {
  const auto resolved = seed ? *seed : std::random_device{}();
  std::string id;
  {
    std::lock_guard lock(index_mutex_);
    do {
      id = random_hex(16);
    } while (sessions_.count(id));
  }
  auto entry = std::make_shared<Entry>();
  entry->session = create_session(clean_pool_, corrected_pool_, n, patch_size, resolved, id);
  persist(entry->session);
  std::lock_guard lock(index_mutex_);
  sessions_[id] = entry;
  return entry->session;
}

BlindSession SessionStore::get(const std::string& session_id) const {
  auto entry = find(session_id);
  std::shared_lock lock(entry->mutex);
  return entry->session;
}

json SessionStore::items(const std::string& session_id) const {
  auto entry = find(session_id);
  std::shared_lock lock(entry->mutex);
  return entry->session.public_view();
}

std::vector<std::uint8_t> SessionStore::image(const std::string& item_id) const {
  const auto dot = item_id.find('.');
  if (dot == std::string::npos) throw NotFound("no item " + item_id);
  auto entry = find(item_id.substr(0, dot));
  BlindItem item;
  int patch_size = 0;
  {
    std::shared_lock lock(entry->mutex);
    const auto& items = entry->session.items;
    auto it = std::find_if(items.begin(), items.end(), [&](const BlindItem& i) { return i.item_id == item_id; });
    if (it == items.end()) throw NotFound("no item " + item_id);
    item = *it;
    patch_size = entry->session.patch_size;
  }
  return item_image(item, patch_size);
}

BlindSession SessionStore::answer(const std::string& item_id, Answer answer) {
  const auto dot = item_id.find('.');
  if (dot == std::string::npos) throw NotFound("no item " + item_id);
  auto entry = find(item_id.substr(0, dot));
  std::unique_lock lock(entry->mutex);
  BlindSession updated = entry->session;
  record_answer(updated, item_id, answer);
  persist(updated);
  entry->session = updated;
  return updated;
}

json SessionStore::report(const std::string& session_id, bool partial) const {
  auto entry = find(session_id);
  std::shared_lock lock(entry->mutex);
  return report_json(entry->session, partial);
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(index_mutex_);
  return sessions_.size();
}

}  // namespace inkless::blindtest
