#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vdgpt/service.hpp"

namespace vdgpt::service {

namespace {

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_atomic(const std::filesystem::path& p, const std::string& bytes) {
  const auto tmp = p.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f || !f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
      throw Error(ErrorCode::kIoError, "cannot write " + tmp);
    }
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace

PlanStore::PlanStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "objects");
  load_index();
}

void PlanStore::load_index() {
  const auto path = root_ / "index.json";
  if (!std::filesystem::exists(path)) return;
  try {
    const auto doc = nlohmann::json::parse(read_file(path));
    for (const auto& [id, e] : doc.at("plans").items()) {
      index_[id] = {e.at("object").get<std::string>(), e.at("version").get<int>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("corrupt store index: ") + e.what(), path.string());
  }
}

void PlanStore::save_index() const {
  nlohmann::ordered_json doc;
  doc["plans"] = nlohmann::ordered_json::object();
  for (const auto& [id, e] : index_) doc["plans"][id] = {{"version", e.version}, {"object", e.object}};
  write_atomic(root_ / "index.json", doc.dump(2) + "\n");
}

std::optional<PlanStore::Entry> PlanStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return Entry{read_file(root_ / "objects" / (it->second.object + ".json")), it->second.version};
}

int PlanStore::put(const std::string& id, const std::string& bytes, std::optional<int> expected_version,
                   std::optional<int>* conflict) {
  std::lock_guard lock(mutex_);
  auto it = index_.find(id);
  const int current = it == index_.end() ? 0 : it->second.version;
  if (expected_version && *expected_version != current) {
    if (conflict) *conflict = current;
    return current;
  }
  const std::string object = fnv1a_hex(bytes);
  const auto path = root_ / "objects" / (object + ".json");
  if (!std::filesystem::exists(path)) write_atomic(path, bytes);
  index_[id] = {object, current + 1};
  save_index();
  return current + 1;
}

std::vector<std::pair<std::string, int>> PlanStore::list() const {
  std::lock_guard lock(mutex_);
  std::vector<std::pair<std::string, int>> out;
  for (const auto& [id, e] : index_) out.emplace_back(id, e.version);
  return out;
}

}  // namespace vdgpt::service
