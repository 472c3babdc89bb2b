#include "newsrecon/labeling.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include "newsrecon/error.hpp"
#include "newsrecon/log.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon {

using nlohmann::json;

void GeoPoint::validate() const {
  if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0))
    throw PreconditionError("coordinates out of range: (" + std::to_string(lat) + ", " + std::to_string(lon) + ")");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

void ImageRecord::validate() const {
  if (id.empty()) throw PreconditionError("image id is empty");
  if (gt_coordinates) gt_coordinates->validate();
}

json to_json(const ImageRecord& r) {
  json j = {{"id", r.id}, {"gt_location", r.gt_location}, {"split", to_string(r.split)}};
  if (r.gt_coordinates) j["gt_coordinates"] = {r.gt_coordinates->lat, r.gt_coordinates->lon};
  if (r.gt_date) j["gt_date"] = r.gt_date->str();
  return j;
}

ImageRecord image_from_json(const json& j) {
  try {
    ImageRecord r;
    r.id = j.at("id").get<std::string>();
    r.gt_location = j.value("gt_location", std::string());
    r.split = parse_split(j.value("split", std::string("train")));
    if (j.contains("gt_coordinates") && !j.at("gt_coordinates").is_null()) {
      const auto& c = j.at("gt_coordinates");
      if (!c.is_array() || c.size() != 2) throw FormatError("gt_coordinates must be [lat, lon]");
      r.gt_coordinates = GeoPoint{c.at(0).get<double>(), c.at(1).get<double>()};
    }
    if (j.contains("gt_date") && !j.at("gt_date").is_null()) {
      auto d = PartialDate::try_parse(j.at("gt_date").get<std::string>());
      if (!d) throw FormatError("invalid gt_date '" + j.at("gt_date").get<std::string>() + "'");
      r.gt_date = *d;
    }
    r.validate();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad image record: ") + e.what());
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("bad image record: ") + e.what());
  }
}

std::vector<ImageRecord> load_images(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open image file " + path.string());
  std::vector<ImageRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(image_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(out.back().id).second)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": duplicate image id '" + out.back().id + "'");
  }
  return out;
}

void save_images(const std::vector<ImageRecord>& images, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  for (const auto& r : images) out << to_json(r).dump() << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

void RelevanceLabels::check() const {
  for (const auto& id : event_relevant)
    if (!location_relevant.contains(id))
      throw Error("labels for '" + image_id + "': event-relevant article '" + id + "' is not location-relevant");
}

std::vector<std::string> location_tokens(std::string_view gt_location) {
  std::vector<std::string> tokens;
  for (const auto& part : text::split(gt_location, ',')) {
    auto t = text::normalize_loose(part);
    if (!t.empty() && std::find(tokens.begin(), tokens.end(), t) == tokens.end()) tokens.push_back(std::move(t));
  }
  return tokens;
}

std::set<std::string> label_location_relevant(const ImageRecord& image, std::span<const Article> articles) {
  if (text::trim(image.gt_location).empty())
    throw PreconditionError("image '" + image.id + "' has no ground-truth location");
  const auto tokens = location_tokens(image.gt_location);
  std::set<std::string> out;
  for (const auto& a : articles) {
    const bool hit = std::any_of(a.geo_keywords.begin(), a.geo_keywords.end(), [&](const std::string& kw) {
      const auto norm = text::normalize_loose(kw);
      return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) { return text::contains(norm, t); });
    });
    if (hit) out.insert(a.id);
  }
  return out;
}

namespace {

std::set<std::string> within_window(const ImageRecord& image, std::span<const Article> articles,
                                    const std::set<std::string>& location, int n_window) {
  std::set<std::string> out;
  const auto day = image.gt_date ? image.gt_date->full() : std::nullopt;
  if (!day) return out;
  for (const auto& a : articles) {
    if (!location.contains(a.id)) continue;
    if (std::llabs(days_between(*day, a.published_at)) <= n_window) out.insert(a.id);
  }
  return out;
}

}  // namespace

std::set<std::string> label_event_relevant(const ImageRecord& image, std::span<const Article> articles,
                                           int n_window) {
  if (!image.gt_date || !image.gt_date->full()) {
    log::info("image '" + image.id + "' has no day-precision date; no event labels");
    return {};
  }
  return within_window(image, articles, label_location_relevant(image, articles), n_window);
}

RelevanceLabels make_labels(const ImageRecord& image, std::span<const Article> articles, int n_window) {
  RelevanceLabels l;
  l.image_id = image.id;
  l.location_relevant = label_location_relevant(image, articles);
  l.event_relevant = within_window(image, articles, l.location_relevant, n_window);
  l.check();
  return l;
}

void LabelStore::put(RelevanceLabels labels) {
  labels.check();
  const std::string id = labels.image_id;
  labels_.insert_or_assign(id, std::move(labels));
}

const RelevanceLabels* LabelStore::find(const std::string& image_id) const {
  const auto it = labels_.find(image_id);
  return it == labels_.end() ? nullptr : &it->second;
}

const RelevanceLabels& LabelStore::at(const std::string& image_id) const {
  if (const auto* l = find(image_id)) return *l;
  throw LookupError("no relevance labels for image '" + image_id + "'");
}

LabelStore LabelStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file " + path.string());
  LabelStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      RelevanceLabels l;
      l.image_id = j.at("image_id").get<std::string>();
      for (const auto& id : j.at("location_relevant")) l.location_relevant.insert(id.get<std::string>());
      for (const auto& id : j.at("event_relevant")) l.event_relevant.insert(id.get<std::string>());
      store.put(std::move(l));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return store;
}

void LabelStore::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  for (const auto& [id, l] : labels_) {
    const json j = {{"image_id", id}, {"location_relevant", l.location_relevant}, {"event_relevant", l.event_relevant}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error("cannot write " + path.string());
}

LabelStore label_all(std::span<const ImageRecord> images, std::span<const Article> articles, int n_window) {
  std::vector<RelevanceLabels> labels(images.size());
  const auto n = static_cast<std::int64_t>(images.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& img = images[static_cast<std::size_t>(i)];
    if (text::trim(img.gt_location).empty()) {
      labels[static_cast<std::size_t>(i)].image_id = img.id;
      continue;
    }
    labels[static_cast<std::size_t>(i)] = make_labels(img, articles, n_window);
  }
  LabelStore store;
  for (auto& l : labels) store.put(std::move(l));
  return store;
}

}  // namespace newsrecon
