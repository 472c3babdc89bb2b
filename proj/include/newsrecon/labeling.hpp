#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsrecon/article.hpp"
#include "newsrecon/date.hpp"
#include "newsrecon/geo.hpp"

namespace newsrecon {

enum class Split { train, dev, test };
std::string to_string(Split s);
Split parse_split(std::string_view s);

/// A query image with its ground truth.
struct ImageRecord {
  std::string id;
  std::string gt_location;  // "city, region, country" style, possibly partial
  std::optional<GeoPoint> gt_coordinates;
  std::optional<PartialDate> gt_date;
  Split split = Split::train;

  void validate() const;
};

nlohmann::json to_json(const ImageRecord& r);
ImageRecord image_from_json(const nlohmann::json& j);
std::vector<ImageRecord> load_images(const std::filesystem::path& path);
void save_images(const std::vector<ImageRecord>& images, const std::filesystem::path& path);

/// Weak-supervision relevance sets for one image. event_relevant is always a
/// subset of location_relevant.
struct RelevanceLabels {
  std::string image_id;
  std::set<std::string> location_relevant;
  std::set<std::string> event_relevant;

  /// Throws when the subset invariant is broken.
  void check() const;
};

/// Normalized comma-separated components of a ground-truth location.
std::vector<std::string> location_tokens(std::string_view gt_location);

/// Articles with a geo keyword (normalized) containing any ground-truth
/// component as a substring.
std::set<std::string> label_location_relevant(const ImageRecord& image, std::span<const Article> articles);

/// Location-relevant articles published within +/- n_window days (inclusive).
/// Empty when the image date is not known to the day.
std::set<std::string> label_event_relevant(const ImageRecord& image, std::span<const Article> articles,
                                           int n_window);

RelevanceLabels make_labels(const ImageRecord& image, std::span<const Article> articles, int n_window);

class LabelStore {
 public:
  void put(RelevanceLabels labels);
  const RelevanceLabels* find(const std::string& image_id) const;
  const RelevanceLabels& at(const std::string& image_id) const;
  const std::map<std::string, RelevanceLabels>& all() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  /// Lines of {image_id, location_relevant: [...], event_relevant: [...]}.
  static LabelStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, RelevanceLabels> labels_;
};

/// Labels every image (in parallel) against the same article list.
LabelStore label_all(std::span<const ImageRecord> images, std::span<const Article> articles, int n_window);

}  // namespace newsrecon
