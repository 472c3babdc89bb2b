#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "newsrecon/article.hpp"
#include "newsrecon/config.hpp"
#include "newsrecon/date.hpp"
#include "newsrecon/embedding.hpp"
#include "newsrecon/labeling.hpp"
#include "newsrecon/metrics.hpp"
#include "newsrecon/pipeline.hpp"
#include "newsrecon/text_embed.hpp"

// Synthetic news world for offline end-to-end runs. Towns are grouped into
// regions; each town has one event per week. Articles report an event and
// carry town and/or region keywords; a share of generic articles about
// foreign places sits near every town in caption space. Vectors are built as
// unit(location + event + time + noise) over fixed blocks of a 64-d space:
//   [0, 22)  location     [22, 24) keyword kind (region, town)
//   [24, 32) time of day  [32, 48) event identity  [48, 64) modality noise
namespace newsrecon::synth {

inline constexpr std::size_t kDim = 64;

struct WorldConfig {
  std::size_t n_towns = 50;
  std::size_t towns_per_region = 5;
  std::size_t n_weeks = 40;
  std::size_t n_articles = 2000;
  std::size_t n_train_images = 1200;
  std::size_t n_dev_images = 300;
  std::size_t n_test_images = 300;
  double zipf_exponent = 1.0;
  /// Share of articles whose keywords are [town, region], [town] only; the
  /// remainder carry only the region.
  double p_town_and_region = 0.55;
  double p_town_only = 0.25;
  /// Share of articles with generic captions (close to every town) tagged
  /// with foreign places; they are never relevant to a query image.
  double p_generic = 0.2;
  std::size_t n_foreign = 10;
  /// Share of images whose ground-truth date is known to the month only.
  double p_month_only = 0.1;
  int max_captions = 3;

  double w_location = 1.0;
  double w_event = 0.8;
  double w_image_time = 0.7;
  double w_caption_time = 0.0;
  double shared_noise = 1.5;
  double image_nuisance = 2.5;
  double caption_nuisance = 2.5;

  Date start{2021, 1, 4};
  std::uint64_t seed = 7;

  void validate() const;
};

struct World {
  WorldConfig cfg;
  CorpusStore corpus;
  std::vector<ImageRecord> images;
  EmbeddingMatrix image_embeddings{kDim};          // query images
  EmbeddingMatrix article_image_embeddings{kDim};  // keyed by article id
  EmbeddingMatrix caption_embeddings{kDim};        // keyed "article#i"
  /// Unit location vectors of every town and region name.
  EmbeddingMatrix places{kDim};
  std::vector<Gazetteer::Row> gazetteer;
};

World generate(const WorldConfig& cfg);

/// Time block of a date: cos/sin pairs at several periods.
std::vector<float> time_features(const Date& d);

/// Text encoder of the synthetic world. Location and event templates map onto
/// the same blocks as captions; other text falls back to the fake embedder.
class WorldTextEmbedder final : public TextEmbedder {
 public:
  explicit WorldTextEmbedder(EmbeddingMatrix places);
  std::size_t dim() const override { return kDim; }
  std::vector<float> embed(const std::string& text) const override;

 private:
  /// Sum of known place vectors; false when no name is known.
  bool add_places(const std::vector<std::string>& names, std::vector<float>& out) const;

  EmbeddingMatrix places_;
  std::map<std::string, std::size_t> by_name_;
};

/// In-memory dataset over a copy of the world, labelled with the given window.
Dataset to_dataset(const World& world, int n_window = 7);

/// Engine settings for the synthetic world: the default stage layout with
/// epochs, batch sizes and learning rates scaled to its size.
Config scaled_config(std::uint64_t seed = 7);

/// Writes corpus.jsonl, images.jsonl, labels.jsonl, the NREC matrices,
/// places.nrec and gazetteer.csv.
void write_world(const World& world, const std::filesystem::path& dir, int n_window = 7);

}  // namespace newsrecon::synth
