#include "newsrecon/rerank_loc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "newsrecon/binary_io.hpp"
#include "newsrecon/error.hpp"
#include "newsrecon/hash.hpp"
#include "newsrecon/log.hpp"
#include "newsrecon/text.hpp"

namespace newsrecon {
namespace {

constexpr std::uint16_t kScorerVersion = 1;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::set<std::string> keyword_set(const Article& a) {
  std::set<std::string> s;
  for (const auto& k : a.geo_keywords)
    if (auto n = text::normalize_space(text::to_lower(k)); !n.empty()) s.insert(std::move(n));
  return s;
}

}  // namespace

std::string Combiner::str() const {
  std::vector<std::string> parts;
  if (concatenation) parts.emplace_back("concatenation");
  if (multiplication) parts.emplace_back("multiplication");
  if (difference) parts.emplace_back("difference");
  return text::join(parts, "+");
}

Combiner Combiner::parse(std::string_view s) {
  Combiner c;
  for (auto part : text::split(s, '+')) {
    part = text::trim(part);
    if (part == "concatenation") c.concatenation = true;
    else if (part == "multiplication") c.multiplication = true;
    else if (part == "difference") c.difference = true;
    else throw ConfigError("unknown combiner '" + part + "' (use concatenation, multiplication, difference)");
  }
  if (c.parts() == 0) throw ConfigError("combiner must name at least one part");
  return c;
}

std::uint8_t Combiner::bits() const {
  return static_cast<std::uint8_t>((concatenation ? 1 : 0) | (multiplication ? 2 : 0) | (difference ? 4 : 0));
}

Combiner Combiner::from_bits(std::uint8_t b) { return {(b & 1) != 0, (b & 2) != 0, (b & 4) != 0}; }

CrossScorer CrossScorer::zeros(std::size_t dim, Combiner combiner) {
  if (dim == 0) throw PreconditionError("scorer dim must be positive");
  if (combiner.parts() == 0) throw PreconditionError("scorer needs at least one combiner part");
  CrossScorer s;
  s.dim = dim;
  s.combiner = combiner;
  s.weight.assign(s.feature_size(), 0.0f);
  return s;
}

void CrossScorer::validate() const {
  if (dim == 0 || combiner.parts() == 0) throw PreconditionError("scorer has no features");
  if (weight.size() != feature_size()) throw DimensionError("scorer weight length does not match its combiner");
  for (float w : weight)
    if (!std::isfinite(w)) throw PreconditionError("scorer has a non-finite weight");
  if (!std::isfinite(bias)) throw PreconditionError("scorer has a non-finite bias");
}

void CrossScorer::features(std::span<const float> image, std::span<const float> tmpl, std::span<double> out) const {
  if (image.size() != dim || tmpl.size() != dim)
    throw DimensionError("scorer expects dim " + std::to_string(dim) + ", got " + std::to_string(image.size()) +
                         " and " + std::to_string(tmpl.size()));
  std::size_t o = 0;
  if (combiner.concatenation) {
    for (std::size_t i = 0; i < dim; ++i) out[o++] = image[i];
    for (std::size_t i = 0; i < dim; ++i) out[o++] = tmpl[i];
  }
  if (combiner.multiplication)
    for (std::size_t i = 0; i < dim; ++i) out[o++] = static_cast<double>(image[i]) * tmpl[i];
  if (combiner.difference)
    for (std::size_t i = 0; i < dim; ++i) out[o++] = std::fabs(static_cast<double>(image[i]) - tmpl[i]);
}

double CrossScorer::logit(std::span<const float> image, std::span<const float> tmpl) const {
  std::vector<double> f(feature_size());
  features(image, tmpl, f);
  double z = bias;
  for (std::size_t i = 0; i < f.size(); ++i) z += weight[i] * f[i];
  return z;
}

float CrossScorer::score(std::span<const float> image, std::span<const float> tmpl) const {
  const float s = static_cast<float>(sigmoid(logit(image, tmpl)));
  return std::clamp(s, std::nextafter(0.0f, 1.0f), std::nextafter(1.0f, 0.0f));
}

float score_location(std::span<const float> image, std::span<const float> tmpl, const CrossScorer& scorer) {
  return scorer.score(image, tmpl);
}

std::vector<std::byte> encode_scorer(const CrossScorer& s, std::string_view magic) {
  s.validate();
  io::ByteWriter w;
  w.put_magic(magic);
  w.put_u16(kScorerVersion);
  w.put_u32(static_cast<std::uint32_t>(s.dim));
  w.put_u8(s.combiner.bits());
  w.put_u64(s.config_hash);
  w.put_f32s(s.weight);
  w.put_f32(s.bias);
  w.put_checksum();
  return w.take();
}

CrossScorer decode_scorer(std::span<const std::byte> bytes, std::string_view magic, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic(magic);
  if (const auto v = r.u16(); v != kScorerVersion) r.fail("unsupported scorer version " + std::to_string(v));
  CrossScorer s;
  s.dim = r.u32();
  if (s.dim == 0) r.fail("zero scorer dimension");
  const auto bits = r.u8();
  if (bits == 0 || bits > 7) r.fail("invalid combiner bits " + std::to_string(bits));
  s.combiner = Combiner::from_bits(bits);
  s.config_hash = r.u64();
  s.weight.resize(s.feature_size());
  r.f32s(s.weight, "scorer weights");
  s.bias = r.f32();
  r.verify_checksum();
  r.expect_end();
  s.validate();
  return s;
}

CrossScorer load_scorer(const std::filesystem::path& path, std::string_view magic) {
  return decode_scorer(io::read_file(path), magic, path.string());
}

void save_scorer(const CrossScorer& s, const std::filesystem::path& path, std::string_view magic) {
  io::write_file(path, encode_scorer(s, magic));
}

std::string make_loc_template(const Article& article) {
  if (article.geo_keywords.empty()) return "An image from unknown location";
  return "An image from " + text::join(article.geo_keywords, ", ");
}

float combine_scores(float s_bi, float s_loc) { return std::max(s_bi, 0.0f) * s_loc; }

std::vector<ScoredArticle> rerank_by_location(std::vector<ScoredArticle> hits) {
  for (auto& h : hits) h.s_comb = combine_scores(h.s_bi, h.s_loc);
  std::sort(hits.begin(), hits.end(), [](const ScoredArticle& a, const ScoredArticle& b) {
    if (a.s_comb != b.s_comb) return a.s_comb > b.s_comb;
    if (a.s_bi != b.s_bi) return a.s_bi > b.s_bi;
    return a.article_id < b.article_id;
  });
  return hits;
}

std::vector<TemplatePair> sample_loc_training_pairs(const std::string& image_id, const std::vector<SearchHit>& hits,
                                                    const ArticleIndex& articles,
                                                    const RelevanceLabels& labels, int n_negative,
                                                    std::mt19937_64& rng) {
  std::vector<const Article*> relevant, irrelevant;
  for (const auto& h : hits) {
    const auto it = articles.find(h.article_id);
    if (it == articles.end()) throw LookupError("hit '" + h.article_id + "' is not in the corpus");
    if (labels.location_relevant.contains(h.article_id)) relevant.push_back(it->second);
    else if (!it->second->geo_keywords.empty()) irrelevant.push_back(it->second);
  }
  if (relevant.empty()) return {};
  std::vector<TemplatePair> out;
  std::uniform_int_distribution<std::size_t> pick(0, relevant.size() - 1);
  out.push_back({image_id, make_loc_template(*relevant[pick(rng)]), 1.0f});

  std::shuffle(irrelevant.begin(), irrelevant.end(), rng);
  std::set<std::set<std::string>> seen;
  for (const Article* a : irrelevant) {
    if (static_cast<int>(out.size()) - 1 >= n_negative) break;
    if (!seen.insert(keyword_set(*a)).second) continue;
    out.push_back({image_id, make_loc_template(*a), 0.0f});
  }
  return out;
}

void CrossTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("cross-encoder epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("cross-encoder learning rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("cross-encoder weight decay must be >= 0");
  if (batch_size < 1) throw ConfigError("cross-encoder batch size must be >= 1");
  if (top_k < 1) throw ConfigError("cross-encoder top-k must be >= 1");
  if (n_negative < 0) throw ConfigError("n_negative must be >= 0");
  if (combiner.parts() == 0) throw ConfigError("cross-encoder combiner is empty");
}

CrossTrainResult train_cross_scorer(const std::vector<PairExample>& pairs, std::size_t dim,
                                    const CrossTrainConfig& cfg, const ScorerEvaluator& evaluate) {
  cfg.validate();
  CrossTrainResult result;
  result.scorer = CrossScorer::zeros(dim, cfg.combiner);
  result.baseline_recall = evaluate ? evaluate(result.scorer) : 0.0;
  if (cfg.epochs == 0) return result;
  if (pairs.empty()) {
    log::warn("no training pairs; returning the untrained scorer");
    return result;
  }

  CrossScorer s = result.scorer;
  const std::size_t nf = s.feature_size();
  std::vector<double> f(nf), grad(nf);
  std::vector<std::size_t> order(pairs.size());
  double best = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix(cfg.seed ^ mix(static_cast<std::uint64_t>(epoch))));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      double grad_b = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = pairs[order[i]];
        s.features(ex.image, ex.tmpl, f);
        double z = s.bias;
        for (std::size_t j = 0; j < nf; ++j) z += s.weight[j] * f[j];
        const double p = sigmoid(z);
        // Numerically stable BCE: log(1 + e^z) - y z
        loss_sum += std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))) - ex.label * z;
        const double dz = p - ex.label;
        for (std::size_t j = 0; j < nf; ++j) grad[j] += dz * f[j];
        grad_b += dz;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t j = 0; j < nf; ++j)
        s.weight[j] = static_cast<float>(s.weight[j] - cfg.learning_rate * (grad[j] * inv + cfg.weight_decay * s.weight[j]));
      s.bias = static_cast<float>(s.bias - cfg.learning_rate * grad_b * inv);
      if (!std::isfinite(s.bias))
        throw TrainingError("non-finite scorer update at epoch " + std::to_string(epoch) + " (seed 0x" +
                            hex64(cfg.seed) + ")");
    }
    CrossEpochLog entry{epoch, loss_sum / static_cast<double>(pairs.size()), evaluate ? evaluate(s) : 0.0};
    if (!std::isfinite(entry.loss))
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " (seed 0x" + hex64(cfg.seed) + ")");
    log::info("cross-encoder epoch " + std::to_string(epoch) + ": loss " + std::to_string(entry.loss) + ", dev " +
              std::to_string(entry.recall));
    result.log.push_back(entry);
    if (entry.recall > best) {
      best = entry.recall;
      result.best_epoch = epoch;
      result.scorer = s;
    }
  }
  return result;
}

}  // namespace newsrecon
