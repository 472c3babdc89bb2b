#include "newsrecon/biencoder.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <limits>
#include <sstream>

#include "newsrecon/binary_io.hpp"
#include "newsrecon/error.hpp"
#include "newsrecon/hash.hpp"
#include "newsrecon/kernels.hpp"
#include "newsrecon/log.hpp"

namespace newsrecon {
namespace {

constexpr std::uint16_t kHeadVersion = 1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t batch_seed(std::uint64_t seed, int epoch, std::size_t batch) {
  return splitmix64(splitmix64(seed ^ (static_cast<std::uint64_t>(epoch) << 32)) + batch);
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

void put_head(io::ByteWriter& w, const ProjectionHead& h) {
  w.put_f32s(h.weight);
  w.put_f32s(h.bias);
}

ProjectionHead read_head(io::ByteReader& r, std::size_t in, std::size_t out, const char* which) {
  ProjectionHead h;
  h.in_dim = in;
  h.out_dim = out;
  h.weight.resize(in * out);
  h.bias.resize(out);
  r.f32s(h.weight, std::string(which) + " weight");
  r.f32s(h.bias, std::string(which) + " bias");
  return h;
}

// Projects rows of `x` (n x in) to normalized rows; keeps pre-normalization norms.
void forward(const ProjectionHead& h, std::span<const float> x, std::size_t n, std::vector<double>& p,
             std::vector<double>& norms) {
  p.assign(n * h.out_dim, 0.0);
  kernels::affine_rows(x, n, h.in_dim, h.weight, h.bias, h.out_dim, p);
  norms.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < h.out_dim; ++j) s += p[i * h.out_dim + j] * p[i * h.out_dim + j];
    const double nrm = std::sqrt(s);
    if (!(nrm > 0.0)) throw TrainingError("projection collapsed an input row to zero");
    norms[i] = nrm;
    for (std::size_t j = 0; j < h.out_dim; ++j) p[i * h.out_dim + j] /= nrm;
  }
}

struct HeadGrad {
  std::vector<double> weight, bias;
};

// Backpropagates dL/dp through p = u/|u| and u = xW + b.
HeadGrad backward(const ProjectionHead& h, std::span<const float> x, std::size_t n, const std::vector<double>& p,
                  const std::vector<double>& norms, const std::vector<double>& grad_p) {
  const std::size_t out = h.out_dim;
  std::vector<double> du(n * out);
  for (std::size_t i = 0; i < n; ++i) {
    double pg = 0.0;
    for (std::size_t j = 0; j < out; ++j) pg += p[i * out + j] * grad_p[i * out + j];
    for (std::size_t j = 0; j < out; ++j) du[i * out + j] = (grad_p[i * out + j] - p[i * out + j] * pg) / norms[i];
  }
  HeadGrad g{std::vector<double>(h.in_dim * out, 0.0), std::vector<double>(out, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const float* xi = x.data() + i * h.in_dim;
    const double* di = du.data() + i * out;
    for (std::size_t a = 0; a < h.in_dim; ++a) {
      const double xa = xi[a];
      if (xa == 0.0) continue;
      double* row = g.weight.data() + a * out;
      for (std::size_t j = 0; j < out; ++j) row[j] += xa * di[j];
    }
    for (std::size_t j = 0; j < out; ++j) g.bias[j] += di[j];
  }
  return g;
}

struct Sgd {
  double lr, momentum, weight_decay;
  std::vector<double> v;

  void step(std::vector<float>& params, const std::vector<double>& grad, bool decay) {
    if (v.empty()) v.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
      double g = grad[i];
      if (decay) g += weight_decay * params[i];
      v[i] = momentum * v[i] + g;
      params[i] = static_cast<float>(params[i] - lr * v[i]);
    }
  }
};

std::string hex_seed(std::uint64_t s) { return "0x" + hex64(s); }

}  // namespace

ProjectionHead ProjectionHead::identity(std::size_t in_dim, std::size_t out_dim) {
  if (in_dim == 0 || out_dim == 0) throw PreconditionError("projection head dims must be positive");
  ProjectionHead h{in_dim, out_dim, std::vector<float>(in_dim * out_dim, 0.0f), std::vector<float>(out_dim, 0.0f)};
  for (std::size_t i = 0; i < std::min(in_dim, out_dim); ++i) h.weight[i * out_dim + i] = 1.0f;
  return h;
}

void ProjectionHead::validate() const {
  if (in_dim == 0 || out_dim == 0) throw PreconditionError("projection head dims must be positive");
  if (weight.size() != in_dim * out_dim || bias.size() != out_dim)
    throw DimensionError("projection head buffers do not match its dims");
  for (float w : weight)
    if (!std::isfinite(w)) throw PreconditionError("projection head has a non-finite weight");
  for (float b : bias)
    if (!std::isfinite(b)) throw PreconditionError("projection head has a non-finite bias");
}

std::vector<float> ProjectionHead::apply(std::span<const float> x) const {
  if (x.size() != in_dim)
    throw DimensionError("head expects dim " + std::to_string(in_dim) + ", got " + std::to_string(x.size()));
  std::vector<double> p, norms;
  forward(*this, x, 1, p, norms);
  return {p.begin(), p.end()};
}

EmbeddingMatrix ProjectionHead::apply(const EmbeddingMatrix& m) const {
  if (m.dim() != in_dim)
    throw DimensionError("head expects dim " + std::to_string(in_dim) + ", matrix has " + std::to_string(m.dim()));
  std::vector<double> p, norms;
  forward(*this, m.data(), m.rows(), p, norms);
  return EmbeddingMatrix(m.ids(), out_dim, std::vector<float>(p.begin(), p.end()));
}

HeadPair HeadPair::identity(std::size_t image_dim, std::size_t text_dim, std::size_t out_dim) {
  if (out_dim == 0) out_dim = text_dim;
  return {ProjectionHead::identity(image_dim, out_dim), ProjectionHead::identity(text_dim, out_dim), 0};
}

void HeadPair::validate() const {
  image.validate();
  text.validate();
  if (image.out_dim != text.out_dim) throw DimensionError("image and text heads disagree on output dim");
}

std::vector<std::byte> encode_heads(const HeadPair& h) {
  h.validate();
  io::ByteWriter w;
  w.put_magic("NRHD");
  w.put_u16(kHeadVersion);
  w.put_u32(static_cast<std::uint32_t>(h.image.in_dim));
  w.put_u32(static_cast<std::uint32_t>(h.text.in_dim));
  w.put_u32(static_cast<std::uint32_t>(h.image.out_dim));
  w.put_u64(h.config_hash);
  put_head(w, h.image);
  put_head(w, h.text);
  w.put_checksum();
  return w.take();
}

HeadPair decode_heads(std::span<const std::byte> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("NRHD");
  if (const auto v = r.u16(); v != kHeadVersion) r.fail("unsupported head version " + std::to_string(v));
  const std::size_t img_in = r.u32(), txt_in = r.u32(), out = r.u32();
  if (img_in == 0 || txt_in == 0 || out == 0) r.fail("zero head dimension");
  HeadPair h;
  h.config_hash = r.u64();
  h.image = read_head(r, img_in, out, "image");
  h.text = read_head(r, txt_in, out, "text");
  r.verify_checksum();
  r.expect_end();
  h.validate();
  return h;
}

HeadPair load_heads(const std::filesystem::path& path) { return decode_heads(io::read_file(path), path.string()); }

void save_heads(const HeadPair& h, const std::filesystem::path& path) { io::write_file(path, encode_heads(h)); }

std::string to_string(TextField f) { return f == TextField::caption ? "caption" : "abstract"; }

TextField parse_text_field(std::string_view s) {
  if (s == "caption") return TextField::caption;
  if (s == "abstract") return TextField::abstract;
  throw ConfigError("input field must be 'caption' or 'abstract', got '" + std::string(s) + "'");
}

void BiEncoderTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("biencoder epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("biencoder learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("biencoder batch size must be >= 1");
  if (!(n_random >= 0.0 && n_random <= 1.0)) throw ConfigError("n_random must be in [0, 1]");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (recall_k < 1) throw ConfigError("recall k must be >= 1");
}

BatchSource::BatchSource(const LabelStore& labels, const std::vector<std::string>& train_image_ids,
                         const EmbeddingMatrix& text, const EmbeddingMatrix* article_images)
    : labels_(labels) {
  for (std::size_t r = 0; r < text.rows(); ++r) rows_[text.articles()[text.row_article(r)]].push_back(text.ids()[r]);

  std::set<std::string> relevant_anywhere;
  for (const auto& id : train_image_ids) {
    const auto& er = labels.at(id).event_relevant;
    relevant_anywhere.insert(er.begin(), er.end());
    std::vector<std::string> cands;
    for (const auto& a : er)
      if (rows_.contains(a)) cands.push_back(a);
    if (cands.empty()) continue;
    candidates_.emplace(id, std::move(cands));
    images_.push_back(id);
  }
  std::sort(images_.begin(), images_.end());
  images_.erase(std::unique(images_.begin(), images_.end()), images_.end());

  if (article_images) {
    for (const auto& [article, rows] : rows_)
      if (!relevant_anywhere.contains(article) && article_images->find(article)) random_pool_.push_back(article);
  }
}

const std::set<std::string>& BatchSource::event_relevant(const std::string& image_id) const {
  return labels_.at(image_id).event_relevant;
}

const std::vector<std::string>& BatchSource::rows_of(const std::string& article_id) const {
  const auto it = rows_.find(article_id);
  if (it == rows_.end()) throw LookupError("no text rows for article '" + article_id + "'");
  return it->second;
}

const std::vector<std::string>& BatchSource::candidates(const std::string& image_id) const {
  const auto it = candidates_.find(image_id);
  if (it == candidates_.end()) throw LookupError("image '" + image_id + "' has no usable event-relevant article");
  return it->second;
}

constexpr int kSupervisedAttempts = 16;

TrainBatch build_batch(const BatchSource& source, std::size_t batch_size, double n_random, std::mt19937_64& rng) {
  if (batch_size == 0) throw PreconditionError("batch size must be positive");
  if (!(n_random >= 0.0 && n_random <= 1.0)) throw PreconditionError("n_random must be in [0, 1]");
  const auto want_random = static_cast<std::size_t>(std::floor(n_random * static_cast<double>(batch_size) + 1e-9));
  const std::size_t want_supervised = batch_size - want_random;

  // Each pool is scanned once in random order: an image joins when none of
  // its relevant articles is already captioned in the batch and one of its
  // own articles is not forbidden. A supervised pass that falls short is
  // redrawn with a fresh order, keeping the fullest attempt.
  TrainBatch batch;
  std::set<std::string> batch_articles;
  std::vector<std::size_t> order(source.images().size());
  std::vector<std::string> options;
  for (int attempt = 0; attempt < kSupervisedAttempts; ++attempt) {
    TrainBatch trial;
    std::set<std::string> trial_articles;
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size() && trial.n_supervised < want_supervised; ++i) {
      const auto& image = source.images()[order[i]];
      const auto& er = source.event_relevant(image);
      if (std::any_of(er.begin(), er.end(), [&](const auto& a) { return trial_articles.contains(a); })) continue;
      options.clear();
      for (const auto& a : source.candidates(image))
        if (!trial.forbidden.contains(a)) options.push_back(a);
      if (options.empty()) continue;
      const auto& article = pick(options, rng);
      trial.pairs.push_back({image, pick(source.rows_of(article), rng), false});
      trial_articles.insert(article);
      trial.forbidden.insert(er.begin(), er.end());
      ++trial.n_supervised;
    }
    if (attempt == 0 || trial.n_supervised > batch.n_supervised) {
      batch = std::move(trial);
      batch_articles = std::move(trial_articles);
    }
    if (batch.n_supervised == want_supervised) break;
  }
  order.resize(source.random_pool().size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < order.size() && batch.n_random < want_random; ++i) {
    const auto& article = source.random_pool()[order[i]];
    if (batch_articles.contains(article) || batch.forbidden.contains(article)) continue;
    batch.pairs.push_back({article, pick(source.rows_of(article), rng), true});
    batch_articles.insert(article);
    batch.forbidden.insert(article);
    ++batch.n_random;
  }
  if (batch.pairs.size() < batch_size) {
    std::ostringstream msg;
    msg << "short batch: " << batch.n_supervised << "/" << want_supervised << " supervised, " << batch.n_random << "/"
        << want_random << " random pairs";
    log::warn(msg.str());
  }
  return batch;
}

std::optional<std::string> batch_violation(const TrainBatch& batch, const BatchSource& source) {
  std::set<std::string> images;
  for (const auto& p : batch.pairs) {
    if (!images.insert(p.image_id).second) return "image '" + p.image_id + "' appears twice";
  }
  for (const auto& p : batch.pairs) {
    const std::string article = parse_row_id(p.text_row_id).article_id;
    std::size_t relevant_to = 0;
    bool own = false;
    for (const auto& q : batch.pairs) {
      const bool rel = q.random ? q.image_id == article : source.event_relevant(q.image_id).contains(article);
      if (rel) ++relevant_to;
      if (rel && &q == &p) own = true;
    }
    if (!own) return "row '" + p.text_row_id + "' is not relevant to its own image '" + p.image_id + "'";
    if (relevant_to > 1)
      return "row '" + p.text_row_id + "' is event-relevant to " + std::to_string(relevant_to) + " batch images";
  }
  return std::nullopt;
}

InfoNceResult info_nce_loss(std::span<const double> images, std::span<const double> captions, std::size_t batch,
                            std::size_t dim, double temperature) {
  if (!(temperature > 0.0)) throw PreconditionError("temperature must be > 0");
  if (batch == 0) throw PreconditionError("empty batch");
  if (images.size() != batch * dim || captions.size() != batch * dim)
    throw DimensionError("info_nce_loss inputs do not match batch x dim");
  const std::size_t n = batch;
  std::vector<double> z(n * n);
  kernels::gram(images, captions, n, n, dim, z);
  for (double& v : z) v /= temperature;

  // Row-wise (image -> caption) and column-wise (caption -> image) softmax.
  std::vector<double> pr(n * n), pc(n * n);
  double loss_r = 0.0, loss_c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, z[i * n + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(z[i * n + j] - mx);
    for (std::size_t j = 0; j < n; ++j) pr[i * n + j] = std::exp(z[i * n + j] - mx) / s;
    loss_r += mx + std::log(s) - z[i * n + i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, z[i * n + j]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(z[i * n + j] - mx);
    for (std::size_t i = 0; i < n; ++i) pc[i * n + j] = std::exp(z[i * n + j] - mx) / s;
    loss_c += mx + std::log(s) - z[j * n + j];
  }
  const double bn = static_cast<double>(n);
  InfoNceResult out;
  out.loss = 0.5 * (loss_r + loss_c) / bn;

  // dL/dS = ((Pr - I) + (Pc - I)) / (2 B tau)
  std::vector<double> g(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g[i * n + j] = (pr[i * n + j] + pc[i * n + j] - (i == j ? 2.0 : 0.0)) / (2.0 * bn * temperature);

  out.grad_image.assign(n * dim, 0.0);
  out.grad_caption.assign(n * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double gij = g[i * n + j];
      for (std::size_t k = 0; k < dim; ++k) {
        out.grad_image[i * dim + k] += gij * captions[j * dim + k];
        out.grad_caption[j * dim + k] += gij * images[i * dim + k];
      }
    }
  return out;
}

double event_recall_at_k(const HeadPair& heads, const EmbeddingMatrix& query_images, const EmbeddingMatrix& text,
                         const LabelStore& labels, const std::vector<std::string>& image_ids, std::size_t k) {
  const EmbeddingMatrix projected = heads.text.apply(text);
  MatrixBuilder queries(heads.image.out_dim);
  std::vector<const std::set<std::string>*> relevant;
  for (const auto& id : image_ids) {
    const auto* l = labels.find(id);
    if (!l || l->event_relevant.empty()) continue;
    queries.add(id, heads.image.apply(query_images.at(id)));
    relevant.push_back(&l->event_relevant);
  }
  if (relevant.empty()) return 0.0;
  const auto hits = top_k_batch(std::move(queries).build(), projected, k);
  std::size_t found = 0;
  for (std::size_t q = 0; q < hits.size(); ++q) {
    const bool hit = std::any_of(hits[q].begin(), hits[q].end(),
                                 [&](const SearchHit& h) { return relevant[q]->contains(h.article_id); });
    if (hit) ++found;
  }
  return static_cast<double>(found) / static_cast<double>(relevant.size());
}

BiEncoderTrainResult train_biencoder(const BiEncoderData& data, const BiEncoderTrainConfig& cfg) {
  cfg.validate();
  if (cfg.n_random > 0.0 && !data.article_images)
    throw PreconditionError("n_random > 0 needs article image embeddings for the random pairs");
  const std::size_t img_dim = data.query_images.dim();
  const std::size_t txt_dim = data.text.dim();
  if (data.article_images && data.article_images->dim() != img_dim)
    throw DimensionError("article image embeddings differ in dim from query image embeddings");

  BiEncoderTrainResult result;
  result.heads = HeadPair::identity(img_dim, txt_dim, cfg.out_dim);
  const auto k = static_cast<std::size_t>(cfg.recall_k);
  result.baseline_recall = event_recall_at_k(result.heads, data.query_images, data.text, data.labels, data.dev_ids, k);
  if (cfg.epochs == 0) return result;

  const BatchSource source(data.labels, data.train_ids, data.text, data.article_images);
  if (source.images().empty()) throw TrainingError("no train image has an event-relevant article with text");
  const auto n_random_pairs =
      static_cast<std::size_t>(std::floor(cfg.n_random * static_cast<double>(cfg.batch_size) + 1e-9));
  const std::size_t n_sup = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.batch_size) - n_random_pairs);
  const std::size_t batches_per_epoch = (source.images().size() + n_sup - 1) / n_sup;

  HeadPair heads = result.heads;
  Sgd opt_iw{cfg.learning_rate, cfg.momentum, cfg.weight_decay, {}}, opt_ib = opt_iw, opt_tw = opt_iw, opt_tb = opt_iw;
  double best = -1.0;
  std::vector<float> xi, xt;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const auto seed = batch_seed(cfg.seed, epoch, b);
      std::mt19937_64 rng(seed);
      const TrainBatch batch = build_batch(source, static_cast<std::size_t>(cfg.batch_size), cfg.n_random, rng);
      const std::size_t n = batch.pairs.size();
      if (n < 2) continue;

      xi.resize(n * img_dim);
      xt.resize(n * txt_dim);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& p = batch.pairs[i];
        const auto img = p.random ? data.article_images->at(p.image_id) : data.query_images.at(p.image_id);
        std::copy(img.begin(), img.end(), xi.begin() + static_cast<std::ptrdiff_t>(i * img_dim));
        const auto txt = data.text.at(p.text_row_id);
        std::copy(txt.begin(), txt.end(), xt.begin() + static_cast<std::ptrdiff_t>(i * txt_dim));
      }
      std::vector<double> pi, ni, pt, nt;
      forward(heads.image, xi, n, pi, ni);
      forward(heads.text, xt, n, pt, nt);
      const auto nce = info_nce_loss(pi, pt, n, heads.image.out_dim, cfg.temperature);
      if (!std::isfinite(nce.loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                            " (batch seed " + hex_seed(seed) + ")");
      loss_sum += nce.loss;
      ++loss_batches;

      const auto gi = backward(heads.image, xi, n, pi, ni, nce.grad_image);
      const auto gt = backward(heads.text, xt, n, pt, nt, nce.grad_caption);
      opt_iw.step(heads.image.weight, gi.weight, true);
      opt_ib.step(heads.image.bias, gi.bias, false);
      opt_tw.step(heads.text.weight, gt.weight, true);
      opt_tb.step(heads.text.bias, gt.bias, false);
    }
    EpochLog entry{epoch, loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0, 0.0};
    entry.recall = event_recall_at_k(heads, data.query_images, data.text, data.labels, data.dev_ids, k);
    log::info("biencoder epoch " + std::to_string(epoch) + ": loss " + std::to_string(entry.loss) + ", R@" +
              std::to_string(k) + " " + std::to_string(entry.recall));
    result.log.push_back(entry);
    if (entry.recall > best) {
      best = entry.recall;
      result.best_epoch = epoch;
      result.heads = heads;
    }
  }
  return result;
}

std::vector<SearchHit> retrieve_event_candidates(std::span<const float> image_embedding, const HeadPair& heads,
                                                 const EmbeddingMatrix& projected_text, std::size_t k,
                                                 const RowMask& mask) {
  return top_k(heads.image.apply(image_embedding), projected_text, k, mask);
}

}  // namespace newsrecon
