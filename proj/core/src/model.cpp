// SPDX-License-Identifier: Apache-2.0
#include "lead/model.hpp"

#include <cmath>

#include "lead/error.hpp"

namespace lead::model {

namespace ops = nn::ops;

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) fail(ErrorKind::kConfig, std::string(name) + " must be >= 1");
  };
  positive(d_model, "d_model");
  positive(layers, "layers");
  positive(heads, "heads");
  positive(d_ff, "d_ff");
  positive(patch_len, "patch_len");
  positive(target_channels, "target_channels");
  positive(seq_len, "seq_len");
  positive(n_channels, "n_channels");
  if (n_classes < 2) fail(ErrorKind::kConfig, "n_classes must be >= 2");
  if (d_model % heads != 0) fail(ErrorKind::kConfig, "d_model must be divisible by heads");
  if (target_channels < n_channels)
    fail(ErrorKind::kConfig, "target_channels must be >= n_channels");
  if (!(tau > 0.0)) fail(ErrorKind::kConfig, "tau must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0 || std::abs(lambda1 + lambda2 - 1.0) > 1e-9)
    fail(ErrorKind::kConfig, "lambda1 + lambda2 must equal 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::kConfig, "dropout must lie in [0, 1)");
}

// --- parameter store -------------------------------------------------------

const nn::Var& ParamStore::add(std::string name, Matrix value, bool trainable) {
  if (find(name)) fail(ErrorKind::kConfig, "duplicate parameter '" + name + "'");
  params_.push_back({std::move(name), nn::parameter(std::move(value), trainable), trainable});
  return params_.back().var;
}

const Param* ParamStore::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const nn::Var& ParamStore::get(std::string_view name) const {
  const Param* p = find(name);
  if (!p) fail(ErrorKind::kShape, "missing parameter '" + std::string(name) + "'");
  return p->var;
}

std::size_t ParamStore::count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (!trainable_only || p.trainable) n += static_cast<std::size_t>(p.var->value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var->grad.resize(0, 0);
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& p : params_) out.add(p.name, p.var->value, p.trainable);
  return out;
}

// --- layout ------------------------------------------------------------------

Matrix sinusoid_table(int rows, int dim) {
  Matrix pe(rows, dim);
  for (int p = 0; p < rows; ++p) {
    for (int j = 0; j < dim; ++j) {
      const int i2 = j - (j % 2);
      const double angle = p / std::pow(10000.0, static_cast<double>(i2) / dim);
      pe(p, j) = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

std::vector<ParamSpec> param_layout(const ModelConfig& cfg) {
  const Eigen::Index d = cfg.d_model, ff = cfg.d_ff;
  std::vector<ParamSpec> out;
  auto lin = [&](const std::string& name, Eigen::Index in, Eigen::Index o) {
    out.push_back({name + ".weight", in, o, true});
    out.push_back({name + ".bias", 1, o, true});
  };
  auto norm = [&](const std::string& name) {
    out.push_back({name + ".gamma", 1, d, true});
    out.push_back({name + ".beta", 1, d, true});
  };
  auto encoder = [&](const std::string& prefix) {
    for (int l = 0; l < cfg.layers; ++l) {
      const std::string p = prefix + ".layers." + std::to_string(l);
      norm(p + ".ln1");
      lin(p + ".attn.q", d, d);
      lin(p + ".attn.k", d, d);
      lin(p + ".attn.v", d, d);
      lin(p + ".attn.o", d, d);
      norm(p + ".ln2");
      lin(p + ".ffn.fc1", d, ff);
      lin(p + ".ffn.fc2", ff, d);
    }
    norm(prefix + ".norm");
  };
  lin("temporal.patch", static_cast<Eigen::Index>(cfg.patch_len) * cfg.n_channels, d);
  out.push_back({"temporal.pos", cfg.n_patches(), d, false});
  encoder("temporal");
  out.push_back({"spatial.chan_pos", cfg.n_channels, cfg.seq_len, false});
  out.push_back({"spatial.w1.weight", cfg.target_channels, cfg.n_channels, true});
  out.push_back({"spatial.w1.bias", 1, cfg.target_channels, true});
  lin("spatial.w2", cfg.seq_len, d);
  encoder("spatial");
  lin("head.fc1", 2 * d, d);
  lin("head.fc2", d, d);
  lin("classifier", 2 * d, cfg.n_classes);
  return out;
}

// --- model -------------------------------------------------------------------

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed, hash_string("lead.model.init"));
  for (const auto& spec : param_layout(cfg_)) {
    Matrix value;
    const auto ends_with = [&](std::string_view suffix) {
      return spec.name.size() >= suffix.size() &&
             spec.name.compare(spec.name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (spec.name == "temporal.pos") {
      value = sinusoid_table(cfg_.n_patches(), cfg_.d_model);
    } else if (spec.name == "spatial.chan_pos") {
      value = sinusoid_table(cfg_.n_channels, cfg_.seq_len);
    } else if (ends_with(".gamma")) {
      value = Matrix::Ones(spec.rows, spec.cols);
    } else if (ends_with(".bias") || ends_with(".beta")) {
      value = Matrix::Zero(spec.rows, spec.cols);
    } else {
      // spatial.w1 is stored (out x in); every other weight is (in x out).
      const Eigen::Index fan_in = spec.name == "spatial.w1.weight" ? spec.cols : spec.rows;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      value.resize(spec.rows, spec.cols);
      for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = rng.uniform(-bound, bound);
    }
    params_.add(spec.name, std::move(value), spec.trainable);
  }
}

Model::Model(const ModelConfig& cfg, ParamStore params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  check_layout();
}

void Model::check_layout() const {
  const auto layout = param_layout(cfg_);
  if (layout.size() != params_.all().size())
    fail(ErrorKind::kShape, "parameter count " + std::to_string(params_.all().size()) +
                                " does not match the configuration (" +
                                std::to_string(layout.size()) + ")");
  for (const auto& spec : layout) {
    const Param* p = params_.find(spec.name);
    if (!p) fail(ErrorKind::kShape, "missing parameter '" + spec.name + "'");
    if (p->var->value.rows() != spec.rows || p->var->value.cols() != spec.cols)
      fail(ErrorKind::kShape, "parameter '" + spec.name + "' has shape " +
                                  std::to_string(p->var->value.rows()) + "x" +
                                  std::to_string(p->var->value.cols()) + ", expected " +
                                  std::to_string(spec.rows) + "x" + std::to_string(spec.cols));
    if (!p->var->value.allFinite())
      fail(ErrorKind::kNumeric, "parameter '" + spec.name + "' is not finite");
  }
}

void Model::load_values(const ParamStore& other) {
  if (other.all().size() != params_.all().size())
    fail(ErrorKind::kShape, "parameter sets differ in size");
  for (std::size_t i = 0; i < params_.all().size(); ++i) {
    auto& dst = params_.all()[i];
    const auto& src = other.all()[i];
    if (dst.name != src.name || dst.var->value.rows() != src.var->value.rows() ||
        dst.var->value.cols() != src.var->value.cols())
      fail(ErrorKind::kShape, "parameter layout mismatch at '" + dst.name + "'");
    dst.var->value = src.var->value;
  }
}

nn::Var Model::branch(nn::Tape& tape, nn::Var x, const std::string& prefix, Eigen::Index batch,
                      Eigen::Index seq, bool train, Rng* rng) const {
  const bool drop = train && rng && cfg_.dropout > 0.0;
  auto p = [&](const std::string& name) -> const nn::Var& { return params_.get(prefix + name); };
  if (drop) x = ops::dropout(tape, x, cfg_.dropout, *rng);
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string lp = ".layers." + std::to_string(l);
    auto h = ops::layer_norm(tape, x, p(lp + ".ln1.gamma"), p(lp + ".ln1.beta"));
    auto q = ops::linear(tape, h, p(lp + ".attn.q.weight"), p(lp + ".attn.q.bias"));
    auto k = ops::linear(tape, h, p(lp + ".attn.k.weight"), p(lp + ".attn.k.bias"));
    auto v = ops::linear(tape, h, p(lp + ".attn.v.weight"), p(lp + ".attn.v.bias"));
    auto a = ops::attention(tape, q, k, v, batch, seq, cfg_.heads);
    a = ops::linear(tape, a, p(lp + ".attn.o.weight"), p(lp + ".attn.o.bias"));
    if (drop) a = ops::dropout(tape, a, cfg_.dropout, *rng);
    x = ops::add(tape, x, a);
    h = ops::layer_norm(tape, x, p(lp + ".ln2.gamma"), p(lp + ".ln2.beta"));
    auto f = ops::linear(tape, h, p(lp + ".ffn.fc1.weight"), p(lp + ".ffn.fc1.bias"));
    f = ops::gelu(tape, f);
    f = ops::linear(tape, f, p(lp + ".ffn.fc2.weight"), p(lp + ".ffn.fc2.bias"));
    if (drop) f = ops::dropout(tape, f, cfg_.dropout, *rng);
    x = ops::add(tape, x, f);
  }
  x = ops::layer_norm(tape, x, p(".norm.gamma"), p(".norm.beta"));
  return ops::last_rows(tape, x, batch);
}

nn::Var Model::encode(nn::Tape& tape, const Matrix& x, Eigen::Index batch, bool train,
                      Rng* rng) const {
  const Eigen::Index t = cfg_.seq_len, c = cfg_.n_channels;
  if (batch < 1 || x.rows() != batch * t || x.cols() != c)
    fail(ErrorKind::kShape, "encode expects " + std::to_string(batch) + " windows of " +
                                std::to_string(t) + "x" + std::to_string(c) + ", got " +
                                std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  const nn::Var input = tape.constant(x);

  // Temporal branch: cross-channel patches as tokens.
  auto patches = ops::patchify(tape, input, batch, cfg_.patch_len);
  auto tokens = ops::linear(tape, patches, params_.get("temporal.patch.weight"),
                            params_.get("temporal.patch.bias"));
  tokens = ops::add_tiled(tape, tokens, params_.get("temporal.pos")->value);
  auto ht = branch(tape, tokens, "temporal", batch, cfg_.n_patches(), train, rng);

  // Spatial branch: whole channels as tokens after channel up-mixing.
  auto xs = ops::add_tiled(tape, input, params_.get("spatial.chan_pos")->value.transpose());
  auto up = ops::linear_nt(tape, xs, params_.get("spatial.w1.weight"),
                           params_.get("spatial.w1.bias"));
  auto chans = ops::batched_transpose(tape, up, batch);
  auto stoks = ops::linear(tape, chans, params_.get("spatial.w2.weight"),
                           params_.get("spatial.w2.bias"));
  auto hs = branch(tape, stoks, "spatial", batch, cfg_.target_channels, train, rng);

  auto h = ops::concat_cols(tape, ht, hs);
  if (!h->value.allFinite()) fail(ErrorKind::kNumeric, "encoder produced non-finite activations");
  return h;
}

nn::Var Model::project(nn::Tape& tape, const nn::Var& h) const {
  if (h->value.cols() != 2 * cfg_.d_model)
    fail(ErrorKind::kShape, "projection head expects width " + std::to_string(2 * cfg_.d_model));
  auto z = ops::linear(tape, h, params_.get("head.fc1.weight"), params_.get("head.fc1.bias"));
  z = ops::gelu(tape, z);
  return ops::linear(tape, z, params_.get("head.fc2.weight"), params_.get("head.fc2.bias"));
}

nn::Var Model::classify(nn::Tape& tape, const nn::Var& h) const {
  if (h->value.cols() != 2 * cfg_.d_model)
    fail(ErrorKind::kShape, "classifier expects width " + std::to_string(2 * cfg_.d_model));
  return ops::linear(tape, h, params_.get("classifier.weight"), params_.get("classifier.bias"));
}

Matrix Model::embed(const Matrix& x, Eigen::Index batch) const {
  nn::Tape tape;
  return encode(tape, x, batch, false)->value;
}

Matrix Model::logits(const Matrix& x, Eigen::Index batch) const {
  nn::Tape tape;
  return classify(tape, encode(tape, x, batch, false))->value;
}

// --- helpers -----------------------------------------------------------------

Matrix stack(std::span<const EpochSample* const> samples) {
  if (samples.empty()) return {};
  const Eigen::Index t = samples.front()->timesteps(), c = samples.front()->channels();
  Matrix out(static_cast<Eigen::Index>(samples.size()) * t, c);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->timesteps() != t || samples[i]->channels() != c)
      fail(ErrorKind::kShape, "windows in a batch differ in shape");
    out.middleRows(static_cast<Eigen::Index>(i) * t, t) = samples[i]->data.cast<double>();
  }
  return out;
}

Matrix stack(const SampleList& samples, std::span<const std::size_t> indices) {
  std::vector<const EpochSample*> ptrs;
  ptrs.reserve(indices.size());
  for (std::size_t i : indices) ptrs.push_back(&samples.at(i));
  return stack(ptrs);
}

std::vector<std::int32_t> argmax_rows(const Matrix& logits) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k)
      if (logits(i, k) > logits(i, best)) best = k;
    out[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best);
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace lead::model
