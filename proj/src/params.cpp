#include "fitvid/params.hpp"

#include <cmath>
#include <stdexcept>

namespace fitvid {

namespace {

Index se_mid(Index c) { return std::max<Index>(c / 4, 1); }

/// Encoder skip channel width for decoder cell `k` counted over all decoder
/// cells in forward order: mirrored pairing, deepest encoder cell first.
Index mirrored_skip_channels(const ModelConfig& cfg, Index decoder_cell_index) {
  const Index total = 4 * cfg.cells_per_block;
  const Index enc_cell = total - 1 - decoder_cell_index;
  return cfg.stage_filters[static_cast<size_t>(enc_cell / cfg.cells_per_block)];
}

}  // namespace

void for_each_param(const ModelConfig& cfg,
                    const std::function<void(const ParamSpec&)>& fn) {
  auto emit = [&fn](std::string name, Shape shape, ParamKind kind) {
    fn(ParamSpec{std::move(name), std::move(shape), kind});
  };
  auto bn = [&emit](const std::string& prefix, Index c) {
    emit(prefix + ".scale", {c}, ParamKind::kBnScale);
    emit(prefix + ".shift", {c}, ParamKind::kBnShift);
  };
  auto se = [&emit](const std::string& prefix, Index c) {
    const Index mid = se_mid(c);
    emit(prefix + ".fc1.w", {c, mid}, ParamKind::kDenseWeight);
    emit(prefix + ".fc1.b", {mid}, ParamKind::kBias);
    emit(prefix + ".fc2.w", {mid, c}, ParamKind::kDenseWeight);
    emit(prefix + ".fc2.b", {c}, ParamKind::kBias);
  };
  auto conv = [&emit](const std::string& prefix, Index k, Index cin, Index cout) {
    emit(prefix + ".w", {k, k, cin, cout}, ParamKind::kConvKernel);
    emit(prefix + ".b", {cout}, ParamKind::kBias);
  };
  auto lstm = [&emit](const std::string& prefix, Index in, Index hidden) {
    emit(prefix + ".wx", {in, 4 * hidden}, ParamKind::kLstmInput);
    emit(prefix + ".wh", {hidden, 4 * hidden}, ParamKind::kLstmHidden);
    emit(prefix + ".b", {4 * hidden}, ParamKind::kLstmBias);
  };

  // encoder: 4 blocks of NVAE-style cells, strided 3x3 conv between blocks
  Index cin = cfg.channels;
  for (Index b = 0; b < 4; ++b) {
    const Index f = cfg.stage_filters[static_cast<size_t>(b)];
    for (Index j = 0; j < cfg.cells_per_block; ++j) {
      const std::string p = "enc.b" + std::to_string(b) + ".c" + std::to_string(j);
      const Index ci = (j == 0) ? cin : f;
      bn(p + ".bn1", ci);
      conv(p + ".conv1", 3, ci, f);
      bn(p + ".bn2", f);
      conv(p + ".conv2", 3, f, f);
      se(p + ".se", f);
      if (ci != f) conv(p + ".proj", 1, ci, f);
    }
    if (b < 3) conv("enc.down" + std::to_string(b), 3, f, f);
    cin = f;
  }
  emit("enc.hproj.w", {cfg.stage_filters[3], cfg.g_dim}, ParamKind::kDenseWeight);
  emit("enc.hproj.b", {cfg.g_dim}, ParamKind::kBias);

  // dynamics: two LSTM layers + dense head to the deepest map
  const Index s = cfg.deepest_size();
  lstm("dyn.lstm0", cfg.g_dim + cfg.action_dim + cfg.z_dim, cfg.rnn_size);
  lstm("dyn.lstm1", cfg.rnn_size, cfg.rnn_size);
  emit("dyn.head.w", {cfg.rnn_size, s * s * cfg.deepest_filters()},
       ParamKind::kDenseWeight);
  emit("dyn.head.b", {s * s * cfg.deepest_filters()}, ParamKind::kBias);

  // posterior: one LSTM layer + gaussian head
  lstm("post.lstm", cfg.g_dim, cfg.rnn_size);
  emit("post.head.w", {cfg.rnn_size, 2 * cfg.z_dim}, ParamKind::kDenseWeight);
  emit("post.head.b", {2 * cfg.z_dim}, ParamKind::kBias);

  // decoder: mirrored blocks, widest first; per-cell encoder skip fusion
  Index din = cfg.deepest_filters();
  Index cell_index = 0;
  for (Index b = 0; b < 4; ++b) {
    const Index g = cfg.stage_filters[static_cast<size_t>(3 - b)];
    const Index e = cfg.decoder_expand_ratio * g;
    for (Index j = 0; j < cfg.cells_per_block; ++j, ++cell_index) {
      const std::string p = "dec.b" + std::to_string(b) + ".c" + std::to_string(j);
      const Index ci = (j == 0) ? din : g;
      conv(p + ".fuse", 1, mirrored_skip_channels(cfg, cell_index), ci);
      bn(p + ".bn1", ci);
      conv(p + ".expand", 1, ci, e);
      bn(p + ".bn2", e);
      conv(p + ".conv5", 5, e, e);
      bn(p + ".bn3", e);
      conv(p + ".reduce", 1, e, g);
      bn(p + ".bn4", g);
      se(p + ".se", g);
      if (ci != g) conv(p + ".proj", 1, ci, g);
    }
    din = g;
  }
  conv("dec.final", 1, cfg.stage_filters[0], cfg.channels);
}

void for_each_norm_buffer(const ModelConfig& cfg,
                          const std::function<void(const std::string&, Index)>& fn) {
  for_each_param(cfg, [&fn](const ParamSpec& spec) {
    if (spec.kind != ParamKind::kBnScale) return;
    // spec.name ends with ".scale"; the buffer pair shares the bn prefix
    std::string prefix = spec.name.substr(0, spec.name.size() - 6);
    fn(prefix + ".rmean", spec.shape[0]);
    fn(prefix + ".rvar", spec.shape[0]);
  });
}

int64_t count_parameters(const ModelConfig& cfg) {
  int64_t total = 0;
  for_each_param(cfg, [&total](const ParamSpec& spec) { total += shape_size(spec.shape); });
  return total;
}

ParamStore ParamStore::zeros(const ModelConfig& cfg) {
  ParamStore store;
  for_each_param(cfg, [&store](const ParamSpec& spec) {
    store.insert(spec.name, Tensor(spec.shape));
  });
  return store;
}

ParamStore ParamStore::init(const ModelConfig& cfg, Rng& rng) {
  ParamStore store;
  for_each_param(cfg, [&store, &rng](const ParamSpec& spec) {
    Tensor t(spec.shape);
    switch (spec.kind) {
      case ParamKind::kConvKernel: {
        const Scalar fan_in =
            static_cast<Scalar>(spec.shape[0] * spec.shape[1] * spec.shape[2]);
        const Scalar lim = std::sqrt(3.0 / fan_in);
        t = rng.uniform_tensor(spec.shape, -lim, lim);
        break;
      }
      case ParamKind::kDenseWeight:
      case ParamKind::kLstmInput:
      case ParamKind::kLstmHidden: {
        const Scalar lim = std::sqrt(3.0 / static_cast<Scalar>(spec.shape[0]));
        t = rng.uniform_tensor(spec.shape, -lim, lim);
        break;
      }
      case ParamKind::kBnScale:
        t = Tensor::full(spec.shape, 1.0);
        break;
      case ParamKind::kLstmBias: {
        // gate order (i,f,g,o); forget-gate bias starts at 1
        const Index h = spec.shape[0] / 4;
        for (Index i = h; i < 2 * h; ++i) t[i] = 1.0;
        break;
      }
      case ParamKind::kBias:
      case ParamKind::kBnShift:
        break;  // zero
    }
    store.insert(spec.name, std::move(t));
  });
  return store;
}

void ParamStore::insert(const std::string& name, Tensor t) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter: " + name);
  index_[name] = tensors_.size();
  order_.push_back(name);
  tensors_.push_back(std::move(t));
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return tensors_[it->second];
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return tensors_[it->second];
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

void ParamStore::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  for (size_t i = 0; i < order_.size(); ++i) fn(order_[i], tensors_[i]);
}

void ParamStore::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  for (size_t i = 0; i < order_.size(); ++i) fn(order_[i], tensors_[i]);
}

}  // namespace fitvid
