#pragma once

#include "fitvid/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace fitvid {

/// Architecture and optimizer hyperparameters. Immutable after construction
/// by convention; everything downstream takes it by const reference.
struct ModelConfig {
  Index input_size = 64;
  Index channels = 3;
  Index context_frames = 2;
  Index total_frames = 12;
  Index z_dim = 10;
  Index g_dim = 128;
  Index rnn_size = 256;
  Index action_dim = 0;
  std::array<Index, 4> stage_filters = {64, 128, 256, 512};
  Index cells_per_block = 2;
  Index decoder_expand_ratio = 4;
  Scalar beta = 1.0;
  Scalar learning_rate = 1e-3;
  Scalar adam_beta1 = 0.9;
  Scalar adam_beta2 = 0.999;
  Scalar adam_eps = 1e-8;
  Scalar grad_clip_l2 = 100.0;
  Index batch_size = 128;

  Index deepest_size() const { return input_size / 8; }
  Index deepest_filters() const { return stage_filters[3]; }
  Index predicted_frames() const { return total_frames - 1; }
};

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationResult validate_config(const ModelConfig& config);

/// Presets. `reference` is the published 302M configuration; `scaled500m`
/// widens filters and the LSTM to land at ~500M; `tiny` is the desk-scale
/// configuration used throughout the tests.
ModelConfig reference_config();
ModelConfig scaled500m_config();
ModelConfig tiny_config();

/// Flat key-value text round-trip. Unknown keys are errors.
std::string serialize_config(const ModelConfig& config);
ModelConfig parse_config(const std::string& text);
ModelConfig load_config_file(const std::string& path);
void save_config_file(const ModelConfig& config, const std::string& path);

/// SHA-256 over the canonical key-sorted serialization, hex-encoded.
std::string config_fingerprint(const ModelConfig& config);

}  // namespace fitvid
