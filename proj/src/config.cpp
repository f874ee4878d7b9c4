#include "fitvid/config.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace fitvid {

namespace {

std::string fmt_scalar(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_filters(const std::array<Index, 4>& f) {
  std::string s;
  for (size_t i = 0; i < f.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(f[i]);
  }
  return s;
}

// key -> value in canonical (sorted) order
std::map<std::string, std::string> to_map(const ModelConfig& c) {
  return {
      {"action_dim", std::to_string(c.action_dim)},
      {"adam_beta1", fmt_scalar(c.adam_beta1)},
      {"adam_beta2", fmt_scalar(c.adam_beta2)},
      {"adam_eps", fmt_scalar(c.adam_eps)},
      {"batch_size", std::to_string(c.batch_size)},
      {"beta", fmt_scalar(c.beta)},
      {"cells_per_block", std::to_string(c.cells_per_block)},
      {"channels", std::to_string(c.channels)},
      {"context_frames", std::to_string(c.context_frames)},
      {"decoder_expand_ratio", std::to_string(c.decoder_expand_ratio)},
      {"g_dim", std::to_string(c.g_dim)},
      {"grad_clip_l2", fmt_scalar(c.grad_clip_l2)},
      {"input_size", std::to_string(c.input_size)},
      {"learning_rate", fmt_scalar(c.learning_rate)},
      {"rnn_size", std::to_string(c.rnn_size)},
      {"stage_filters", fmt_filters(c.stage_filters)},
      {"total_frames", std::to_string(c.total_frames)},
      {"z_dim", std::to_string(c.z_dim)},
  };
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ValidationResult validate_config(const ModelConfig& c) {
  ValidationResult r;
  auto fail = [&r](const std::string& msg) { r.violations.push_back(msg); };
  if (c.input_size < 8 || c.input_size % 8 != 0)
    fail("input_size not divisible by 8");
  if (c.channels < 1) fail("channels >= 1");
  if (c.z_dim < 1) fail("z_dim >= 1");
  if (c.g_dim < 1) fail("g_dim >= 1");
  if (c.rnn_size < 1) fail("rnn_size >= 1");
  for (size_t i = 0; i < c.stage_filters.size(); ++i)
    if (c.stage_filters[i] < 1)
      fail("stage_filters[" + std::to_string(i) + "] >= 1");
  if (c.action_dim < 0) fail("action_dim >= 0");
  if (c.context_frames < 1) fail("context_frames >= 1");
  if (c.total_frames < c.context_frames + 1)
    fail("total_frames must exceed context_frames");
  if (c.cells_per_block < 1) fail("cells_per_block >= 1");
  if (c.decoder_expand_ratio < 1) fail("decoder_expand_ratio >= 1");
  if (c.batch_size < 1) fail("batch_size >= 1");
  if (c.beta < 0) fail("beta >= 0");
  if (c.learning_rate < 0) fail("learning_rate >= 0");
  if (c.adam_beta1 < 0 || c.adam_beta1 >= 1) fail("adam_beta1 in [0,1)");
  if (c.adam_beta2 < 0 || c.adam_beta2 >= 1) fail("adam_beta2 in [0,1)");
  if (c.adam_eps <= 0) fail("adam_eps > 0");
  if (c.grad_clip_l2 <= 0) fail("grad_clip_l2 > 0");
  return r;
}

ModelConfig reference_config() { return ModelConfig{}; }

ModelConfig scaled500m_config() {
  ModelConfig c;
  c.stage_filters = {80, 160, 320, 640};
  c.rnn_size = 512;
  return c;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.input_size = 32;
  c.stage_filters = {8, 16, 32, 64};
  c.g_dim = 16;
  c.z_dim = 4;
  c.rnn_size = 32;
  c.total_frames = 8;
  c.batch_size = 4;
  return c;
}

std::string serialize_config(const ModelConfig& c) {
  std::string out;
  for (const auto& [k, v] : to_map(c)) out += k + " = " + v + "\n";
  return out;
}

ModelConfig parse_config(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    auto as_index = [&val, &key]() -> Index {
      size_t pos = 0;
      long long v = std::stoll(val, &pos);
      if (pos != val.size()) throw std::invalid_argument("config: bad integer for " + key);
      return static_cast<Index>(v);
    };
    auto as_scalar = [&val, &key]() -> Scalar {
      size_t pos = 0;
      double v = std::stod(val, &pos);
      if (pos != val.size()) throw std::invalid_argument("config: bad number for " + key);
      return v;
    };
    if (key == "input_size") c.input_size = as_index();
    else if (key == "channels") c.channels = as_index();
    else if (key == "context_frames") c.context_frames = as_index();
    else if (key == "total_frames") c.total_frames = as_index();
    else if (key == "z_dim") c.z_dim = as_index();
    else if (key == "g_dim") c.g_dim = as_index();
    else if (key == "rnn_size") c.rnn_size = as_index();
    else if (key == "action_dim") c.action_dim = as_index();
    else if (key == "cells_per_block") c.cells_per_block = as_index();
    else if (key == "decoder_expand_ratio") c.decoder_expand_ratio = as_index();
    else if (key == "batch_size") c.batch_size = as_index();
    else if (key == "beta") c.beta = as_scalar();
    else if (key == "learning_rate") c.learning_rate = as_scalar();
    else if (key == "adam_beta1") c.adam_beta1 = as_scalar();
    else if (key == "adam_beta2") c.adam_beta2 = as_scalar();
    else if (key == "adam_eps") c.adam_eps = as_scalar();
    else if (key == "grad_clip_l2") c.grad_clip_l2 = as_scalar();
    else if (key == "stage_filters") {
      std::istringstream fs(val);
      std::string tok;
      size_t i = 0;
      while (std::getline(fs, tok, ',')) {
        if (i >= 4) throw std::invalid_argument("config: stage_filters takes 4 entries");
        c.stage_filters[i++] = static_cast<Index>(std::stoll(trim(tok)));
      }
      if (i != 4) throw std::invalid_argument("config: stage_filters takes 4 entries");
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  return c;
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config_file(const ModelConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << serialize_config(config);
}

std::string config_fingerprint(const ModelConfig& config) {
  std::string canon = serialize_config(config);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(canon.data(), canon.size(), digest, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("config_fingerprint: digest failure");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace fitvid
