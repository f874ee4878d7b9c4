#pragma once

#include "fitvid/config.hpp"
#include "fitvid/rng.hpp"
#include "fitvid/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fitvid {

enum class ParamKind {
  kConvKernel,  // (KH,KW,Cin,Cout)
  kDenseWeight, // (in,out)
  kBias,
  kBnScale,
  kBnShift,
  kLstmInput,   // (in,4H)
  kLstmHidden,  // (H,4H)
  kLstmBias,    // (4H), forget block initialized to 1
};

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamKind kind;
};

/// Walks every learnable tensor of the architecture in a fixed order. This is
/// the single source of truth for shapes: the allocator, the parameter
/// counter, and the checkpoint layout all derive from it.
void for_each_param(const ModelConfig& config,
                    const std::function<void(const ParamSpec&)>& fn);

/// Batch-norm running-statistic buffers (not learnable, still checkpointed).
void for_each_norm_buffer(const ModelConfig& config,
                          const std::function<void(const std::string& name,
                                                   Index channels)>& fn);

/// Number of learnable scalars implied by the architecture tables.
int64_t count_parameters(const ModelConfig& config);

/// Named tensors in enumeration order.
class ParamStore {
 public:
  static ParamStore zeros(const ModelConfig& config);
  static ParamStore init(const ModelConfig& config, Rng& rng);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<std::string>& order() const { return order_; }
  int64_t total_size() const;

  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;

 private:
  std::vector<std::string> order_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, size_t> index_;

  void insert(const std::string& name, Tensor t);
};

}  // namespace fitvid
