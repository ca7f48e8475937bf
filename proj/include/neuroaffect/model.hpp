#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "neuroaffect/tensor.hpp"

namespace na {

struct ConvBlockSpec {
  std::size_t channels = 64;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  bool residual = false;
};

// Declarative architecture record for the hybrid model. The flat input row
// is reshaped to seq_t timesteps x seq_c channels before the conv stages.
struct ModelSpec {
  std::size_t input_dim = 988;
  std::size_t seq_t = 76;
  std::size_t seq_c = 13;
  std::vector<ConvBlockSpec> conv_blocks = {
      {64, 5, 1, false}, {128, 3, 1, true}, {128, 3, 1, true}};
  std::size_t lstm_hidden = 128;
  std::size_t lstm_layers = 2;
  std::size_t heads_stage1 = 16;
  std::size_t heads_stage2 = 8;
  std::vector<std::size_t> dense_sizes = {512, 256, 128};
  double dropout = 0.3;
  std::size_t classes = 3;

  std::size_t attended_width() const { return 2 * lstm_hidden; }
  void validate() const;
};

// Default full-size architecture.
ModelSpec enhanced_spec();
// Residuals off, 16-head stage removed (single 8-head attention), single
// BiLSTM layer: the plain hybrid comparison row.
ModelSpec standard_spec();
// Shrunken architecture for desk-scale runs on a given input width.
ModelSpec fast_spec(std::size_t input_dim, std::size_t seq_t, std::size_t seq_c);

struct MlpSpec {
  std::size_t input_dim = 988;
  std::vector<std::size_t> hidden = {256, 128};
  std::size_t classes = 3;
};

// Named parameter tensors in a stable order.
class ParamSet {
 public:
  void add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::size_t count_parameters() const;
  void zero_grads();
  ParamSet clone() const;  // deep copy of values, fresh graph leaves

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

ParamSet build_model(const ModelSpec& spec, std::uint64_t seed);
ParamSet build_mlp(const MlpSpec& spec, std::uint64_t seed);

// Optional capture of attention weight matrices (one row-stochastic [T x T]
// matrix per head per stage, per sample).
struct AttentionCapture {
  std::vector<std::vector<double>> matrices;
  std::vector<std::string> tags;  // "sample0.stage1.head3", ...
};

// X is [B x input_dim]; returns class probabilities [B x classes].
Tensor forward_model(const ParamSet& params, const ModelSpec& spec,
                     const Tensor& x, bool training, std::mt19937& rng,
                     AttentionCapture* capture = nullptr);
Tensor forward_mlp(const ParamSet& params, const MlpSpec& spec, const Tensor& x,
                   bool training, std::mt19937& rng);

// Building blocks exposed for testing and reuse.
Tensor residual_conv_block(const Tensor& x, const ParamSet& params,
                           const std::string& prefix, const ConvBlockSpec& block);
Tensor bilstm_forward(const Tensor& seq, const ParamSet& params,
                      const std::string& prefix, std::size_t hidden);
Tensor multi_head_attention(const Tensor& x, const ParamSet& params,
                            const std::string& prefix, std::size_t heads,
                            AttentionCapture* capture = nullptr,
                            const std::string& tag = "");

// A trainable network: parameters plus a forward function producing class
// probabilities. Lets one training loop serve the hybrid models and the MLP.
struct Network {
  ParamSet params;
  std::size_t classes = 3;
  std::function<Tensor(const ParamSet&, const Tensor&, bool, std::mt19937&)>
      forward;
};

Network make_enhanced_network(const ModelSpec& spec, std::uint64_t seed);
Network make_mlp_network(const MlpSpec& spec, std::uint64_t seed);

// Checkpoint file: "NACK1\n", 8-byte little-endian JSON header length, JSON
// header (spec kind + spec + seed + parameter names/shapes), then each
// parameter's values as little-endian fp64 in header order.
void save_checkpoint(const std::string& path, const std::string& spec_json,
                     const ParamSet& params, std::uint64_t seed);
struct Checkpoint {
  std::string spec_json;
  ParamSet params;
  std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::string& path);

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& json_text);

}  // namespace na
