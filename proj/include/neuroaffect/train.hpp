#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neuroaffect/data.hpp"
#include "neuroaffect/model.hpp"
#include "neuroaffect/tensor.hpp"

namespace na {

struct AugmentSpec {
  bool enabled = true;
  double noise_sigma = 0.05;  // post-normalization units
  double scale_lo = 0.9;
  double scale_hi = 1.1;
};

struct TrainSpec {
  std::size_t epochs = 100;
  std::size_t batch = 32;
  double lr_init = 1e-3;
  double lr_min = 1e-5;
  std::size_t warmup_epochs = 5;
  double weight_decay = 1e-4;
  double label_smoothing = 0.1;
  double clip_norm = 1.0;
  std::size_t patience = 30;
  std::uint64_t seed = 0;
  AugmentSpec augment;

  void validate() const;
};

// Per-parameter first/second moments, beta1=0.9, beta2=0.999.
struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamWState init(const ParamSet& params);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::string stop_reason;  // "early_stop" or "epoch_budget"
};

// Mean over the batch of -sum_c q_c log p_c with q = (1-eps)*onehot + eps/C.
// Log is floored at 1e-12. `probs` rows must already sum to 1.
Tensor label_smoothed_ce(const Tensor& probs, const std::vector<int>& labels,
                         double epsilon);

// Linear warmup from 0 to eta_max over `warmup` epochs, then cosine decay
// over the remaining cycle. `epoch` counts from 0 across the whole run.
double cosine_lr(std::size_t epoch, std::size_t cycle, double eta_max,
                 double eta_min, std::size_t warmup);

void adamw_step(ParamSet& params, AdamWState& state, double lr,
                double weight_decay);

// Joint L2 norm over every parameter's gradient; scales all of them when the
// norm exceeds max_norm. Returns the pre-clip norm.
double clip_gradients(ParamSet& params, double max_norm);

struct TrainResult {
  ParamSet best_params;
  TrainTrace trace;
};

// X is a row-major matrix (already normalized), labels parallel to rows.
// Indices select the train/validation subsets. Implements the full protocol:
// augment, forward, smoothed CE, backprop with clipping, AdamW + cosine
// schedule, best-checkpoint selection, early stopping.
TrainResult train(Network& net, const std::vector<double>& x,
                  const std::vector<int>& labels, std::size_t dim,
                  const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx,
                  const TrainSpec& spec);

// Dense 988 -> 256 -> 128 -> 3 with ReLU; the MLP comparison row.
MlpSpec mlp_baseline_spec(std::size_t input_dim = 988);

// Hard predictions and accuracy with eval-mode forward in minibatches.
std::vector<int> predict_labels(const Network& net, const std::vector<double>& x,
                                std::size_t dim,
                                const std::vector<std::size_t>& idx);
double accuracy_on(const Network& net, const std::vector<double>& x,
                   const std::vector<int>& labels, std::size_t dim,
                   const std::vector<std::size_t>& idx);

void write_trace_csv(const TrainTrace& trace, const std::string& path);

}  // namespace na
