#include "neuroaffect/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace na {

void TrainSpec::validate() const {
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw std::invalid_argument("TrainSpec: label_smoothing must be in [0,1)");
  if (clip_norm <= 0.0)
    throw std::invalid_argument("TrainSpec: clip_norm must be > 0");
  if (patience < 1) throw std::invalid_argument("TrainSpec: patience must be >= 1");
  if (epochs < 1 || batch < 1)
    throw std::invalid_argument("TrainSpec: epochs and batch must be >= 1");
}

AdamWState AdamWState::init(const ParamSet& params) {
  AdamWState s;
  for (const auto& [name, t] : params.entries()) {
    s.m.emplace_back(t.numel(), 0.0);
    s.v.emplace_back(t.numel(), 0.0);
  }
  return s;
}

Tensor label_smoothed_ce(const Tensor& probs, const std::vector<int>& labels,
                         double epsilon) {
  const std::size_t b = probs.size(0), c = probs.size(1);
  if (labels.size() != b)
    throw std::invalid_argument("label_smoothed_ce: label count mismatch");
  std::vector<double> targets(b * c, epsilon / c);
  for (std::size_t i = 0; i < b; ++i)
    targets[i * c + labels[i]] += 1.0 - epsilon;
  Tensor q({b, c}, std::move(targets));
  return scale(sum(mul(log_clamped(probs), q)), -1.0 / static_cast<double>(b));
}

double cosine_lr(std::size_t epoch, std::size_t cycle, double eta_max,
                 double eta_min, std::size_t warmup) {
  if (cycle < 1) throw std::invalid_argument("cosine_lr: cycle must be >= 1");
  if (epoch < warmup)
    return eta_max * static_cast<double>(epoch + 1) / static_cast<double>(warmup);
  const std::size_t t = epoch - warmup;
  if (t >= cycle) return eta_min;
  // exact at the endpoints and midpoint
  double cosine;
  if (t == 0) cosine = 1.0;
  else if (2 * t == cycle) cosine = 0.0;
  else if (t == cycle) cosine = -1.0;
  else cosine = std::cos(M_PI * static_cast<double>(t) / static_cast<double>(cycle));
  return eta_min + 0.5 * (eta_max - eta_min) * (1.0 + cosine);
}

void adamw_step(ParamSet& params, AdamWState& state, double lr,
                double weight_decay) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto& entries = params.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& w = entries[p].second.data();
    auto& g = entries[p].second.grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * (mhat / (std::sqrt(vhat) + state.eps) + weight_decay * w[i]);
    }
  }
}

double clip_gradients(ParamSet& params, double max_norm) {
  if (max_norm <= 0.0)
    throw std::invalid_argument("clip_gradients: max_norm must be > 0");
  double sq = 0.0;
  for (auto& [name, t] : params.entries())
    for (double g : t.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    // multiply before dividing so e.g. [3,4] with max 1 lands exactly on
    // [0.6, 0.8]
    for (auto& [name, t] : params.entries())
      for (double& g : t.grad()) g = g * max_norm / norm;
  }
  return norm;
}

namespace {

std::vector<double> gather_rows(const std::vector<double>& x, std::size_t dim,
                                const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size() * dim);
  for (std::size_t i : idx)
    out.insert(out.end(), x.begin() + i * dim, x.begin() + (i + 1) * dim);
  return out;
}

// Eval-mode loss and accuracy over an index set, in minibatches.
std::pair<double, double> evaluate(const Network& net, const std::vector<double>& x,
                                   const std::vector<int>& labels, std::size_t dim,
                                   const std::vector<std::size_t>& idx,
                                   double label_smoothing, std::size_t batch) {
  NoGradGuard ng;
  std::mt19937 rng(0);  // unused in eval mode
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < idx.size(); start += batch) {
    const std::size_t end = std::min(start + batch, idx.size());
    std::vector<std::size_t> chunk(idx.begin() + start, idx.begin() + end);
    Tensor xb({chunk.size(), dim}, gather_rows(x, dim, chunk));
    std::vector<int> yb;
    for (std::size_t i : chunk) yb.push_back(labels[i]);
    Tensor probs = net.forward(net.params, xb, false, rng);
    loss_sum += label_smoothed_ce(probs, yb, label_smoothing).item() * chunk.size();
    const auto& pv = probs.data();
    const std::size_t c = probs.size(1);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < c; ++j)
        if (pv[i * c + j] > pv[i * c + arg]) arg = j;
      if (static_cast<int>(arg) == yb[i]) ++correct;
    }
  }
  return {loss_sum / idx.size(), static_cast<double>(correct) / idx.size()};
}

}  // namespace

TrainResult train(Network& net, const std::vector<double>& x,
                  const std::vector<int>& labels, std::size_t dim,
                  const std::vector<std::size_t>& train_idx,
                  const std::vector<std::size_t>& val_idx,
                  const TrainSpec& spec) {
  spec.validate();
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train: empty train or validation set");
  {
    std::vector<std::size_t> sorted_train = train_idx;
    std::sort(sorted_train.begin(), sorted_train.end());
    for (std::size_t i : val_idx)
      if (std::binary_search(sorted_train.begin(), sorted_train.end(), i))
        throw std::invalid_argument("train: train and validation sets overlap");
  }

  AdamWState opt = AdamWState::init(net.params);
  std::mt19937 shuffle_rng(static_cast<std::uint32_t>(spec.seed));
  std::mt19937 dropout_rng(static_cast<std::uint32_t>(spec.seed ^ 0x9e3779b9u));
  std::mt19937 augment_rng(static_cast<std::uint32_t>(spec.seed ^ 0x7f4a7c15u));

  TrainResult result;
  result.trace.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const std::size_t cycle =
      spec.epochs > spec.warmup_epochs ? spec.epochs - spec.warmup_epochs : 1;

  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    const double lr =
        cosine_lr(epoch, cycle, spec.lr_init, spec.lr_min, spec.warmup_epochs);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += spec.batch) {
      const std::size_t end = std::min(start + spec.batch, order.size());
      std::vector<std::size_t> chunk(order.begin() + start, order.begin() + end);
      std::vector<double> rows = gather_rows(x, dim, chunk);
      if (spec.augment.enabled)
        augment(rows, dim, spec.augment.noise_sigma, spec.augment.scale_lo,
                spec.augment.scale_hi, augment_rng);
      Tensor xb({chunk.size(), dim}, std::move(rows));
      std::vector<int> yb;
      for (std::size_t i : chunk) yb.push_back(labels[i]);

      net.params.zero_grads();
      Tensor probs = net.forward(net.params, xb, true, dropout_rng);
      Tensor loss = label_smoothed_ce(probs, yb, spec.label_smoothing);
      const double loss_val = loss.item();
      if (!std::isfinite(loss_val))
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(start / spec.batch));
      backward(loss);
      clip_gradients(net.params, spec.clip_norm);
      adamw_step(net.params, opt, lr, spec.weight_decay);

      loss_sum += loss_val * chunk.size();
      const auto& pv = probs.data();
      const std::size_t c = probs.size(1);
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < c; ++j)
          if (pv[i * c + j] > pv[i * c + arg]) arg = j;
        if (static_cast<int>(arg) == yb[i]) ++correct;
      }
    }

    auto [val_loss, val_acc] = evaluate(net, x, labels, dim, val_idx,
                                        spec.label_smoothing, spec.batch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / order.size();
    rec.train_acc = static_cast<double>(correct) / order.size();
    rec.val_loss = val_loss;
    rec.val_acc = val_acc;
    result.trace.epochs.push_back(rec);

    if (val_loss < result.trace.best_val_loss) {
      result.trace.best_val_loss = val_loss;
      result.trace.best_epoch = epoch;
      result.best_params = net.params.clone();
      since_best = 0;
    } else if (++since_best >= spec.patience) {
      result.trace.stop_reason = "early_stop";
      break;
    }
  }
  if (result.trace.stop_reason.empty())
    result.trace.stop_reason = "epoch_budget";
  // hand the selected checkpoint back to the network
  net.params = result.best_params.clone();
  return result;
}

MlpSpec mlp_baseline_spec(std::size_t input_dim) {
  MlpSpec s;
  s.input_dim = input_dim;
  s.hidden = {256, 128};
  s.classes = 3;
  return s;
}

std::vector<int> predict_labels(const Network& net, const std::vector<double>& x,
                                std::size_t dim,
                                const std::vector<std::size_t>& idx) {
  NoGradGuard ng;
  std::mt19937 rng(0);
  std::vector<int> out;
  out.reserve(idx.size());
  const std::size_t batch = 64;
  for (std::size_t start = 0; start < idx.size(); start += batch) {
    const std::size_t end = std::min(start + batch, idx.size());
    std::vector<std::size_t> chunk(idx.begin() + start, idx.begin() + end);
    Tensor xb({chunk.size(), dim}, gather_rows(x, dim, chunk));
    Tensor probs = net.forward(net.params, xb, false, rng);
    const auto& pv = probs.data();
    const std::size_t c = probs.size(1);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < c; ++j)
        if (pv[i * c + j] > pv[i * c + arg]) arg = j;
      out.push_back(static_cast<int>(arg));
    }
  }
  return out;
}

double accuracy_on(const Network& net, const std::vector<double>& x,
                   const std::vector<int>& labels, std::size_t dim,
                   const std::vector<std::size_t>& idx) {
  auto preds = predict_labels(net, x, dim, idx);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (preds[i] == labels[idx[i]]) ++correct;
  return static_cast<double>(correct) / idx.size();
}

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  out << "epoch,lr,train_loss,train_acc,val_loss,val_acc\n";
  char buf[200];
  for (const auto& r : trace.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.lr, r.train_loss, r.train_acc, r.val_loss, r.val_acc);
    out << buf;
  }
}

}  // namespace na
