#include "neuroaffect/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace na {

using json = nlohmann::json;

void ModelSpec::validate() const {
  if (seq_t * seq_c != input_dim)
    throw std::invalid_argument("ModelSpec: seq_t * seq_c must equal input_dim");
  if (conv_blocks.empty())
    throw std::invalid_argument("ModelSpec: at least one conv block required");
  if (lstm_layers < 1 || lstm_hidden < 1)
    throw std::invalid_argument("ModelSpec: BiLSTM stack must be nonempty");
  const std::size_t width = attended_width();
  if (heads_stage1 > 0 && width % heads_stage1 != 0)
    throw std::invalid_argument("ModelSpec: stage-1 heads do not divide width " +
                                std::to_string(width));
  if (heads_stage2 > 0 && width % heads_stage2 != 0)
    throw std::invalid_argument("ModelSpec: stage-2 heads do not divide width " +
                                std::to_string(width));
  if (heads_stage1 == 0 && heads_stage2 == 0)
    throw std::invalid_argument("ModelSpec: at least one attention stage required");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("ModelSpec: dropout must be in [0,1)");
  if (dense_sizes.empty())
    throw std::invalid_argument("ModelSpec: dense head must be nonempty");
}

ModelSpec enhanced_spec() { return ModelSpec{}; }

ModelSpec standard_spec() {
  ModelSpec s;
  for (auto& b : s.conv_blocks) b.residual = false;
  s.lstm_layers = 1;
  s.heads_stage1 = 0;  // stage skipped
  s.heads_stage2 = 8;
  return s;
}

ModelSpec fast_spec(std::size_t input_dim, std::size_t seq_t, std::size_t seq_c) {
  ModelSpec s;
  s.input_dim = input_dim;
  s.seq_t = seq_t;
  s.seq_c = seq_c;
  s.conv_blocks = {{16, 5, 1, false}, {32, 3, 1, true}, {32, 3, 1, true}};
  s.lstm_hidden = 16;  // attended width 32, divisible by 16 and 8
  s.lstm_layers = 1;
  s.dense_sizes = {64, 32};
  return s;
}

void ParamSet::add(const std::string& name, Tensor t) {
  if (has(name)) throw std::invalid_argument("duplicate parameter: " + name);
  entries_.emplace_back(name, std::move(t));
}

Tensor& ParamSet::get(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  throw std::out_of_range("no parameter named " + name);
}

const Tensor& ParamSet::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw std::out_of_range("no parameter named " + name);
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return true;
  return false;
}

std::size_t ParamSet::count_parameters() const {
  std::size_t total = 0;
  for (const auto& [n, t] : entries_) total += t.numel();
  return total;
}

void ParamSet::zero_grads() {
  for (auto& [n, t] : entries_) t.zero_grad();
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& [n, t] : entries_)
    out.add(n, Tensor(t.shape(), t.data(), t.requires_grad()));
  return out;
}

namespace {

// Fan-in-scaled uniform init; biases start at zero.
Tensor init_weight(std::vector<std::size_t> shape, std::size_t fan_in,
                   std::mt19937& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> data(n);
  for (auto& v : data) v = dist(rng);
  return Tensor(std::move(shape), std::move(data), true);
}

void add_lstm_layer(ParamSet& p, const std::string& prefix, std::size_t in_dim,
                    std::size_t hidden, std::mt19937& rng) {
  for (const char* dir : {"fw", "bw"}) {
    const std::string d = prefix + "." + dir;
    p.add(d + ".w_ih", init_weight({in_dim, 4 * hidden}, in_dim, rng));
    p.add(d + ".w_hh", init_weight({hidden, 4 * hidden}, hidden, rng));
    Tensor b = Tensor::zeros({4 * hidden}, true);
    // forget-gate bias +1, gate order (i, f, g, o)
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b.data()[j] = 1.0;
    p.add(d + ".b", std::move(b));
  }
}

void add_attention_stage(ParamSet& p, const std::string& prefix,
                         std::size_t width, std::mt19937& rng) {
  for (const char* w : {"wq", "wk", "wv", "wo"})
    p.add(prefix + "." + w, init_weight({width, width}, width, rng));
  for (const char* b : {"bq", "bk", "bv", "bo"})
    p.add(prefix + "." + b, Tensor::zeros({width}, true));
  p.add(prefix + ".ln_gain", Tensor({width}, std::vector<double>(width, 1.0), true));
  p.add(prefix + ".ln_bias", Tensor::zeros({width}, true));
}

void add_dense(ParamSet& p, const std::string& prefix, std::size_t in_dim,
               std::size_t out_dim, std::mt19937& rng) {
  p.add(prefix + ".w", init_weight({in_dim, out_dim}, in_dim, rng));
  p.add(prefix + ".b", Tensor::zeros({out_dim}, true));
}

}  // namespace

ParamSet build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  ParamSet p;
  std::size_t in_ch = spec.seq_c;
  for (std::size_t i = 0; i < spec.conv_blocks.size(); ++i) {
    const auto& b = spec.conv_blocks[i];
    const std::string prefix = "conv" + std::to_string(i);
    p.add(prefix + ".w",
          init_weight({b.channels, in_ch, b.kernel}, in_ch * b.kernel, rng));
    p.add(prefix + ".b", Tensor::zeros({b.channels}, true));
    if (b.residual && b.channels != in_ch) {
      p.add(prefix + ".proj.w", init_weight({b.channels, in_ch, 1}, in_ch, rng));
      p.add(prefix + ".proj.b", Tensor::zeros({b.channels}, true));
    }
    in_ch = b.channels;
  }
  std::size_t lstm_in = in_ch;
  for (std::size_t l = 0; l < spec.lstm_layers; ++l) {
    add_lstm_layer(p, "lstm" + std::to_string(l), lstm_in, spec.lstm_hidden, rng);
    lstm_in = 2 * spec.lstm_hidden;
  }
  const std::size_t width = spec.attended_width();
  if (spec.heads_stage1 > 0) add_attention_stage(p, "attn1", width, rng);
  if (spec.heads_stage2 > 0) add_attention_stage(p, "attn2", width, rng);
  std::size_t dense_in = 2 * width;  // dual pooling
  for (std::size_t i = 0; i < spec.dense_sizes.size(); ++i) {
    add_dense(p, "dense" + std::to_string(i), dense_in, spec.dense_sizes[i], rng);
    dense_in = spec.dense_sizes[i];
  }
  add_dense(p, "head", dense_in, spec.classes, rng);
  return p;
}

ParamSet build_mlp(const MlpSpec& spec, std::uint64_t seed) {
  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  ParamSet p;
  std::size_t in_dim = spec.input_dim;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    add_dense(p, "dense" + std::to_string(i), in_dim, spec.hidden[i], rng);
    in_dim = spec.hidden[i];
  }
  add_dense(p, "head", in_dim, spec.classes, rng);
  return p;
}

Tensor residual_conv_block(const Tensor& x, const ParamSet& params,
                           const std::string& prefix, const ConvBlockSpec& block) {
  const std::size_t pad = block.kernel / 2;
  Tensor y = relu(conv1d(x, params.get(prefix + ".w"), params.get(prefix + ".b"),
                         block.stride, pad));
  if (!block.residual) return y;
  Tensor shortcut = x;
  if (params.has(prefix + ".proj.w"))
    shortcut = conv1d(x, params.get(prefix + ".proj.w"),
                      params.get(prefix + ".proj.b"), block.stride, 0);
  return add(shortcut, y);
}

namespace {

// One direction of an LSTM over seq [T x F]; returns [T x H] hidden states
// in input order. Gate order (i, f, g, o).
Tensor lstm_direction(const Tensor& seq, const Tensor& w_ih, const Tensor& w_hh,
                      const Tensor& b, bool reverse) {
  const std::size_t t_len = seq.size(0);
  const std::size_t hidden = w_hh.size(0);
  Tensor h = Tensor::zeros({1, hidden});
  Tensor c = Tensor::zeros({1, hidden});
  std::vector<Tensor> outputs(t_len);
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? t_len - 1 - step : step;
    Tensor xt = slice_rows(seq, t, t + 1);
    Tensor z = add(add(matmul(xt, w_ih), matmul(h, w_hh)), b);
    Tensor gi = sigmoid(slice_cols(z, 0, hidden));
    Tensor gf = sigmoid(slice_cols(z, hidden, 2 * hidden));
    Tensor gg = tanh_op(slice_cols(z, 2 * hidden, 3 * hidden));
    Tensor go = sigmoid(slice_cols(z, 3 * hidden, 4 * hidden));
    c = add(mul(gf, c), mul(gi, gg));
    h = mul(go, tanh_op(c));
    outputs[t] = h;
  }
  return concat_rows(outputs);
}

}  // namespace

Tensor bilstm_forward(const Tensor& seq, const ParamSet& params,
                      const std::string& prefix, std::size_t hidden) {
  (void)hidden;
  Tensor fw = lstm_direction(seq, params.get(prefix + ".fw.w_ih"),
                             params.get(prefix + ".fw.w_hh"),
                             params.get(prefix + ".fw.b"), false);
  Tensor bw = lstm_direction(seq, params.get(prefix + ".bw.w_ih"),
                             params.get(prefix + ".bw.w_hh"),
                             params.get(prefix + ".bw.b"), true);
  return concat_cols({fw, bw});
}

Tensor multi_head_attention(const Tensor& x, const ParamSet& params,
                            const std::string& prefix, std::size_t heads,
                            AttentionCapture* capture, const std::string& tag) {
  const std::size_t width = x.size(1);
  if (width % heads != 0)
    throw std::invalid_argument("multi_head_attention: heads do not divide width");
  const std::size_t dk = width / heads;
  Tensor q = add(matmul(x, params.get(prefix + ".wq")), params.get(prefix + ".bq"));
  Tensor k = add(matmul(x, params.get(prefix + ".wk")), params.get(prefix + ".bk"));
  Tensor v = add(matmul(x, params.get(prefix + ".wv")), params.get(prefix + ".bv"));
  std::vector<Tensor> head_outs;
  head_outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
    Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
    Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
    Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dk)));
    Tensor weights = softmax(scores, 1);
    if (capture) {
      capture->matrices.push_back(weights.data());
      capture->tags.push_back(tag + ".head" + std::to_string(h));
    }
    head_outs.push_back(matmul(weights, vh));
  }
  Tensor attended = add(matmul(concat_cols(head_outs), params.get(prefix + ".wo")),
                        params.get(prefix + ".bo"));
  // post-norm residual: LayerNorm(x + Attention(x))
  return layer_norm(add(x, attended), params.get(prefix + ".ln_gain"),
                    params.get(prefix + ".ln_bias"));
}

Tensor forward_model(const ParamSet& params, const ModelSpec& spec,
                     const Tensor& x, bool training, std::mt19937& rng,
                     AttentionCapture* capture) {
  if (x.rank() != 2 || x.size(1) != spec.input_dim)
    throw std::invalid_argument("forward_model: input width mismatch");
  const std::size_t batch = x.size(0);
  std::vector<Tensor> pooled;
  pooled.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor seq = reshape(slice_rows(x, i, i + 1), {spec.seq_t, spec.seq_c});
    Tensor chan = transpose(seq);  // [C x T]
    for (std::size_t bi = 0; bi < spec.conv_blocks.size(); ++bi)
      chan = residual_conv_block(chan, params, "conv" + std::to_string(bi),
                                 spec.conv_blocks[bi]);
    Tensor h = transpose(chan);  // [T x C']
    for (std::size_t l = 0; l < spec.lstm_layers; ++l)
      h = bilstm_forward(h, params, "lstm" + std::to_string(l), spec.lstm_hidden);
    const std::string sample_tag = "sample" + std::to_string(i);
    if (spec.heads_stage1 > 0) {
      h = multi_head_attention(h, params, "attn1", spec.heads_stage1, capture,
                               sample_tag + ".stage1");
      h = dropout(h, spec.dropout, training, rng);
    }
    if (spec.heads_stage2 > 0) {
      h = multi_head_attention(h, params, "attn2", spec.heads_stage2, capture,
                               sample_tag + ".stage2");
      h = dropout(h, spec.dropout, training, rng);
    }
    pooled.push_back(reshape(pool_avg_max(h), {1, 2 * spec.attended_width()}));
  }
  Tensor h = concat_rows(pooled);
  for (std::size_t i = 0; i < spec.dense_sizes.size(); ++i) {
    const std::string prefix = "dense" + std::to_string(i);
    h = relu(add(matmul(h, params.get(prefix + ".w")), params.get(prefix + ".b")));
    h = dropout(h, spec.dropout, training, rng);
  }
  Tensor logits = add(matmul(h, params.get("head.w")), params.get("head.b"));
  return softmax(logits, 1);
}

Tensor forward_mlp(const ParamSet& params, const MlpSpec& spec, const Tensor& x,
                   bool training, std::mt19937& rng) {
  (void)training;
  (void)rng;
  if (x.rank() != 2 || x.size(1) != spec.input_dim)
    throw std::invalid_argument("forward_mlp: input width mismatch");
  Tensor h = x;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    const std::string prefix = "dense" + std::to_string(i);
    h = relu(add(matmul(h, params.get(prefix + ".w")), params.get(prefix + ".b")));
  }
  Tensor logits = add(matmul(h, params.get("head.w")), params.get("head.b"));
  return softmax(logits, 1);
}

Network make_enhanced_network(const ModelSpec& spec, std::uint64_t seed) {
  Network net;
  net.params = build_model(spec, seed);
  net.classes = spec.classes;
  net.forward = [spec](const ParamSet& p, const Tensor& x, bool training,
                       std::mt19937& rng) {
    return forward_model(p, spec, x, training, rng);
  };
  return net;
}

Network make_mlp_network(const MlpSpec& spec, std::uint64_t seed) {
  Network net;
  net.params = build_mlp(spec, seed);
  net.classes = spec.classes;
  net.forward = [spec](const ParamSet& p, const Tensor& x, bool training,
                       std::mt19937& rng) {
    return forward_mlp(p, spec, x, training, rng);
  };
  return net;
}

// --- checkpoint -----------------------------------------------------------

namespace {
constexpr char kMagic[] = "NACK1\n";
}

void save_checkpoint(const std::string& path, const std::string& spec_json,
                     const ParamSet& params, std::uint64_t seed) {
  json header;
  header["spec"] = json::parse(spec_json);
  header["seed"] = seed;
  json plist = json::array();
  for (const auto& [name, t] : params.entries())
    plist.push_back({{"name", name}, {"shape", t.shape()}});
  header["params"] = plist;
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic) - 1);
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& [name, t] : params.entries())
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("truncated checkpoint header in " + path);
  json header = json::parse(htext);

  Checkpoint ck;
  ck.spec_json = header["spec"].dump();
  ck.seed = header["seed"].get<std::uint64_t>();
  for (const auto& entry : header["params"]) {
    const std::string name = entry["name"].get<std::string>();
    std::vector<std::size_t> shape = entry["shape"].get<std::vector<std::size_t>>();
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    std::vector<double> data(n);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint data in " + path);
    ck.params.add(name, Tensor(std::move(shape), std::move(data), true));
  }
  return ck;
}

std::string model_spec_to_json(const ModelSpec& spec) {
  json blocks = json::array();
  for (const auto& b : spec.conv_blocks)
    blocks.push_back({{"channels", b.channels},
                      {"kernel", b.kernel},
                      {"stride", b.stride},
                      {"residual", b.residual}});
  json j = {{"kind", "hybrid"},
            {"input_dim", spec.input_dim},
            {"seq_t", spec.seq_t},
            {"seq_c", spec.seq_c},
            {"conv_blocks", blocks},
            {"lstm_hidden", spec.lstm_hidden},
            {"lstm_layers", spec.lstm_layers},
            {"heads_stage1", spec.heads_stage1},
            {"heads_stage2", spec.heads_stage2},
            {"dense_sizes", spec.dense_sizes},
            {"dropout", spec.dropout},
            {"classes", spec.classes}};
  return j.dump();
}

ModelSpec model_spec_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ModelSpec s;
  s.input_dim = j["input_dim"].get<std::size_t>();
  s.seq_t = j["seq_t"].get<std::size_t>();
  s.seq_c = j["seq_c"].get<std::size_t>();
  s.conv_blocks.clear();
  for (const auto& b : j["conv_blocks"])
    s.conv_blocks.push_back({b["channels"].get<std::size_t>(),
                             b["kernel"].get<std::size_t>(),
                             b["stride"].get<std::size_t>(),
                             b["residual"].get<bool>()});
  s.lstm_hidden = j["lstm_hidden"].get<std::size_t>();
  s.lstm_layers = j["lstm_layers"].get<std::size_t>();
  s.heads_stage1 = j["heads_stage1"].get<std::size_t>();
  s.heads_stage2 = j["heads_stage2"].get<std::size_t>();
  s.dense_sizes = j["dense_sizes"].get<std::vector<std::size_t>>();
  s.dropout = j["dropout"].get<double>();
  s.classes = j["classes"].get<std::size_t>();
  return s;
}

}  // namespace na
