#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "neuroaffect/model.hpp"
#include "neuroaffect/tensor.hpp"

using namespace na;

namespace {

Tensor randn(std::vector<std::size_t> shape, std::mt19937& rng, double sd = 1.0,
             bool requires_grad = true) {
  std::normal_distribution<double> dist(0.0, sd);
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

void add_bilstm_params(ParamSet& p, const std::string& prefix, std::size_t in_dim,
                       std::size_t hidden, std::mt19937* rng) {
  for (const char* dir : {"fw", "bw"}) {
    const std::string d = prefix + "." + std::string(dir);
    if (rng) {
      p.add(d + ".w_ih", randn({in_dim, 4 * hidden}, *rng, 0.3));
      p.add(d + ".w_hh", randn({hidden, 4 * hidden}, *rng, 0.3));
      p.add(d + ".b", randn({4 * hidden}, *rng, 0.1));
    } else {
      p.add(d + ".w_ih", Tensor::zeros({in_dim, 4 * hidden}, true));
      p.add(d + ".w_hh", Tensor::zeros({hidden, 4 * hidden}, true));
      p.add(d + ".b", Tensor::zeros({4 * hidden}, true));
    }
  }
}

}  // namespace

TEST_CASE("residual block with zero weights is the identity") {
  const std::size_t C = 4, L = 6;
  ParamSet p;
  p.add("blk.w", Tensor::zeros({C, C, 3}, true));
  p.add("blk.b", Tensor::zeros({C}, true));
  std::mt19937 rng(1);
  Tensor x = randn({C, L}, rng);
  ConvBlockSpec block{C, 3, 1, true};
  Tensor y = residual_conv_block(x, p, "blk", block);
  REQUIRE(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-15));
}

TEST_CASE("residual block projects when channel counts differ") {
  ModelSpec spec = fast_spec(24, 6, 4);
  ParamSet p = build_model(spec, 3);
  std::mt19937 rng(2);
  Tensor x = randn({spec.seq_c, spec.seq_t}, rng);
  // second block changes channels relative to the first, so it carries a
  // projection when residual
  bool any_proj = false;
  for (const auto& [name, t] : p.entries())
    if (name.find(".proj.w") != std::string::npos) any_proj = true;
  ConvBlockSpec& b1 = spec.conv_blocks[1];
  if (b1.residual && spec.conv_blocks[0].channels != b1.channels)
    CHECK(any_proj);
}

TEST_CASE("BiLSTM with zero weights outputs zero") {
  const std::size_t T = 5, F = 3, H = 4;
  ParamSet p;
  add_bilstm_params(p, "l", F, H, nullptr);
  std::mt19937 rng(3);
  Tensor seq = randn({T, F}, rng);
  Tensor out = bilstm_forward(seq, p, "l", H);
  REQUIRE(out.shape() == std::vector<std::size_t>{T, 2 * H});
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("BiLSTM reverse property with tied direction weights") {
  const std::size_t T = 6, F = 3, H = 4;
  std::mt19937 rng(4);
  ParamSet p;
  add_bilstm_params(p, "l", F, H, &rng);
  // tie backward weights to forward weights
  p.get("l.bw.w_ih") = Tensor({F, 4 * H}, p.get("l.fw.w_ih").data(), true);
  p.get("l.bw.w_hh") = Tensor({H, 4 * H}, p.get("l.fw.w_hh").data(), true);
  p.get("l.bw.b") = Tensor({4 * H}, p.get("l.fw.b").data(), true);

  Tensor seq = randn({T, F}, rng);
  std::vector<double> rev(T * F);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t f = 0; f < F; ++f)
      rev[t * F + f] = seq.data()[(T - 1 - t) * F + f];
  Tensor seq_rev({T, F}, std::move(rev));

  Tensor out = bilstm_forward(seq, p, "l", H);
  Tensor out_rev = bilstm_forward(seq_rev, p, "l", H);
  // reversing the input swaps the two direction halves and flips time
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t h = 0; h < H; ++h) {
      CHECK(out_rev.data()[t * 2 * H + h] ==
            doctest::Approx(out.data()[(T - 1 - t) * 2 * H + H + h]).epsilon(1e-12));
      CHECK(out_rev.data()[t * 2 * H + H + h] ==
            doctest::Approx(out.data()[(T - 1 - t) * 2 * H + h]).epsilon(1e-12));
    }
}

TEST_CASE("attention rows are stochastic; zero projections give uniform") {
  const std::size_t T = 5, W = 8, heads = 4;
  std::mt19937 rng(5);
  ParamSet p;
  for (const char* w : {"wq", "wk", "wv", "wo"})
    p.add(std::string("a.") + w, randn({W, W}, rng, 0.4));
  for (const char* b : {"bq", "bk", "bv", "bo"})
    p.add(std::string("a.") + b, Tensor::zeros({W}, true));
  p.add("a.ln_gain", Tensor({W}, std::vector<double>(W, 1.0), true));
  p.add("a.ln_bias", Tensor::zeros({W}, true));

  Tensor x = randn({T, W}, rng);
  AttentionCapture cap;
  Tensor y = multi_head_attention(x, p, "a", heads, &cap, "s");
  REQUIRE(y.shape() == std::vector<std::size_t>{T, W});
  REQUIRE(cap.matrices.size() == heads);
  for (const auto& m : cap.matrices) {
    REQUIRE(m.size() == T * T);
    for (std::size_t r = 0; r < T; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < T; ++c) {
        CHECK(m[r * T + c] >= 0.0);
        s += m[r * T + c];
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  // zero query/key projections -> all scores equal -> uniform attention
  p.get("a.wq") = Tensor::zeros({W, W}, true);
  p.get("a.wk") = Tensor::zeros({W, W}, true);
  AttentionCapture cap2;
  multi_head_attention(x, p, "a", heads, &cap2, "s");
  for (const auto& m : cap2.matrices)
    for (double v : m) CHECK(v == doctest::Approx(1.0 / T).epsilon(1e-12));
}

TEST_CASE("dense 10->3 has 33 parameters") {
  MlpSpec spec;
  spec.input_dim = 10;
  spec.hidden = {};
  spec.classes = 3;
  ParamSet p = build_mlp(spec, 0);
  CHECK(p.count_parameters() == 33);
}

TEST_CASE("MLP baseline 988->256->128->3 parameter count") {
  MlpSpec spec;
  spec.input_dim = 988;
  spec.hidden = {256, 128};
  spec.classes = 3;
  ParamSet p = build_mlp(spec, 0);
  const std::size_t expected =
      988 * 256 + 256 + 256 * 128 + 128 + 128 * 3 + 3;
  CHECK(p.count_parameters() == expected);
}

TEST_CASE("BiLSTM layer parameter count formula 2x4(FH+H^2+H)") {
  ModelSpec spec = fast_spec(24, 6, 4);
  ParamSet p = build_model(spec, 0);
  const std::size_t F = spec.conv_blocks.back().channels;
  const std::size_t H = spec.lstm_hidden;
  std::size_t lstm0 = 0;
  for (const auto& [name, t] : p.entries())
    if (name.rfind("lstm0.", 0) == 0) lstm0 += t.numel();
  CHECK(lstm0 == 2 * 4 * (F * H + H * H + H));
}

TEST_CASE("default enhanced spec parameter count in [1.5M, 2.7M]") {
  ParamSet p = build_model(enhanced_spec(), 0);
  const std::size_t n = p.count_parameters();
  CHECK(n >= 1'500'000);
  CHECK(n <= 2'700'000);
  MESSAGE("enhanced parameter count: ", n);
}

TEST_CASE("spec validation rejects bad configurations") {
  ModelSpec s = enhanced_spec();
  s.seq_t = 10;  // 10 * 13 != 988
  CHECK_THROWS(s.validate());
  ModelSpec s2 = enhanced_spec();
  s2.heads_stage1 = 7;  // does not divide 256
  CHECK_THROWS(s2.validate());
}

TEST_CASE("forward produces row-stochastic probabilities") {
  ModelSpec spec = fast_spec(24, 6, 4);
  ParamSet p = build_model(spec, 7);
  std::mt19937 rng(7);
  NoGradGuard ng;
  Tensor x = randn({3, 24}, rng, 1.0, false);
  Tensor probs = forward_model(p, spec, x, false, rng);
  REQUIRE(probs.shape() == std::vector<std::size_t>{3, 3});
  for (int r = 0; r < 3; ++r) {
    double s = 0;
    for (int c = 0; c < 3; ++c) {
      CHECK(probs.data()[r * 3 + c] >= 0.0);
      s += probs.data()[r * 3 + c];
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("eval-mode forward is deterministic") {
  ModelSpec spec = fast_spec(24, 6, 4);
  ParamSet p = build_model(spec, 9);
  std::mt19937 rng_x(8);
  Tensor x = randn({2, 24}, rng_x, 1.0, false);
  NoGradGuard ng;
  std::mt19937 r1(1), r2(99);
  Tensor a = forward_model(p, spec, x, false, r1);
  Tensor b = forward_model(p, spec, x, false, r2);
  CHECK(a.data() == b.data());
}

TEST_CASE("train-mode dropout with fixed seed is reproducible") {
  ModelSpec spec = fast_spec(24, 6, 4);
  ParamSet p = build_model(spec, 9);
  std::mt19937 rng_x(8);
  Tensor x = randn({2, 24}, rng_x, 1.0, false);
  std::mt19937 r1(42), r2(42);
  Tensor a = forward_model(p, spec, x, true, r1);
  Tensor b = forward_model(p, spec, x, true, r2);
  CHECK(a.data() == b.data());
}

TEST_CASE("shrunken end-to-end gradient check") {
  // tiny architecture so the finite-difference sweep stays fast
  ModelSpec spec;
  spec.input_dim = 12;
  spec.seq_t = 4;
  spec.seq_c = 3;
  spec.conv_blocks = {{4, 3, 1, true}};
  spec.lstm_hidden = 3;
  spec.lstm_layers = 1;
  spec.heads_stage1 = 2;
  spec.heads_stage2 = 2;
  spec.dense_sizes = {5};
  spec.dropout = 0.0;
  ParamSet p = build_model(spec, 13);

  std::mt19937 rng_x(13);
  Tensor x = randn({2, 12}, rng_x, 1.0, false);
  std::vector<Tensor> leaves;
  for (auto& [name, t] : p.entries()) leaves.push_back(t);

  std::mt19937 fwd_rng(0);
  auto f = [&] {
    Tensor probs = forward_model(p, spec, x, false, fwd_rng);
    // scalar objective: negative log prob of class 0 for both rows
    Tensor lp = log_clamped(probs);
    return scale(sum(mul(lp, Tensor({2, 3}, {1, 0, 0, 1, 0, 0}))), -0.5);
  };
  auto report = finite_diff_check(f, leaves);
  CHECK(report.checked > 100);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("checkpoint round trip preserves everything") {
  ModelSpec spec = fast_spec(24, 6, 4);
  ParamSet p = build_model(spec, 17);
  const std::string path =
      (std::filesystem::temp_directory_path() / "na_ckpt.bin").string();
  save_checkpoint(path, model_spec_to_json(spec), p, 17);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.seed == 17);
  ModelSpec back = model_spec_from_json(ck.spec_json);
  CHECK(back.input_dim == spec.input_dim);
  CHECK(back.lstm_hidden == spec.lstm_hidden);
  CHECK(back.conv_blocks.size() == spec.conv_blocks.size());
  REQUIRE(ck.params.entries().size() == p.entries().size());
  for (std::size_t i = 0; i < p.entries().size(); ++i) {
    CHECK(ck.params.entries()[i].first == p.entries()[i].first);
    CHECK(ck.params.entries()[i].second.data() == p.entries()[i].second.data());
  }
  std::filesystem::remove(path);
}

TEST_CASE("load_checkpoint rejects a corrupted magic") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "na_bad_ckpt.bin").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "GARBAGE!";
  }
  CHECK_THROWS(load_checkpoint(path));
  std::filesystem::remove(path);
}

TEST_CASE("identical seeds build identical parameters") {
  ParamSet a = build_model(fast_spec(24, 6, 4), 5);
  ParamSet b = build_model(fast_spec(24, 6, 4), 5);
  REQUIRE(a.entries().size() == b.entries().size());
  for (std::size_t i = 0; i < a.entries().size(); ++i)
    CHECK(a.entries()[i].second.data() == b.entries()[i].second.data());
  ParamSet c = build_model(fast_spec(24, 6, 4), 6);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.entries().size(); ++i)
    if (a.entries()[i].second.data() != c.entries()[i].second.data())
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("LSTM forget gate bias initialized to one") {
  ModelSpec spec = fast_spec(24, 6, 4);
  ParamSet p = build_model(spec, 3);
  const std::size_t H = spec.lstm_hidden;
  const auto& b = p.get("lstm0.fw.b").data();
  // gate order i, f, g, o: the second block of H entries is the forget bias
  for (std::size_t i = 0; i < H; ++i) {
    CHECK(b[i] == 0.0);
    CHECK(b[H + i] == 1.0);
    CHECK(b[2 * H + i] == 0.0);
    CHECK(b[3 * H + i] == 0.0);
  }
}

TEST_CASE("ParamSet clone is a deep copy") {
  ParamSet a;
  a.add("w", Tensor({2}, {1.0, 2.0}, true));
  ParamSet b = a.clone();
  b.get("w").data()[0] = 99.0;
  CHECK(a.get("w").data()[0] == 1.0);
}
