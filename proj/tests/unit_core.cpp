#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "protoseg/core/image.hpp"
#include "protoseg/core/ops.hpp"
#include "protoseg/core/rng.hpp"
#include "protoseg/core/tensor.hpp"
#include "protoseg/io/flow_io.hpp"
#include "protoseg/io/png_io.hpp"
#include "test_util.hpp"

using namespace protoseg;
namespace fs = std::filesystem;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                             double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Reduce an arbitrary node to a scalar with fixed random weights so that every
// output element contributes to the gradcheck loss.
ad::Var<double> to_scalar(const ad::Var<double>& x, Rng& rng) {
  int n = int(x->value.numel());
  auto w = ad::leaf(random_tensor({n, 1}, rng));
  return ad::matmul(ad::reshape(x, {1, n}), w);
}

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "protoseg_core_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Tensor, ReshapePreservesCount) {
  Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  auto r = t.reshaped({6, 4});
  EXPECT_EQ(r.dim(0), 6);
  EXPECT_THROW(t.reshaped({5, 5}), ValidationError);
}

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c = Rng(42).derive("datasets");
  Rng d = Rng(42).derive("model");
  EXPECT_NE(c.next_u64(), d.next_u64());
  Rng e(7);
  for (int i = 0; i < 1000; ++i) {
    double u = e.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    int k = e.uniform_int(5);
    ASSERT_GE(k, 0);
    ASSERT_LT(k, 5);
  }
}

TEST(ConvGeom, SamePaddingShapes) {
  // ceil-division chain: 550 -> 275 -> 138 -> 69
  int h = 550;
  for (int expect : {275, 138, 69}) {
    auto g = ad::same_conv_geom(h, h, 3, 2);
    EXPECT_EQ(g.out_h, expect);
    h = g.out_h;
  }
  auto g1 = ad::same_conv_geom(16, 16, 3, 1);
  EXPECT_EQ(g1.out_h, 16);
  EXPECT_EQ(g1.pad_top, 1);
}

TEST(FlowIo, RoundTripIdentity) {
  auto path = (temp_dir() / "a.flo").string();
  FlowField f(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      f.u_at(y, x) = 1.5f;
      f.v_at(y, x) = -0.5f;
    }
  write_flow(f, path);
  FlowField g = read_flow(path);
  ASSERT_EQ(g.width, 4);
  ASSERT_EQ(g.height, 4);
  EXPECT_EQ(f.u, g.u);
  EXPECT_EQ(f.v, g.v);
}

TEST(FlowIo, RandomRoundTripBitExact) {
  Rng rng(3);
  auto path = (temp_dir() / "b.flo").string();
  FlowField f(7, 5);
  for (size_t i = 0; i < f.u.size(); ++i) {
    f.u[i] = float(rng.uniform(-30, 30));
    f.v[i] = float(rng.uniform(-30, 30));
  }
  write_flow(f, path);
  FlowField g = read_flow(path);
  EXPECT_EQ(f.u, g.u);
  EXPECT_EQ(f.v, g.v);
}

TEST(FlowIo, BadMagicRejected) {
  auto path = (temp_dir() / "bad.flo").string();
  std::ofstream out(path, std::ios::binary);
  float magic = 0.0f;
  int32_t wh[2] = {2, 2};
  out.write(reinterpret_cast<char*>(&magic), 4);
  out.write(reinterpret_cast<char*>(wh), 8);
  out.close();
  EXPECT_THROW(read_flow(path), FormatError);
}

TEST(FlowIo, TruncatedPayloadRejected) {
  auto path = (temp_dir() / "trunc.flo").string();
  {
    FlowField f(4, 4);
    write_flow(f, path);
  }
  fs::resize_file(path, 20);
  EXPECT_THROW(read_flow(path), FormatError);
}

TEST(FlowIo, FileSizeMatchesHeaderPlusPayload) {
  auto path = (temp_dir() / "c.flo").string();
  write_flow(FlowField(2, 2), path);
  EXPECT_EQ(fs::file_size(path), 44u);  // 12 + 2*2*2*4
}

TEST(PngIo, RgbRoundTrip) {
  Rng rng(11);
  ImageU8 img(13, 9, 3);
  for (auto& b : img.data) b = uint8_t(rng.uniform_int(256));
  auto path = (temp_dir() / "rt.png").string();
  write_png(path, img);
  ImageU8 back = read_png(path);
  EXPECT_EQ(back.width, 13);
  EXPECT_EQ(back.height, 9);
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.data, img.data);
}

TEST(PngIo, GrayRoundTripAndDeterminism) {
  ImageU8 img(8, 8, 1);
  for (int i = 0; i < 64; ++i) img.data[size_t(i)] = uint8_t(i * 3);
  auto p1 = (temp_dir() / "g1.png").string();
  auto p2 = (temp_dir() / "g2.png").string();
  write_png(p1, img);
  write_png(p2, img);
  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(read_png(p1).data, img.data);
}

TEST(Autodiff, SharedSubgraphAccumulates) {
  auto x = ad::leaf(Tensor<double>({1, 1}, 3.0), true);
  auto y = ad::add(x, x);  // dy/dx = 2
  auto loss = ad::reshape(y, {1, 1});
  ad::backward(ad::matmul(loss, ad::leaf(Tensor<double>({1, 1}, 1.0))));
  EXPECT_DOUBLE_EQ(x->grad[0], 2.0);
}

TEST(Autodiff, Conv2dGradcheck) {
  Rng rng(5);
  auto x = ad::leaf(random_tensor({3, 6, 7}, rng), true);
  auto w = ad::leaf(random_tensor({4, 3, 3, 3}, rng), true);
  auto b = ad::leaf(random_tensor({4}, rng), true);
  Rng wr(6);
  auto build = [&]() { return to_scalar(ad::conv2d(x, w, b, 1), wr); };
  // Same reduction weights every rebuild.
  auto fixed = build;
  Rng wr2(6);
  auto build_fixed = [&]() {
    Rng local(6);
    return to_scalar(ad::conv2d(x, w, b, 1), local);
  };
  EXPECT_LT(testutil::gradcheck<double>({x, w, b}, build_fixed), 1e-7);
}

TEST(Autodiff, Conv2dStride2OddSizeGradcheck) {
  Rng rng(8);
  auto x = ad::leaf(random_tensor({2, 5, 5}, rng), true);
  auto w = ad::leaf(random_tensor({3, 2, 3, 3}, rng), true);
  auto b = ad::leaf(random_tensor({3}, rng), true);
  auto build = [&]() {
    Rng local(9);
    return to_scalar(ad::conv2d(x, w, b, 2), local);
  };
  auto y = ad::conv2d(x, w, b, 2);
  EXPECT_EQ(y->value.dim(1), 3);  // ceil(5/2)
  EXPECT_LT(testutil::gradcheck<double>({x, w, b}, build), 1e-7);
}

TEST(Autodiff, DepthwiseConvGradcheck) {
  Rng rng(12);
  auto x = ad::leaf(random_tensor({3, 5, 4}, rng), true);
  auto w = ad::leaf(random_tensor({3, 1, 3, 3}, rng), true);
  auto b = ad::leaf(random_tensor({3}, rng), true);
  auto build = [&]() {
    Rng local(13);
    return to_scalar(ad::depthwise_conv2d(x, w, b, 2), local);
  };
  EXPECT_LT(testutil::gradcheck<double>({x, w, b}, build), 1e-7);
}

TEST(Autodiff, ActivationsAndResizeGradcheck) {
  Rng rng(21);
  auto x = ad::leaf(random_tensor({2, 5, 5}, rng), true);
  auto build = [&]() {
    Rng local(22);
    auto up = ad::upsample_nearest(ad::tanh_act(x), 9, 7);
    return to_scalar(ad::relu(up), local);
  };
  EXPECT_LT(testutil::gradcheck<double>({x}, build), 1e-6);
}

TEST(Autodiff, PermuteConcatGatherGradcheck) {
  Rng rng(31);
  auto x = ad::leaf(random_tensor({6, 3, 2}, rng), true);  // 3 ratios x d=2
  auto y = ad::leaf(random_tensor({6, 2, 2}, rng), true);
  auto build = [&]() {
    Rng local(32);
    auto rows = ad::concat_rows(
        {ad::head_permute(x, 3, 2), ad::head_permute(y, 3, 2)});  // [30, 2]
    auto picked = ad::gather_rows(rows, {0, 5, 17, 29});
    return to_scalar(picked, local);
  };
  EXPECT_LT(testutil::gradcheck<double>({x, y}, build), 1e-7);
}

TEST(Autodiff, HeadPermuteOrdering) {
  // channel layout (ratio-major): ch = r*d + j; anchor rows (y*W + x)*R + r.
  Tensor<double> t({6, 2, 2});
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 2; ++j)
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) t.at(r * 2 + j, y, x) = 1000 * r + 100 * j + 10 * y + x;
  auto out = ad::head_permute(ad::leaf(t), 3, 2);
  EXPECT_EQ(out->value.dim(0), 12);
  // cell (y=1,x=0), ratio 2, j=1 -> row (1*2+0)*3+2 = 8
  EXPECT_DOUBLE_EQ(out->value.at(8, 1), 1000 * 2 + 100 * 1 + 10 * 1 + 0);
}

TEST(Autodiff, SoftmaxCeClosedFormAndGradcheck) {
  // Uniform logits over 2 classes -> CE = ln 2 per row.
  auto logits = ad::leaf(Tensor<double>({3, 2}, 0.25), true);
  auto loss = ad::softmax_ce(logits, {0, 1, 0}, 1.0 / 3.0);
  EXPECT_NEAR(loss->value[0], std::log(2.0), 1e-12);

  Rng rng(41);
  auto l2 = ad::leaf(random_tensor({5, 4}, rng), true);
  auto build = [&]() { return ad::softmax_ce(l2, {1, 3, 0, 2, 2}, 0.2); };
  EXPECT_LT(testutil::gradcheck<double>({l2}, build), 1e-7);
}

TEST(Autodiff, SmoothL1ClosedFormAndGradcheck) {
  auto p = ad::leaf(Tensor<double>({1, 2}), true);
  p->value[0] = 0.5;  // |d|<1 -> 0.5*0.25 = 0.125
  p->value[1] = 2.0;  // |d|>=1 -> 2-0.5 = 1.5
  Tensor<double> target({1, 2}, 0.0);
  auto loss = ad::smooth_l1(p, target, 1.0);
  EXPECT_NEAR(loss->value[0], 0.125 + 1.5, 1e-12);

  Rng rng(43);
  auto p2 = ad::leaf(random_tensor({4, 4}, rng, -2.5, 2.5), true);
  Tensor<double> t2 = random_tensor({4, 4}, rng, -0.4, 0.4);
  auto build = [&]() { return ad::smooth_l1(p2, t2, 0.25); };
  EXPECT_LT(testutil::gradcheck<double>({p2}, build), 1e-6);
}

TEST(Autodiff, WeightedBceClosedFormAndGradcheck) {
  // logit 0 -> BCE = ln 2 regardless of target.
  auto l = ad::leaf(Tensor<double>({2, 2}), true);
  Tensor<double> target({2, 2});
  target[0] = 1;
  Tensor<double> weight({2, 2}, 0.25);
  auto loss = ad::weighted_bce_logits(l, target, weight);
  EXPECT_NEAR(loss->value[0], std::log(2.0), 1e-12);

  Rng rng(47);
  auto l2 = ad::leaf(random_tensor({3, 5}, rng, -2, 2), true);
  Tensor<double> t2({3, 5});
  Tensor<double> w2({3, 5});
  for (size_t i = 0; i < t2.numel(); ++i) {
    t2[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    w2[i] = rng.bernoulli(0.3) ? 0.0 : rng.uniform(0.1, 2.0);
  }
  auto build = [&]() { return ad::weighted_bce_logits(l2, t2, w2); };
  EXPECT_LT(testutil::gradcheck<double>({l2}, build), 1e-7);
}

TEST(Autodiff, MatmulAndWsumGradcheck) {
  Rng rng(53);
  auto a = ad::leaf(random_tensor({3, 4}, rng), true);
  auto b = ad::leaf(random_tensor({4, 2}, rng), true);
  auto build = [&]() {
    Rng local(54);
    auto prod = ad::matmul(a, b);
    auto s1 = to_scalar(prod, local);
    auto s2 = to_scalar(ad::relu(prod), local);
    return ad::wsum<double>({{s1, 0.5}, {s2, 1.5}});
  };
  EXPECT_LT(testutil::gradcheck<double>({a, b}, build), 1e-6);
}

TEST(Image, ResizeBilinearIsExactOnConstants) {
  Tensor<float> src({2, 5, 7}, 3.25f);
  auto dst = resize_bilinear(src, 11, 3);
  for (size_t i = 0; i < dst.numel(); ++i) ASSERT_FLOAT_EQ(dst[i], 3.25f);
}
