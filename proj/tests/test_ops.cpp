// Copyright (c) 2026 the hcc authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "hcc/ops.hpp"
#include "hcc/random.hpp"
#include "test_util.hpp"

using hcc::Tensor;

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

TEST(Matmul, IdentityCase) {
  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> x({2, 2}, {1, 2, 3, 4});
  Tensor<double> y = hcc::matmul(eye, x);
  EXPECT_EQ(y.data(), x.data());
}

TEST(Matmul, HandComputedInnerProduct) {
  Tensor<double> a({1, 2}, {1, 2});
  Tensor<double> b({2, 1}, {3, 4});
  EXPECT_DOUBLE_EQ(hcc::matmul(a, b).item(), 11.0);
}

TEST(Matmul, MatchesTripleLoopOracle) {
  hcc::Rng rng(101);
  auto a = oracle::random_tensor<double>(rng, {3, 4});
  auto b = oracle::random_tensor<double>(rng, {4, 5});
  auto want = oracle::matmul(a.data(), b.data(), 3, 4, 5);
  auto got = hcc::matmul(a, b);
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(got.data()[i], want[i], 1e-6 * std::max(1.0, std::abs(want[i])));
  }
}

TEST(Matmul, OracleAgreementUpTo64) {
  hcc::Rng rng(102);
  for (std::size_t n : {1u, 7u, 32u, 64u}) {
    auto a = oracle::random_tensor<float>(rng, {n, n});
    auto b = oracle::random_tensor<float>(rng, {n, n});
    auto want = oracle::matmul<double>(std::vector<double>(a.data().begin(), a.data().end()),
                                       std::vector<double>(b.data().begin(), b.data().end()), n, n, n);
    auto got = hcc::matmul(a, b);
    for (std::size_t i = 0; i < want.size(); ++i) {
      const double rel = std::abs(got.data()[i] - want[i]) / std::max(1e-12, std::abs(want[i]));
      EXPECT_LT(rel, 1e-6) << "n=" << n << " i=" << i;
    }
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tensor<double> a({2, 3});
  Tensor<double> b({2, 3});
  try {
    hcc::matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const hcc::DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2, 3)"), std::string::npos);
    EXPECT_NE(msg.find("inner dimensions"), std::string::npos);
  }
}

TEST(Matmul, Deterministic) {
  hcc::Rng rng(103);
  auto a = oracle::random_tensor<float>(rng, {17, 9});
  auto b = oracle::random_tensor<float>(rng, {9, 13});
  EXPECT_EQ(hcc::matmul(a, b).data(), hcc::matmul(a, b).data());
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

TEST(Softmax, UniformInput) {
  Tensor<double> x({3}, {0, 0, 0});
  Tensor<double> y = hcc::softmax(x, 0);
  for (double v : y.data()) EXPECT_NEAR(v, 1.0 / 3, 1e-15);
}

TEST(Softmax, LargeInputsDoNotOverflow) {
  Tensor<double> x({2}, {1000, 0});
  auto y = hcc::softmax(x, 0);
  EXPECT_TRUE(y.all_finite());
  EXPECT_NEAR(y.data()[0], 1.0, 1e-12);
  EXPECT_NEAR(y.data()[1], 0.0, 1e-12);
}

TEST(Softmax, MatchesDirectFormula) {
  hcc::Rng rng(104);
  auto x = oracle::random_tensor<double>(rng, {20}, -4, 4);
  auto want = oracle::softmax(x.data());
  auto got = hcc::softmax(x, 0);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.data()[i], want[i], 1e-12);
}

TEST(Softmax, RowsSumToOneProperty) {
  hcc::Rng rng(105);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = oracle::random_tensor<double>(rng, {4, 7}, -50, 50);
    auto y = hcc::softmax(x, 1);
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 7; ++j) {
        s += y.at(i, j);
        EXPECT_GE(y.at(i, j), 0.0);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Softmax, MiddleAxisOfStack) {
  hcc::Rng rng(106);
  auto x = oracle::random_tensor<double>(rng, {2, 3, 4}, -2, 2);
  auto y = hcc::softmax(x, 1);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0;
      for (std::size_t a = 0; a < 3; ++a) s += y.data()[(o * 3 + a) * 4 + i];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Softmax, InvalidAxisRejected) {
  Tensor<double> x({3});
  EXPECT_THROW(hcc::softmax(x, 1), hcc::DimensionError);
}

// ---------------------------------------------------------------------------
// sigmoid / gelu
// ---------------------------------------------------------------------------

TEST(Sigmoid, Origin) {
  EXPECT_DOUBLE_EQ(hcc::sigmoid(Tensor<double>::scalar(0)).item(), 0.5);
}

TEST(Sigmoid, Symmetry) {
  hcc::Rng rng(107);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(-8, 8);
    const double s = hcc::sigmoid(Tensor<double>::scalar(x)).item();
    const double sm = hcc::sigmoid(Tensor<double>::scalar(-x)).item();
    EXPECT_NEAR(s + sm, 1.0, 1e-12);
  }
}

TEST(Sigmoid, SaturatesWithoutNan) {
  auto y = hcc::sigmoid(Tensor<double>({2}, {-800.0, 800.0}));
  EXPECT_TRUE(y.all_finite());
  EXPECT_NEAR(y.data()[0], 0.0, 1e-12);
  EXPECT_NEAR(y.data()[1], 1.0, 1e-12);
}

TEST(Gelu, OriginAndAsymptotes) {
  EXPECT_DOUBLE_EQ(hcc::gelu(Tensor<double>::scalar(0)).item(), 0.0);
  EXPECT_NEAR(hcc::gelu(Tensor<double>::scalar(10)).item(), 10.0, 1e-4);
  EXPECT_NEAR(hcc::gelu(Tensor<double>::scalar(-10)).item(), 0.0, 1e-4);
}

TEST(Gelu, ErfVariantMatchesDefinition) {
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.1}) {
    const double want = 0.5 * x * (1 + std::erf(x / std::sqrt(2.0)));
    EXPECT_NEAR(hcc::gelu(Tensor<double>::scalar(x), hcc::GeluKind::exact_erf).item(), want, 1e-14);
  }
}

TEST(Gelu, VariantsAgreeLoosely) {
  // tanh form approximates the erf form to ~1e-3 on moderate inputs
  for (double x = -3; x <= 3; x += 0.25) {
    const double a = hcc::gelu(Tensor<double>::scalar(x)).item();
    const double b = hcc::gelu(Tensor<double>::scalar(x), hcc::GeluKind::exact_erf).item();
    EXPECT_NEAR(a, b, 5e-3);
  }
}

// ---------------------------------------------------------------------------
// topk
// ---------------------------------------------------------------------------

TEST(TopK, HandCase) {
  Tensor<double> s({4}, {0.1, 0.9, 0.5, 0.7});
  auto r = hcc::topk(s, 2);
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{1, 3}));
  EXPECT_DOUBLE_EQ(r.values.data()[0], 0.9);
  EXPECT_DOUBLE_EQ(r.values.data()[1], 0.7);
}

TEST(TopK, FullSelectionIsAscendingIdentity) {
  Tensor<double> s({5}, {5, 4, 3, 2, 1});
  auto r = hcc::topk(s, 5);
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(TopK, MatchesSortOracle) {
  hcc::Rng rng(108);
  auto s = oracle::random_tensor<double>(rng, {500});
  auto r = hcc::topk(s, 96);
  EXPECT_EQ(r.indices, oracle::topk_sort(s.data(), 96));
}

TEST(TopK, TiesBreakTowardLowerIndex) {
  Tensor<double> s({6}, {0.5, 0.9, 0.5, 0.9, 0.5, 0.1});
  auto r = hcc::topk(s, 3);
  // two 0.9s win, then the tie among 0.5s goes to index 0
  EXPECT_EQ(r.indices, (std::vector<std::size_t>{0, 1, 3}));
}

TEST(TopK, ArgumentErrors) {
  Tensor<double> s({3}, {1, 2, 3});
  EXPECT_THROW(hcc::topk(s, 4), hcc::ConfigError);
  EXPECT_THROW(hcc::topk(s, 0), hcc::ConfigError);
  Tensor<double> bad({2}, {1.0, std::nan("")});
  EXPECT_THROW(hcc::topk(bad, 1), hcc::InputError);
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

TEST(StructuralOps, ConcatAxis0And1) {
  Tensor<double> a({1, 2}, {1, 2});
  Tensor<double> b({2, 2}, {3, 4, 5, 6});
  auto c0 = hcc::concat(0, std::vector<Tensor<double>>{a, b});
  EXPECT_EQ(c0.shape(), (hcc::Shape{3, 2}));
  EXPECT_EQ(c0.data(), (std::vector<double>{1, 2, 3, 4, 5, 6}));

  Tensor<double> d({2, 1}, {9, 10});
  auto c1 = hcc::concat(1, std::vector<Tensor<double>>{b, d});
  EXPECT_EQ(c1.shape(), (hcc::Shape{2, 3}));
  EXPECT_EQ(c1.data(), (std::vector<double>{3, 4, 9, 5, 6, 10}));
}

TEST(StructuralOps, SliceGatherTransposeReshape) {
  Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(hcc::slice_cols(x, 1, 2).data(), (std::vector<double>{2, 3, 5, 6}));
  EXPECT_EQ(hcc::gather_rows(x, {1, 0}).data(), (std::vector<double>{4, 5, 6, 1, 2, 3}));
  EXPECT_EQ(hcc::transpose(x).data(), (std::vector<double>{1, 4, 2, 5, 3, 6}));
  EXPECT_EQ(hcc::reshape(x, {3, 2}).shape(), (hcc::Shape{3, 2}));
  EXPECT_THROW(hcc::reshape(x, {4, 2}), hcc::DimensionError);
  EXPECT_THROW(hcc::gather_rows(x, {2}), hcc::DimensionError);
  EXPECT_THROW(hcc::slice_cols(x, 2, 2), hcc::DimensionError);
}

TEST(StructuralOps, ReduceSumAxes) {
  Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(hcc::reduce_sum(x, 0).data(), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(hcc::reduce_sum(x, 1).data(), (std::vector<double>{6, 15}));
  EXPECT_DOUBLE_EQ(hcc::sum_all(x).item(), 21.0);
  EXPECT_DOUBLE_EQ(hcc::mean_all(x).item(), 3.5);
  auto mr = hcc::mean_rows(x);
  EXPECT_EQ(mr.shape(), (hcc::Shape{1, 3}));
  EXPECT_EQ(mr.data(), (std::vector<double>{2.5, 3.5, 4.5}));
}

TEST(StructuralOps, RowScaleAndAddRowvec) {
  Tensor<double> x({2, 2}, {1, 2, 3, 4});
  Tensor<double> s({2}, {2, -1});
  EXPECT_EQ(hcc::row_scale(x, s).data(), (std::vector<double>{2, 4, -3, -4}));
  Tensor<double> b({2}, {10, 20});
  EXPECT_EQ(hcc::add_rowvec(x, b).data(), (std::vector<double>{11, 22, 13, 24}));
}

// ---------------------------------------------------------------------------
// gradients vs central finite differences
// ---------------------------------------------------------------------------

namespace {

// A composite touching every differentiable op the modules use.
double composite_loss(Tensor<double>& a, Tensor<double>& b, Tensor<double>& gain,
                      Tensor<double>& offset, Tensor<double>& scales, Tensor<double>& bias,
                      bool run_backward) {
  using namespace hcc;
  Tensor<double> m = matmul(a, b);                      // [3 x 5]
  Tensor<double> sm = softmax(m, 1);
  Tensor<double> g = gelu(sm);
  Tensor<double> ln = layer_norm(g, gain, offset);
  Tensor<double> sg = sigmoid(ln);
  Tensor<double> cat = concat(1, std::vector<Tensor<double>>{sg, g});  // [3 x 10]
  Tensor<double> sl = slice_cols(cat, 2, 5);
  Tensor<double> rs = row_scale(sl, scales);
  Tensor<double> ab = add_rowvec(rs, bias);
  Tensor<double> tr = transpose(ab);
  Tensor<double> rsh = reshape(tr, {3, 5});
  Tensor<double> red = reduce_sum(rsh, 0);
  Tensor<double> fin = affine(sub(mul(red, red), red), 0.5, 0.1);
  Tensor<double> loss = mean_all(fin);
  if (run_backward) loss.backward();
  return loss.item();
}

}  // namespace

TEST(GradCheck, CompositeExpressionMatchesFiniteDifferences) {
  hcc::Rng rng(109);
  Tensor<double> a = oracle::random_tensor<double>(rng, {3, 4}, -1, 1, true);
  Tensor<double> b = oracle::random_tensor<double>(rng, {4, 5}, -1, 1, true);
  Tensor<double> gain = oracle::random_tensor<double>(rng, {5}, 0.5, 1.5, true);
  Tensor<double> offset = oracle::random_tensor<double>(rng, {5}, -0.2, 0.2, true);
  Tensor<double> scales = oracle::random_tensor<double>(rng, {3}, 0.5, 1.5, true);
  Tensor<double> bias = oracle::random_tensor<double>(rng, {5}, -0.3, 0.3, true);

  auto loss = [&] { return composite_loss(a, b, gain, offset, scales, bias, false); };
  auto backward = [&] { composite_loss(a, b, gain, offset, scales, bias, true); };

  for (Tensor<double>* p : {&a, &b, &gain, &offset, &scales, &bias}) {
    auto res = oracle::fd_check(*p, loss, backward);
    EXPECT_LT(res.max_rel_err, 1e-4) << "worst element " << res.worst_index;
  }
}

TEST(GradCheck, GatherAndCrossEntropy) {
  hcc::Rng rng(110);
  Tensor<double> x = oracle::random_tensor<double>(rng, {6, 3}, -1, 1, true);
  Tensor<double> s = oracle::random_tensor<double>(rng, {4}, 0.1, 1.0, true);
  auto make_loss = [&](bool bw) {
    auto rows = hcc::gather_rows(x, {0, 2, 3, 5});
    auto scaled = hcc::row_scale(rows, s);
    auto pooled = hcc::mean_rows(scaled);
    auto l = hcc::cross_entropy(pooled, 1);
    if (bw) l.backward();
    return l.item();
  };
  auto loss = [&] { return make_loss(false); };
  auto backward = [&] { make_loss(true); };
  for (Tensor<double>* p : {&x, &s}) {
    auto res = oracle::fd_check(*p, loss, backward);
    EXPECT_LT(res.max_rel_err, 1e-4);
  }
}

TEST(GradCheck, GatherElems) {
  hcc::Rng rng(111);
  Tensor<double> v = oracle::random_tensor<double>(rng, {5}, -1, 1, true);
  auto make_loss = [&](bool bw) {
    auto g = hcc::gather_elems(v, {4, 4, 1});
    auto l = hcc::sum_all(hcc::mul(g, g));
    if (bw) l.backward();
    return l.item();
  };
  auto loss = [&] { return make_loss(false); };
  auto backward = [&] { make_loss(true); };
  auto res = oracle::fd_check(v, loss, backward);
  EXPECT_LT(res.max_rel_err, 1e-4);
}

TEST(CrossEntropy, MatchesManualLogSumExp) {
  Tensor<double> logits({1, 3}, {1.0, 2.0, 0.5});
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  EXPECT_NEAR(hcc::cross_entropy(logits, 2).item(), lse - 0.5, 1e-12);
  EXPECT_THROW(hcc::cross_entropy(logits, 3), hcc::InputError);
}
