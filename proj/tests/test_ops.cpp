#include <doctest.h>

#include "funet/ops.hpp"

using namespace funet;

namespace {

template <class T>
TensorPtr<T> rnd(const Shape& s, std::uint64_t seed) {
  return uniform<T>(s, seed, T(-1), T(1));
}

}  // namespace

TEST_CASE("conv2d with an identity kernel reproduces the input") {
  auto x = rnd<float>(Shape::nchw(1, 1, 5, 5), 1);
  auto w = zeros<float>(Shape{1, 1, 3, 3});
  w->data[4] = 1.f;  // center tap
  auto b = zeros<float>(Shape{1});
  auto y = conv2d(x, w, b, 1, 1);
  CHECK(y->shape == x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) CHECK(y->data[i] == doctest::Approx(x->data[i]));
}

TEST_CASE("all-ones 3x3 kernel on a constant image gives 9c in the interior") {
  const float c = 0.7f;
  auto x = full<float>(Shape::nchw(1, 1, 6, 6), c);
  auto w = full<float>(Shape{1, 1, 3, 3}, 1.f);
  auto b = zeros<float>(Shape{1});
  auto y = conv2d(x, w, b, 1, 1);
  for (int i = 1; i < 5; ++i)
    for (int j = 1; j < 5; ++j)
      CHECK(y->data[size_t(i * 6 + j)] == doctest::Approx(9 * c));
}

TEST_CASE("conv2d shape rule") {
  auto x = rnd<float>(Shape::nchw(1, 3, 8, 8), 2);
  auto w = rnd<float>(Shape{5, 3, 3, 3}, 3);
  auto b = zeros<float>(Shape{5});
  CHECK(conv2d(x, w, b, 1, 1)->shape == Shape::nchw(1, 5, 8, 8));
  auto wbad = rnd<float>(Shape{5, 4, 3, 3}, 3);
  CHECK_THROWS_AS(conv2d(x, wbad, b, 1, 1), Error);
}

TEST_CASE("depthwise separable identity composition") {
  const int c = 3;
  auto x = rnd<float>(Shape::nchw(2, c, 5, 5), 4);
  auto dw = zeros<float>(Shape{c, 1, 3, 3});
  for (int i = 0; i < c; ++i) dw->data[size_t(i * 9 + 4)] = 1.f;
  auto pw = zeros<float>(Shape{c, c, 1, 1});
  for (int i = 0; i < c; ++i) pw->data[size_t(i * c + i)] = 1.f;
  auto pb = zeros<float>(Shape{c});
  auto y = depthwise_separable_conv2d(x, dw, pw, pb);
  for (size_t i = 0; i < x->data.size(); ++i) CHECK(y->data[i] == doctest::Approx(x->data[i]));
}

TEST_CASE("depthwise separable parameter arithmetic") {
  CHECK(ds_conv_param_count(16, 32, 3) == 688);   // 16*9 + 16*32 + 32
  CHECK(conv_param_count(16, 32, 3) == 4640);     // 16*32*9 + 32
  CHECK(double(ds_conv_param_count(16, 32, 3)) / double(conv_param_count(16, 32, 3)) ==
        doctest::Approx(0.1483).epsilon(0.001));
  // the reduction holds over a scan of layer sizes used by the model
  for (int cin : {16, 32, 64, 128, 256})
    for (int cout : {16, 32, 64, 128, 256})
      CHECK(ds_conv_param_count(cin, cout, 3) < conv_param_count(cin, cout, 3));
}

TEST_CASE("depthwise separable shape rule") {
  auto x = rnd<float>(Shape::nchw(1, 16, 32, 32), 5);
  auto dw = rnd<float>(Shape{16, 1, 3, 3}, 6);
  auto pw = rnd<float>(Shape{32, 16, 1, 1}, 7);
  auto pb = zeros<float>(Shape{32});
  CHECK(depthwise_separable_conv2d(x, dw, pw, pb)->shape == Shape::nchw(1, 32, 32, 32));
}

TEST_CASE("depthwise-separable equals explicit two-stage composition") {
  auto x = rnd<double>(Shape::nchw(2, 4, 6, 6), 8);
  auto dw = rnd<double>(Shape{4, 1, 3, 3}, 9);
  auto pw = rnd<double>(Shape{5, 4, 1, 1}, 10);
  auto pb = rnd<double>(Shape{5}, 11);
  auto fused = depthwise_separable_conv2d(x, dw, pw, pb);
  auto staged = conv2d(depthwise_conv2d(x, dw), pw, pb, 1, 0);
  CHECK(fused->data == staged->data);
}

TEST_CASE("activation values") {
  auto x = from_values<float>(Shape{4}, {-2.f, 3.f, 0.f, 0.f});
  auto r = relu(x);
  CHECK(r->data[0] == 0.f);
  CHECK(r->data[1] == 3.f);
  CHECK(sigmoid(x)->data[2] == doctest::Approx(0.5));
  CHECK(tanh_act(x)->data[3] == doctest::Approx(0.0));
}

TEST_CASE("softmax_spatial examples") {
  auto x = zeros<float>(Shape::nchw(1, 1, 1, 2));
  auto y = softmax_spatial(x);
  CHECK(y->data[0] == doctest::Approx(0.5));
  CHECK(y->data[1] == doctest::Approx(0.5));

  auto x2 = from_values<float>(Shape::nchw(1, 1, 1, 2), {0.f, std::log(3.f)});
  auto y2 = softmax_spatial(x2);
  CHECK(y2->data[0] == doctest::Approx(0.25));
  CHECK(y2->data[1] == doctest::Approx(0.75));
}

TEST_CASE("softmax_spatial is shift invariant and normalized per group") {
  auto x = rnd<float>(Shape::nchw(2, 3, 4, 4), 12);
  auto shifted = add_scalar(x, 1.7f);
  auto a = softmax_spatial(x);
  auto b = softmax_spatial(shifted);
  for (size_t i = 0; i < a->data.size(); ++i)
    CHECK(b->data[i] == doctest::Approx(a->data[i]).epsilon(1e-5));
  for (int g = 0; g < 6; ++g) {
    float sum = 0;
    for (int i = 0; i < 16; ++i) sum += a->data[size_t(g * 16 + i)];
    CHECK(sum == doctest::Approx(1.f));
  }
}

TEST_CASE("batch norm: constant input maps to beta in train mode") {
  auto x = full<float>(Shape::nchw(2, 2, 4, 4), 3.f);
  BatchNormStateT<float> st(2);
  st.beta->data = {0.25f, -0.5f};
  auto y = batch_norm2d(x, st, Mode::train);
  for (int ni = 0; ni < 2; ++ni)
    for (int ci = 0; ci < 2; ++ci)
      for (int i = 0; i < 16; ++i)
        CHECK(y->data[size_t((ni * 2 + ci) * 16 + i)] ==
              doctest::Approx(st.beta->data[size_t(ci)]));
}

TEST_CASE("batch norm: train-mode output is standardized per channel") {
  auto x = normal<double>(Shape::nchw(8, 3, 16, 16), 13, 2.0, 3.0);
  BatchNormStateT<double> st(3);
  auto y = batch_norm2d(x, st, Mode::train);
  const std::int64_t m = 8 * 16 * 16;
  for (int ci = 0; ci < 3; ++ci) {
    double mean = 0, var = 0;
    for (int ni = 0; ni < 8; ++ni)
      for (int i = 0; i < 256; ++i) mean += y->data[size_t((ni * 3 + ci) * 256 + i)];
    mean /= double(m);
    for (int ni = 0; ni < 8; ++ni)
      for (int i = 0; i < 256; ++i) {
        const double d = y->data[size_t((ni * 3 + ci) * 256 + i)] - mean;
        var += d * d;
      }
    var /= double(m);
    CHECK(std::fabs(mean) < 1e-5);
    CHECK(std::fabs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("batch norm: eval with exact batch stats matches train output") {
  auto x = normal<double>(Shape::nchw(4, 2, 8, 8), 14, 0.0, 1.0);
  BatchNormStateT<double> st_train(2), st_eval(2);
  auto yt = batch_norm2d(x, st_train, Mode::train);
  // recover exact batch stats and plant them as running stats
  const std::int64_t m = 4 * 8 * 8;
  for (int ci = 0; ci < 2; ++ci) {
    double mean = 0, var = 0;
    for (int ni = 0; ni < 4; ++ni)
      for (int i = 0; i < 64; ++i) mean += x->data[size_t((ni * 2 + ci) * 64 + i)];
    mean /= double(m);
    for (int ni = 0; ni < 4; ++ni)
      for (int i = 0; i < 64; ++i) {
        const double d = x->data[size_t((ni * 2 + ci) * 64 + i)] - mean;
        var += d * d;
      }
    var /= double(m);
    st_eval.running_mean[size_t(ci)] = mean;
    st_eval.running_var[size_t(ci)] = var;
  }
  auto ye = batch_norm2d(x, st_eval, Mode::eval);
  for (size_t i = 0; i < yt->data.size(); ++i)
    CHECK(ye->data[i] == doctest::Approx(yt->data[i]).epsilon(1e-6));
}

TEST_CASE("max pool examples") {
  auto x = from_values<float>(Shape::nchw(1, 1, 2, 2), {1.f, 2.f, 3.f, 4.f});
  CHECK(max_pool2d(x)->data[0] == 4.f);

  auto c = full<float>(Shape::nchw(1, 1, 4, 4), 0.3f);
  auto pc = max_pool2d(c);
  CHECK(pc->shape == Shape::nchw(1, 1, 2, 2));
  for (float v : pc->data) CHECK(v == doctest::Approx(0.3f));

  auto big = rnd<float>(Shape::nchw(1, 8, 32, 32), 15);
  CHECK(max_pool2d(big)->shape == Shape::nchw(1, 8, 16, 16));

  auto odd = rnd<float>(Shape::nchw(1, 1, 3, 4), 16);
  CHECK_THROWS_AS(max_pool2d(odd), Error);
}

TEST_CASE("max pool output dominates every window element") {
  auto x = rnd<float>(Shape::nchw(2, 2, 8, 8), 17);
  auto y = max_pool2d(x);
  for (int g = 0; g < 4; ++g)
    for (int oy = 0; oy < 4; ++oy)
      for (int ox = 0; ox < 4; ++ox) {
        const float m = y->data[size_t((g * 4 + oy) * 4 + ox)];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            CHECK(m >= x->data[size_t((g * 8 + 2 * oy + dy) * 8 + 2 * ox + dx)]);
      }
}

TEST_CASE("concat_channels layout and validation") {
  auto a = rnd<float>(Shape::nchw(2, 2, 3, 3), 18);
  auto b = rnd<float>(Shape::nchw(2, 3, 3, 3), 19);
  auto y = concat_channels(a, b);
  CHECK(y->shape == Shape::nchw(2, 5, 3, 3));
  CHECK(y->data[0] == a->data[0]);
  CHECK(y->data[size_t(2 * 9)] == b->data[0]);  // first b channel of sample 0
  auto c = rnd<float>(Shape::nchw(2, 1, 4, 4), 20);
  CHECK_THROWS_AS(concat_channels(a, c), Error);
}

// ---------------------------------------------------------------------------
// Finite-difference oracles, 64-bit, tolerance 1e-5
// ---------------------------------------------------------------------------

TEST_CASE("finite differences: conv2d") {
  auto x = rnd<double>(Shape::nchw(2, 2, 5, 5), 21);
  auto w = rnd<double>(Shape{3, 2, 3, 3}, 22);
  auto b = rnd<double>(Shape{3}, 23);
  const double err = finite_difference_check<double>(
      [](const std::vector<TensorPtr<double>>& in) {
        return reduce_sum(mul(conv2d(in[0], in[1], in[2], 1, 1),
                              conv2d(in[0], in[1], in[2], 1, 1)));
      },
      {x, w, b}, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("finite differences: strided unpadded conv2d") {
  auto x = rnd<double>(Shape::nchw(1, 2, 7, 7), 24);
  auto w = rnd<double>(Shape{2, 2, 3, 3}, 25);
  auto b = rnd<double>(Shape{2}, 26);
  const double err = finite_difference_check<double>(
      [](const std::vector<TensorPtr<double>>& in) {
        auto y = conv2d(in[0], in[1], in[2], 2, 0);
        return reduce_sum(mul(y, y));
      },
      {x, w, b}, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("finite differences: depthwise separable conv") {
  auto x = rnd<double>(Shape::nchw(2, 3, 4, 4), 27);
  auto dw = rnd<double>(Shape{3, 1, 3, 3}, 28);
  auto pw = rnd<double>(Shape{4, 3, 1, 1}, 29);
  auto pb = rnd<double>(Shape{4}, 30);
  const double err = finite_difference_check<double>(
      [](const std::vector<TensorPtr<double>>& in) {
        auto y = depthwise_separable_conv2d(in[0], in[1], in[2], in[3]);
        return reduce_sum(mul(y, y));
      },
      {x, dw, pw, pb}, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("finite differences: activations") {
  for (Act kind : {Act::relu, Act::sigmoid, Act::tanh}) {
    auto x = uniform<double>(Shape{12}, 31, 0.1, 2.0);  // away from relu's kink
    const double err = finite_difference_check<double>(
        [kind](const std::vector<TensorPtr<double>>& in) {
          auto y = activation(kind, in[0]);
          return reduce_sum(mul(y, y));
        },
        {x}, 1e-6);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("finite differences: softmax_spatial") {
  auto x = rnd<double>(Shape::nchw(2, 2, 3, 3), 32);
  auto t = rnd<double>(Shape::nchw(2, 2, 3, 3), 33);
  const double err = finite_difference_check<double>(
      [t](const std::vector<TensorPtr<double>>& in) {
        auto d = sub(softmax_spatial(in[0]), t);
        return reduce_sum(mul(d, d));
      },
      {x}, 1e-6);
  CHECK(err < 1e-5);
}

TEST_CASE("finite differences: batch norm train mode") {
  auto x = rnd<double>(Shape::nchw(3, 2, 4, 4), 34);
  auto t = rnd<double>(Shape::nchw(3, 2, 4, 4), 35);
  BatchNormStateT<double> st(2);
  st.gamma->data = {1.3, 0.7};
  st.beta->data = {0.2, -0.1};
  const double err = finite_difference_check<double>(
      [&st, t](const std::vector<TensorPtr<double>>& in) {
        BatchNormStateT<double> local = st;  // keep running stats untouched per call
        auto d = sub(batch_norm2d(in[0], local, Mode::train), t);
        return reduce_sum(mul(d, d));
      },
      {x}, 1e-6);
  CHECK(err < 1e-5);
}

TEST_CASE("finite differences: batch norm gamma and beta") {
  auto x = rnd<double>(Shape::nchw(2, 2, 4, 4), 36);
  auto t = rnd<double>(Shape::nchw(2, 2, 4, 4), 37);
  BatchNormStateT<double> st(2);
  const double err = finite_difference_check<double>(
      [x, t](const std::vector<TensorPtr<double>>& in) {
        BatchNormStateT<double> local(2);
        local.gamma = in[0];
        local.beta = in[1];
        auto d = sub(batch_norm2d(x, local, Mode::train), t);
        return reduce_sum(mul(d, d));
      },
      {st.gamma, st.beta}, 1e-6);
  CHECK(err < 1e-5);
}

TEST_CASE("finite differences: max pool (away from ties)") {
  auto x = rnd<double>(Shape::nchw(1, 2, 4, 4), 38);
  const double err = finite_difference_check<double>(
      [](const std::vector<TensorPtr<double>>& in) {
        auto y = max_pool2d(in[0]);
        return reduce_sum(mul(y, y));
      },
      {x}, 1e-7);
  CHECK(err < 1e-5);
}

TEST_CASE("finite differences: concat_channels") {
  auto a = rnd<double>(Shape::nchw(2, 2, 3, 3), 39);
  auto b = rnd<double>(Shape::nchw(2, 1, 3, 3), 40);
  const double err = finite_difference_check<double>(
      [](const std::vector<TensorPtr<double>>& in) {
        auto y = concat_channels(in[0], in[1]);
        return reduce_sum(mul(y, y));
      },
      {a, b}, 1e-6);
  CHECK(err < 1e-5);
}
