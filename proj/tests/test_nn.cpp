#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "derl/nn.hpp"
#include "test_util.hpp"

using namespace derl;
using derl::testing::max_fd_error;
using derl::testing::random_matrix;

namespace {

// Scalar loss sum(U .* f(X)) so that upstream = U.
double contracted_output(const Net& net, const Mat& x, const Mat& u) {
  return net.forward_batch(x).cwiseProduct(u).sum();
}

}  // namespace

class NetGradient : public ::testing::TestWithParam<Activation> {};

TEST_P(NetGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  Net net({7, 16, 12, 3}, GetParam(), 5);
  const Mat x = random_matrix(7, 9, rng);
  const Mat u = random_matrix(3, 9, rng);
  Net::Tape tape;
  net.forward_batch(x, tape);
  const Grads g = net.backward(tape, u);
  const double err =
      max_fd_error(net.parameters(), g, [&] { return contracted_output(net, x, u); }, 200, rng);
  EXPECT_LT(err, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Activations, NetGradient, ::testing::Values(Activation::Tanh, Activation::ReLU));

TEST(Net, InputGradientMatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  Net net({5, 8, 2}, Activation::Tanh, 9);
  Mat x = random_matrix(5, 4, rng);
  const Mat u = random_matrix(2, 4, rng);
  Net::Tape tape;
  net.forward_batch(x, tape);
  Mat dx;
  net.backward(tape, u, &dx);
  const double h = 1e-5;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double saved = x(i, j);
      x(i, j) = saved + h;
      const double up = contracted_output(net, x, u);
      x(i, j) = saved - h;
      const double down = contracted_output(net, x, u);
      x(i, j) = saved;
      EXPECT_NEAR(dx(i, j), (up - down) / (2 * h), 1e-7);
    }
  }
}

TEST(Net, BatchForwardMatchesSingle) {
  std::mt19937_64 rng(1);
  Net net({4, 6, 3}, Activation::ReLU, 2);
  const Mat x = random_matrix(4, 5, rng);
  const Mat y = net.forward_batch(x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) EXPECT_LT((net.forward(x.col(j)) - y.col(j)).norm(), 1e-14);
}

TEST(Net, WrongInputSizeIsConfigError) {
  Net net({4, 3}, Activation::Tanh, 0);
  EXPECT_THROW(net.forward(Vec::Zero(5)), ConfigError);
  EXPECT_THROW(Net({4}, Activation::Tanh, 0), ConfigError);
}

TEST(Net, SameSeedSameParameters) {
  Net a({3, 8, 2}, Activation::Tanh, 42);
  Net b({3, 8, 2}, Activation::Tanh, 42);
  Net c({3, 8, 2}, Activation::Tanh, 43);
  EXPECT_TRUE(a.parameters() == b.parameters());
  EXPECT_FALSE(a.parameters() == c.parameters());
}

TEST(Adam, FirstTwoStepsMatchClosedForm) {
  Net net({2, 2}, Activation::Tanh, 0);
  const Grads p0 = net.parameters();
  Grads g = Grads::zeros_like(p0);
  g.weights[0] << 0.3, -2.0, 1e-4, 5.0;
  g.biases[0] << -0.7, 0.0;
  const double lr = 0.01, eps = 1e-3;
  net.adam_step(g, lr, eps);
  // Bias correction makes m_hat = g and v_hat = g^2 on every step with a constant gradient.
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double gi = g.coeff(i);
    EXPECT_NEAR(net.parameters().coeff(i), p0.coeff(i) - lr * gi / (std::abs(gi) + eps), 1e-15);
  }
  net.adam_step(g, lr, eps);
  for (std::size_t i = 0; i < p0.size(); ++i) {
    const double gi = g.coeff(i);
    EXPECT_NEAR(net.parameters().coeff(i), p0.coeff(i) - 2 * lr * gi / (std::abs(gi) + eps), 1e-14);
  }
  EXPECT_EQ(net.step_count(), 2);
}

TEST(Adam, NonFiniteGradientIsNumericError) {
  Net net({2, 2}, Activation::Tanh, 0);
  Grads g = Grads::zeros_like(net.parameters());
  g.biases[0](1) = std::nan("");
  const Grads before = net.parameters();
  EXPECT_THROW(net.adam_step(g, 0.1, 1e-8), NumericError);
  EXPECT_TRUE(net.parameters() == before);
}

TEST(Clipping, ScalesOnlyAboveThreshold) {
  Net net({3, 2}, Activation::Tanh, 0);
  Grads g = Grads::zeros_like(net.parameters());
  g.weights[0].setConstant(2.0);  // norm sqrt(24)
  g.biases[0].setConstant(0.0);
  const double norm = clip_global_norm(g, 0.5);
  EXPECT_NEAR(norm, std::sqrt(24.0), 1e-12);
  EXPECT_NEAR(std::sqrt(g.squared_norm()), 0.5, 1e-12);
  const double after = clip_global_norm(g, 0.5);
  EXPECT_NEAR(after, 0.5, 1e-12);
  EXPECT_NEAR(std::sqrt(g.squared_norm()), 0.5, 1e-12);

  Grads small = Grads::zeros_like(net.parameters());
  small.biases[0] << 0.1, 0.1;
  const Grads copy = small;
  clip_global_norm(small, 0.5);
  EXPECT_TRUE(small == copy);
  EXPECT_THROW(clip_global_norm(small, 0.0), ConfigError);
}

TEST(Clipping, JointNormAcrossSets) {
  Net net({1, 1}, Activation::Tanh, 0);
  Grads a = Grads::zeros_like(net.parameters());
  Grads b = Grads::zeros_like(net.parameters());
  a.weights[0](0, 0) = 3.0;
  b.weights[0](0, 0) = 4.0;
  EXPECT_NEAR(clip_global_norm<double>({&a, &b}, 1.0), 5.0, 1e-12);
  EXPECT_NEAR(a.weights[0](0, 0), 0.6, 1e-12);
  EXPECT_NEAR(b.weights[0](0, 0), 0.8, 1e-12);
}

TEST(Softmax, StableAndNormalized) {
  Vec logits(3);
  logits << 1000.0, 1000.0, -1000.0;
  const Vec p = softmax(logits);
  EXPECT_NEAR(p(0), 0.5, 1e-15);
  EXPECT_NEAR(p(1), 0.5, 1e-15);
  EXPECT_EQ(p(2), 0.0);
  EXPECT_TRUE(softmax_categorical(logits).valid());
}

TEST(Entropy, UniformIsLogN) {
  EXPECT_NEAR(entropy(Vec::Constant(4, 0.25)), std::log(4.0), 1e-15);
  Vec onehot = Vec::Zero(3);
  onehot(1) = 1.0;
  EXPECT_EQ(entropy(onehot), 0.0);
}

TEST(Argmax, TiesGoToLowestIndex) {
  Vec s(4);
  s << 1.0, 3.0, 3.0, -1.0;
  EXPECT_EQ(argmax(s), 1);
}

TEST(SoftUpdate, PolyakAverage) {
  Net a({2, 2}, Activation::Tanh, 1);
  Net b({2, 2}, Activation::Tanh, 2);
  const Grads pa = a.parameters();
  a.soft_update_from(b, 0.25);
  for (std::size_t i = 0; i < pa.size(); ++i)
    EXPECT_NEAR(a.parameters().coeff(i), 0.25 * b.parameters().coeff(i) + 0.75 * pa.coeff(i), 1e-15);
}
