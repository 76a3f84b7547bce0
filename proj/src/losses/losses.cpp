#include "i2i/losses/losses.hpp"

#include <algorithm>
#include <cmath>

#include "i2i/autograd/ops.hpp"
#include "i2i/core/errors.hpp"

namespace i2i {
namespace {

double mean_log_sigmoid(std::span<const double> logits, double sign) {
  if (logits.empty()) throw ShapeError("loss needs at least one logit");
  double s = 0.0;
  for (double z : logits) s += log_sigmoid(sign * z);
  return s / static_cast<double>(logits.size());
}

}  // namespace

double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

double l1_loss(const ImageTensor& pred, const ImageTensor& target) {
  require_same_shape(pred, target, "l1_loss");
  double s = 0.0;
  const auto p = pred.tensor().values();
  const auto t = target.tensor().values();
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - t[i]);
  return s / static_cast<double>(p.size());
}

double discriminator_loss(std::span<const double> real_logits, std::span<const double> fake_logits) {
  // log(1 - sigmoid(z)) = log sigmoid(-z).
  return -(mean_log_sigmoid(real_logits, 1.0) + mean_log_sigmoid(fake_logits, -1.0));
}

double generator_adversarial_loss(std::span<const double> fake_logits) { return -mean_log_sigmoid(fake_logits, 1.0); }

double total_generator_loss(double l_img, double l_gan_g, double lambda_img, double lambda_gan) {
  return lambda_img * l_img + lambda_gan * l_gan_g;
}

ag::Var discriminator_term(ag::Tape& tape, ag::Var logit, bool real) {
  auto z = real ? logit : ag::scale(tape, logit, -1.0);
  return ag::scale(tape, ag::log_sigmoid(tape, z), -1.0);
}

ag::Var generator_adversarial_term(ag::Tape& tape, ag::Var logit) { return discriminator_term(tape, logit, true); }

}  // namespace i2i
