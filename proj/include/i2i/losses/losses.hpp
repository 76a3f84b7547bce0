#pragma once

#include <span>

#include "i2i/autograd/tape.hpp"
#include "i2i/core/image.hpp"

namespace i2i {

/// One training step's objective terms.
struct LossRecord {
  double l_img = 0.0;
  double l_gan_g = 0.0;
  double l_gan_d = 0.0;
  double total_g = 0.0;
};

/// Mean absolute difference over every element. Throws ShapeError on mismatch.
double l1_loss(const ImageTensor& pred, const ImageTensor& target);

/// -(mean log sigmoid(real) + mean log(1 - sigmoid(fake))), the negated
/// discriminator objective, in overflow-free log-sigmoid form.
double discriminator_loss(std::span<const double> real_logits, std::span<const double> fake_logits);

/// Non-saturating generator loss: -mean log sigmoid(fake).
double generator_adversarial_loss(std::span<const double> fake_logits);

/// lambda_img * l_img + lambda_gan * l_gan_g.
double total_generator_loss(double l_img, double l_gan_g, double lambda_img, double lambda_gan);

/// log(sigmoid(x)) for any finite x.
double log_sigmoid(double x);

// -- per-sample differentiable terms ---------------------------------------
// Batch means are realized by the caller scaling each sample's term by 1/B.

/// -log sigmoid(logit) (real) or -log(1 - sigmoid(logit)) (fake) for one logit node.
ag::Var discriminator_term(ag::Tape& tape, ag::Var logit, bool real);
/// -log sigmoid(logit) for one generated sample.
ag::Var generator_adversarial_term(ag::Tape& tape, ag::Var logit);

}  // namespace i2i
