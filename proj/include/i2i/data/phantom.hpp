#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "i2i/data/volume.hpp"

namespace i2i {

/// Synthetic head-like volumes for end-to-end runs without real scans.
///
/// Each subject is an elliptic cylinder of "tissue" spanning slices
/// [first_tissue_slice, first_tissue_slice + tissue_slices) with a cortex
/// ring, white-matter core, ventricles and a few small lesions. A latent
/// tissue value t in [0, 1] is mapped to each modality by phantom_contrast(),
/// and every modality gets its own low-amplitude texture. Slices outside the
/// tissue range are exactly zero.
struct PhantomOptions {
  std::size_t size = 64;
  std::size_t slices = 14;
  std::size_t first_tissue_slice = 2;
  std::size_t tissue_slices = 10;
  double texture_amplitude = 0.02;
};

/// Monotone, invertible intensity remap for latent tissue value t in [0, 1].
double phantom_contrast(Modality modality, double t);

/// T1, T2 and PD volumes of one subject, in that order.
std::vector<Volume> make_phantom_subject(const std::string& subject_id, std::uint64_t seed,
                                         const PhantomOptions& options = {});

/// Subjects named phantom-000, phantom-001, ...; three volumes per subject.
std::vector<Volume> make_phantom_cohort(std::size_t subjects, std::uint64_t seed, const PhantomOptions& options = {});

}  // namespace i2i
