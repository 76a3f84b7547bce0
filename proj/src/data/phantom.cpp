#include "i2i/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "i2i/core/errors.hpp"
#include "i2i/core/rng.hpp"

namespace i2i {
namespace {

constexpr double kGrayMatter = 0.45;
constexpr double kWhiteMatter = 0.85;
constexpr double kFluid = 0.08;
constexpr double kLesion = 0.25;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Soft membership of a point at normalized radius r in a shape whose radius is
// radius_px pixels; the edge ramps over about one pixel.
double soft_inside(double r, double radius_px) { return clamp01((1.0 - r) * radius_px + 0.5); }

struct Lesion {
  double u, v, radius;
  std::size_t z0, z1;
};

struct Anatomy {
  double cx, cy, a, b, angle;
  double vent_scale;
  double bias_fx, bias_fy, bias_phase;
  std::vector<Lesion> lesions;
  std::array<double, 3> texture_phase;
};

Anatomy sample_anatomy(Rng& rng, const PhantomOptions& o) {
  const double n = static_cast<double>(o.size);
  Anatomy an{};
  an.cx = n / 2.0 + rng.uniform(-2.0, 2.0);
  an.cy = n / 2.0 + rng.uniform(-2.0, 2.0);
  an.a = n * rng.uniform(0.42, 0.47);
  an.b = n * rng.uniform(0.38, 0.44);
  an.angle = rng.uniform(-0.3, 0.3);
  an.vent_scale = rng.uniform(0.7, 1.3);
  an.bias_fx = rng.uniform(0.5, 1.5);
  an.bias_fy = rng.uniform(0.5, 1.5);
  an.bias_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const std::size_t n_lesions = 2 + static_cast<std::size_t>(rng.below(3));
  for (std::size_t i = 0; i < n_lesions; ++i) {
    Lesion l{};
    const double rho = 0.5 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    l.u = rho * std::cos(phi);
    l.v = rho * std::sin(phi);
    l.radius = rng.uniform(3.0, 6.0);
    l.z0 = o.first_tissue_slice + static_cast<std::size_t>(rng.below(o.tissue_slices));
    l.z1 = std::min(o.first_tissue_slice + o.tissue_slices, l.z0 + 2 + static_cast<std::size_t>(rng.below(4)));
    an.lesions.push_back(l);
  }
  for (auto& p : an.texture_phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return an;
}

double texture(Modality m, double x, double y, double z, const Anatomy& an) {
  switch (m) {
    case Modality::T1: return std::sin(0.9 * x + 0.4 * y + 0.3 * z + an.texture_phase[0]);
    case Modality::T2: return std::sin(0.5 * x - 0.8 * y + 0.7 * z + an.texture_phase[1]);
    case Modality::PD: return std::sin(0.7 * (x + y) - 0.2 * z + an.texture_phase[2]) * std::cos(0.3 * x);
  }
  return 0.0;
}

}  // namespace

double phantom_contrast(Modality modality, double t) {
  t = clamp01(t);
  switch (modality) {
    case Modality::T1: return 0.15 + 0.8 * t;
    case Modality::T2: return 0.95 - 0.8 * t;
    case Modality::PD: return 0.55 + 0.4 * (1.0 - t) * (1.0 - t);
  }
  return 0.0;
}

std::vector<Volume> make_phantom_subject(const std::string& subject_id, std::uint64_t seed, const PhantomOptions& o) {
  if (o.size == 0 || o.slices == 0 || o.first_tissue_slice + o.tissue_slices > o.slices || o.tissue_slices == 0) {
    throw ConfigError("phantom: tissue slices must fit inside the volume");
  }
  Rng rng(seed);
  const Anatomy an = sample_anatomy(rng, o);
  const std::array<Modality, 3> modalities = {Modality::T1, Modality::T2, Modality::PD};
  std::vector<Volume> out;
  for (auto m : modalities) {
    Volume v;
    v.subject_id = subject_id;
    v.modality = m;
    v.dims = {o.size, o.size, o.slices};
    v.spacing = {0.94, 0.94, 1.2};
    v.voxels.assign(o.size * o.size * o.slices, 0.0);
    out.push_back(std::move(v));
  }

  const double ca = std::cos(an.angle), sa = std::sin(an.angle);
  for (std::size_t z = o.first_tissue_slice; z < o.first_tissue_slice + o.tissue_slices; ++z) {
    const double zf = (static_cast<double>(z - o.first_tissue_slice) + 0.5) / static_cast<double>(o.tissue_slices);
    const double taper = 0.88 + 0.12 * std::sin(std::numbers::pi * zf);
    const double a = an.a * taper, b = an.b * taper;
    const double radius_px = std::min(a, b);
    for (std::size_t y = 0; y < o.size; ++y) {
      for (std::size_t x = 0; x < o.size; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - an.cx;
        const double dy = static_cast<double>(y) + 0.5 - an.cy;
        // Coordinates in the head frame, normalized by the semi-axes.
        const double u = (ca * dx + sa * dy) / a;
        const double w = (-sa * dx + ca * dy) / b;
        const double r = std::hypot(u, w);
        const double head = soft_inside(r, radius_px / 2.0);
        if (head <= 0.0) continue;

        const double core = soft_inside(r / 0.78, 0.78 * radius_px / 4.0);
        double t = kGrayMatter + (kWhiteMatter - kGrayMatter) * core;
        t += 0.04 * std::sin(2.0 * std::numbers::pi * (an.bias_fx * u + an.bias_fy * w) + an.bias_phase);

        for (double side : {-1.0, 1.0}) {
          const double vu = (u - side * 0.18) / (0.10 * an.vent_scale);
          const double vw = (w + 0.05) / (0.24 * an.vent_scale * (0.6 + 0.4 * std::sin(std::numbers::pi * zf)));
          const double vent = soft_inside(std::hypot(vu, vw), 0.10 * an.vent_scale * a);
          t = t + (kFluid - t) * vent;
        }
        for (const auto& l : an.lesions) {
          if (z < l.z0 || z >= l.z1) continue;
          const double lr = std::hypot((u - l.u) * a, (w - l.v) * b) / l.radius;
          t = t + (kLesion - t) * soft_inside(lr, l.radius);
        }
        t = clamp01(t);

        for (std::size_t k = 0; k < out.size(); ++k) {
          const Modality m = modalities[k];
          const double tex = o.texture_amplitude *
                             texture(m, static_cast<double>(x), static_cast<double>(y), static_cast<double>(z), an);
          out[k].at(x, y, z) = std::max(0.0, head * (phantom_contrast(m, t) + tex));
        }
      }
    }
  }
  return out;
}

std::vector<Volume> make_phantom_cohort(std::size_t subjects, std::uint64_t seed, const PhantomOptions& options) {
  std::vector<Volume> out;
  for (std::size_t i = 0; i < subjects; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "phantom-%03zu", i);
    auto vols = make_phantom_subject(id, mix_seed(seed, i), options);
    for (auto& v : vols) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace i2i
