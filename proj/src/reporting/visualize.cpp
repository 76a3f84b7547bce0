#include "i2i/reporting/visualize.hpp"

#include <algorithm>
#include <cmath>

#include "i2i/autograd/ops.hpp"
#include "i2i/core/errors.hpp"

namespace i2i {

ImageTensor error_map(const ImageTensor& pred, const ImageTensor& target) {
  require_same_shape(pred, target, "error_map");
  ImageTensor out(pred.height(), pred.width(), pred.channels());
  const auto p = pred.tensor().values();
  const auto t = target.tensor().values();
  auto o = out.tensor().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::min(1.0, std::abs(p[i] - t[i]) / kErrorMapScale);
  return out;
}

FeatureVisualization feature_visualization(const FeaturePyramid& pyramid, std::size_t stage) {
  if (stage < 1 || stage > FeaturePyramid::kLevels) {
    throw ConfigError("feature stage must be between 1 and 4, got " + std::to_string(stage));
  }
  const Tensor& f = pyramid.level(stage - 1);
  const std::size_t h = f.dim(0), w = f.dim(1), c = f.dim(2);
  Tensor mean({h, w, 1});
  for (std::size_t i = 0; i < h * w; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += f.data()[i * c + k];
    mean.data()[i] = s / static_cast<double>(c);
  }
  FeatureVisualization out;
  const auto [lo, hi] = std::minmax_element(mean.data(), mean.data() + h * w);
  const double min = *lo, range = *hi - *lo;
  if (range > 0.0 && std::isfinite(range)) {
    for (auto& v : mean.values()) v = (v - min) / range;
  } else {
    mean.fill(0.0);
    out.warnings.push_back("stage " + std::to_string(stage) + " feature map is constant; emitting zeros");
  }
  const Tensor& finest = pyramid.level(0);
  ag::Tape tape(false);
  const auto up = ag::resize_bilinear(tape, tape.constant(mean), 4 * finest.dim(0), 4 * finest.dim(1));
  out.image = ImageTensor(tape.value(up));
  return out;
}

}  // namespace i2i
