#include "swpdmod/image.hpp"

#include <cmath>
#include <string>

namespace swpdmod {

void ImageGrid::validate() const {
  if (shape.width < 1 || shape.height < 1)
    throw ContractError("ImageGrid: width and height must be >= 1");
  if (values.size() != shape.pixels())
    throw ContractError("ImageGrid: values length " + std::to_string(values.size()) +
                        " does not match " + std::to_string(shape.width) + "x" +
                        std::to_string(shape.height));
  if (!values.allFinite()) throw ContractError("ImageGrid: non-finite pixel value");
}

void FrameStack::validate() const {
  if (shape.width < 1 || shape.height < 1)
    throw ContractError("FrameStack: width and height must be >= 1");
  if (frames.rows() != shape.pixels())
    throw ContractError("FrameStack: frame length " + std::to_string(frames.rows()) +
                        " does not match grid with " + std::to_string(shape.pixels()) +
                        " pixels");
  if (frames.cols() < 1) throw ContractError("FrameStack: M must be >= 1");
  if (!sample_times.empty()) {
    if (static_cast<int>(sample_times.size()) != frame_count())
      throw ContractError("FrameStack: sample_times size does not match frame count");
    for (size_t j = 1; j < sample_times.size(); ++j)
      if (!(sample_times[j] > sample_times[j - 1]))
        throw ContractError("FrameStack: sample_times must be strictly increasing");
  }
  if (!frames.allFinite()) throw ContractError("FrameStack: non-finite sample");
}

void PriorConfig::validate(bool require_noise) const {
  if (!(rho0 >= 0.0) || !(rho1 >= 0.0))
    throw ContractError("PriorConfig: class means must be >= 0");
  if (rho0 == rho1) throw ContractError("PriorConfig: rho0 must differ from rho1");
  if (!(sigma0_sq > 0.0) || !(sigma1_sq > 0.0))
    throw ContractError("PriorConfig: class variances must be > 0");
  if (!(p0 > 0.0) || !(p0 < 1.0) || !(p1 > 0.0) || !(p1 < 1.0))
    throw ContractError("PriorConfig: class probabilities must lie in (0,1)");
  if (std::abs(p0 + p1 - 1.0) > 1e-12)
    throw ContractError("PriorConfig: p0 + p1 must equal 1");
  if (!(noise_sigma_sq >= 0.0)) throw ContractError("PriorConfig: noise variance must be >= 0");
  if (require_noise && !(noise_sigma_sq > 0.0))
    throw ContractError("PriorConfig: noise variance has not been resolved (> 0 required)");
}

}  // namespace swpdmod
