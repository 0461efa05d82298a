#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acfl/dataset.hpp"
#include "acfl/errors.hpp"
#include "acfl/numerics.hpp"

namespace acfl {

/// Variances of the additive Gaussian noise on the Gram (σ₁²) and
/// cross-correlation (σ₂²) uploads.
struct NoiseParams {
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;

  static NoiseParams equal(double sigma_sq) { return {sigma_sq, sigma_sq}; }

  void validate() const {
    if (!(sigma1_sq >= 0.0) || !(sigma2_sq >= 0.0)) {
      throw ParameterError("NoiseParams: variances must be >= 0");
    }
  }
};

/// What one device uploads before training: XᵀX + N₁ and XᵀY + N₂.
struct LocalCodedData {
  Matrix h_x;  // d×d
  Matrix h_y;  // d×o

  /// Number of reals uploaded: d² + o·d, independent of the sample count.
  std::size_t payload_reals() const noexcept { return h_x.size() + h_y.size(); }
};

/// Server-side sums of all local uploads. Holds no raw device data.
struct GlobalCodedData {
  Matrix h_x_sum;
  Matrix h_y_sum;
};

/// Encodes one device. Noise for N₁ comes from stream.child(0) and for N₂ from
/// stream.child(1), so callers pass a per-device stream.
inline LocalCodedData encode_local(const DeviceData& dev, const NoiseParams& noise,
                                   const RngStream& stream) {
  noise.validate();
  const std::size_t d = dev.features();
  const std::size_t o = dev.outputs();
  LocalCodedData out{gram(dev.x()), transpose_times(dev.x(), dev.y())};
  out.h_x += gaussian_matrix(stream.child(0), d, d, noise.sigma1_sq);
  out.h_y += gaussian_matrix(stream.child(1), d, o, noise.sigma2_sq);
  return out;
}

/// Elementwise sums in list order.
inline GlobalCodedData aggregate_coded(std::span<const LocalCodedData> locals) {
  if (locals.empty()) throw ParameterError("aggregate_coded: empty list");
  GlobalCodedData g{locals.front().h_x, locals.front().h_y};
  for (std::size_t i = 1; i < locals.size(); ++i) {
    if (!locals[i].h_x.same_shape(g.h_x_sum) || !locals[i].h_y.same_shape(g.h_y_sum)) {
      throw ParameterError("aggregate_coded: device " + std::to_string(i) + " has mismatched shapes");
    }
    g.h_x_sum += locals[i].h_x;
    g.h_y_sum += locals[i].h_y;
  }
  return g;
}

/// Runs the whole first stage: device i encodes with stream.child(i).
inline GlobalCodedData encode_dataset(const FederatedDataset& ds, const NoiseParams& noise,
                                      const RngStream& stream) {
  std::vector<LocalCodedData> locals;
  locals.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    locals.push_back(encode_local(ds.device(i), noise, stream.child(i)));
  }
  return aggregate_coded(locals);
}

}  // namespace acfl
