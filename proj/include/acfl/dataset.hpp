#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acfl/errors.hpp"
#include "acfl/numerics.hpp"

namespace acfl {

/// Rank tolerance on eig_min(XᵀX) for a device's feature matrix.
inline constexpr double kRankTolerance = 1e-10;
inline constexpr int kMaxRankRetries = 3;

/// One device's local regression data: features X (m×d) and labels Y (m×o).
///
/// Construction checks shapes only, so hand-built toy instances are legal.
/// `check_assumptions()` verifies the modelling assumptions (m > d, full
/// column rank, entries in [-1, 1]) that generated data always satisfies.
class DeviceData {
 public:
  DeviceData(Matrix x, Matrix y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.empty() || y_.empty()) throw ParameterError("DeviceData: empty matrix");
    if (x_.rows() != y_.rows()) {
      throw ParameterError("DeviceData: X has " + std::to_string(x_.rows()) +
                           " rows but Y has " + std::to_string(y_.rows()));
    }
  }

  const Matrix& x() const noexcept { return x_; }
  const Matrix& y() const noexcept { return y_; }
  std::size_t samples() const noexcept { return x_.rows(); }
  std::size_t features() const noexcept { return x_.cols(); }
  std::size_t outputs() const noexcept { return y_.cols(); }

  bool within_unit_box() const noexcept { return x_.max_abs() <= 1.0 && y_.max_abs() <= 1.0; }

  bool full_column_rank() const { return eig_min_sym(gram(x_)) > kRankTolerance; }

  void check_assumptions() const {
    if (samples() <= features()) {
      throw ParameterError("DeviceData: m must exceed d (full column rank unattainable)");
    }
    if (!full_column_rank()) throw NumericError("DeviceData: X is not full column rank");
    if (!within_unit_box()) throw ParameterError("DeviceData: entries outside [-1, 1]");
  }

 private:
  Matrix x_;
  Matrix y_;
};

class FederatedDataset {
 public:
  explicit FederatedDataset(std::vector<DeviceData> devices,
                            std::optional<Matrix> w_true = std::nullopt)
      : devices_(std::move(devices)), w_true_(std::move(w_true)) {
    if (devices_.empty()) throw ParameterError("FederatedDataset: needs at least one device");
    const std::size_t d = devices_.front().features();
    const std::size_t o = devices_.front().outputs();
    for (std::size_t i = 0; i < devices_.size(); ++i) {
      if (devices_[i].features() != d || devices_[i].outputs() != o) {
        throw ParameterError("FederatedDataset: device " + std::to_string(i) +
                             " disagrees on (d, o)");
      }
    }
    if (w_true_ && (w_true_->rows() != d || w_true_->cols() != o)) {
      throw ParameterError("FederatedDataset: w_true must be d x o");
    }
  }

  const std::vector<DeviceData>& devices() const noexcept { return devices_; }
  const DeviceData& device(std::size_t i) const { return devices_.at(i); }
  std::size_t size() const noexcept { return devices_.size(); }
  std::size_t features() const noexcept { return devices_.front().features(); }
  std::size_t outputs() const noexcept { return devices_.front().outputs(); }
  const std::optional<Matrix>& w_true() const noexcept { return w_true_; }

 private:
  std::vector<DeviceData> devices_;
  std::optional<Matrix> w_true_;
};

/// Ground-truth quantities of the global least-squares problem.
struct ProblemFacts {
  Matrix w_star;
  /// Strong-convexity constant used by the 1/(λt) schedule: eig_min(Σ XᵢᵀXᵢ).
  double lambda = 0.0;
  /// Σᵢ eig_min(XᵢᵀXᵢ); never larger than `lambda`, reported for comparison.
  double lambda_sum_local = 0.0;
  double loss_at_optimum = 0.0;
  /// Σ XᵢᵀXᵢ, kept for quadratic-form loss evaluation.
  Matrix gram_sum;
};

/// Synthetic federated regression instance.
///
/// Features are i.i.d. Uniform[-1, 1], W_true is i.i.d. Uniform[0, 1/30] and
/// labels are Y = X·W_true. A positive `label_noise_var` adds N(0, var) to each
/// label, clipped back to [-1, 1].
inline FederatedDataset generate(std::size_t n_devices, std::size_t m, std::size_t d,
                                 std::size_t o, const RngStream& stream,
                                 double label_noise_var = 0.0) {
  if (n_devices < 1) throw ParameterError("generate: n_devices must be >= 1");
  if (d < 1 || o < 1) throw ParameterError("generate: d and o must be >= 1");
  if (m <= d) throw ParameterError("generate: m must exceed d (full column rank unattainable)");
  if (!(label_noise_var >= 0.0)) throw ParameterError("generate: label_noise_var must be >= 0");

  Matrix w_true = uniform_matrix(stream.child(0), d, o, 0.0, 1.0 / 30.0);
  const RngStream device_root = stream.child(1);

  std::vector<DeviceData> devices;
  devices.reserve(n_devices);
  for (std::size_t i = 0; i < n_devices; ++i) {
    const RngStream dev_stream = device_root.child(i);
    std::optional<Matrix> x;
    for (int attempt = 0; attempt <= kMaxRankRetries; ++attempt) {
      Matrix cand = uniform_matrix(dev_stream.child(static_cast<std::uint64_t>(attempt)), m, d,
                                   -1.0, 1.0);
      if (eig_min_sym(gram(cand)) > kRankTolerance) {
        x = std::move(cand);
        break;
      }
    }
    if (!x) {
      throw NumericError("generate: device " + std::to_string(i) +
                         " stayed rank deficient after retries");
    }
    Matrix y = *x * w_true;
    if (label_noise_var > 0.0) {
      y += gaussian_matrix(dev_stream.child(1000), m, o, label_noise_var);
      for (double& v : y.data()) v = std::clamp(v, -1.0, 1.0);
    }
    DeviceData dev(std::move(*x), std::move(y));
    if (!dev.within_unit_box()) {
      throw ParameterError("generate: labels leave [-1, 1]; d is too large for W_true in [0, 1/30]");
    }
    devices.push_back(std::move(dev));
  }
  return FederatedDataset(std::move(devices), std::move(w_true));
}

/// Σᵢ ½‖XᵢW − Yᵢ‖²_F.
inline double loss(const Matrix& w, const FederatedDataset& ds) {
  if (w.rows() != ds.features() || w.cols() != ds.outputs()) {
    throw ParameterError("loss: W is " + w.shape_string() + ", expected " +
                         std::to_string(ds.features()) + "x" + std::to_string(ds.outputs()));
  }
  double total = 0.0;
  for (const auto& dev : ds.devices()) {
    Matrix r = dev.x() * w;
    r -= dev.y();
    total += 0.5 * frobenius_norm_sq(r);
  }
  return total;
}

/// W* from the normal equations plus the strong-convexity constants.
inline ProblemFacts optimum(const FederatedDataset& ds) {
  const std::size_t d = ds.features();
  Matrix a(d, d);
  Matrix b(d, ds.outputs());
  double lambda_sum_local = 0.0;
  for (const auto& dev : ds.devices()) {
    Matrix g = gram(dev.x());
    lambda_sum_local += eig_min_sym(g);
    a += g;
    b += transpose_times(dev.x(), dev.y());
  }
  ProblemFacts facts;
  try {
    facts.w_star = spd_solve(a, b);
  } catch (const NumericError& e) {
    throw NumericError(std::string("optimum: singular Gram sum: ") + e.what(), e.pivot());
  }
  facts.lambda = eig_min_sym(a);
  if (!(facts.lambda > 0.0)) throw NumericError("optimum: Gram sum is not positive definite");
  facts.lambda_sum_local = lambda_sum_local;
  facts.loss_at_optimum = loss(facts.w_star, ds);
  facts.gram_sum = std::move(a);
  return facts;
}

/// ∇f(W) = Σᵢ Xᵢᵀ(XᵢW − Yᵢ).
inline Matrix full_gradient(const Matrix& w, const FederatedDataset& ds) {
  Matrix g(ds.features(), ds.outputs());
  for (const auto& dev : ds.devices()) {
    Matrix r = dev.x() * w;
    r -= dev.y();
    g += transpose_times(dev.x(), r);
  }
  return g;
}

}  // namespace acfl
