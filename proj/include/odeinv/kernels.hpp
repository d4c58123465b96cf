#ifndef ODEINV_KERNELS_HPP
#define ODEINV_KERNELS_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace odeinv {

/// Hyperparameters of the once-integrated Brownian motion prior.
struct KernelConfig {
  double sigma_dif = 1.0;

  void validate() const {
    if (!(sigma_dif > 0.0) || !std::isfinite(sigma_dif)) {
      throw std::domain_error("KernelConfig: sigma_dif must be positive and finite");
    }
  }
  double sigma2() const { return sigma_dif * sigma_dif; }
};

/// Equidistant grid {0, h, ..., N h} with data times t_i = l_i h.
class TimeGrid {
public:
  TimeGrid() = default;
  TimeGrid(double h, int steps, std::vector<int> data_indices = {});

  /// Aligns data times to the grid; throws if any time is off-grid.
  static TimeGrid aligned(double h, double horizon, const std::vector<double> &data_times);

  double h() const { return h_; }
  int steps() const { return steps_; }
  double horizon() const { return h_ * steps_; }
  double time(int i) const { return h_ * i; }
  const std::vector<int> &data_indices() const { return data_indices_; }
  int num_data() const { return static_cast<int>(data_indices_.size()); }
  int max_data_index() const { return data_indices_.empty() ? 0 : data_indices_.back(); }
  double data_time(int i) const { return time(data_indices_[i]); }

  /// Grid over the same horizon with h divided by `factor`; data times are kept.
  TimeGrid refined(int factor) const;

private:
  double h_ = 1.0;
  int steps_ = 1;
  std::vector<int> data_indices_;
};

namespace kernels {

namespace detail {
inline void check_times(double t, double t2) {
  if (t < 0.0 || t2 < 0.0) {
    throw std::domain_error("kernel evaluated at negative time");
  }
}
} // namespace detail

/// Wiener kernel, the covariance of the derivative process.
template <typename Scalar = double>
Scalar ddk(Scalar t, Scalar t2, const KernelConfig &cfg) {
  detail::check_times(t, t2);
  return static_cast<Scalar>(cfg.sigma2()) * std::min(t, t2);
}

/// Integrated Brownian motion kernel, the covariance of the position process.
template <typename Scalar = double>
Scalar k(Scalar t, Scalar t2, const KernelConfig &cfg) {
  detail::check_times(t, t2);
  const Scalar lo = std::min(t, t2);
  return static_cast<Scalar>(cfg.sigma2()) *
         (lo * lo * lo / Scalar(3) + std::abs(t - t2) * lo * lo / Scalar(2));
}

/// d k(t, t2) / d t2: covariance between position at t and derivative at t2.
template <typename Scalar = double>
Scalar kd(Scalar t, Scalar t2, const KernelConfig &cfg) {
  detail::check_times(t, t2);
  const Scalar s2 = static_cast<Scalar>(cfg.sigma2());
  if (t <= t2) {
    return s2 * t * t / Scalar(2);
  }
  return s2 * (t * t2 - t2 * t2 / Scalar(2));
}

/// d k(t, t2) / d t, i.e. kd with swapped arguments.
template <typename Scalar = double>
Scalar dk(Scalar t, Scalar t2, const KernelConfig &cfg) {
  return kd<Scalar>(t2, t, cfg);
}

} // namespace kernels
} // namespace odeinv

#endif // ODEINV_KERNELS_HPP
