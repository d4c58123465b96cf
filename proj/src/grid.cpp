#include "odeinv/kernels.hpp"

#include <cmath>
#include <sstream>

namespace odeinv {

TimeGrid::TimeGrid(double h, int steps, std::vector<int> data_indices)
    : h_(h), steps_(steps), data_indices_(std::move(data_indices)) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::domain_error("TimeGrid: step h must be positive");
  }
  if (steps < 1) {
    throw std::domain_error("TimeGrid: step count must be positive");
  }
  int prev = 0;
  for (int l : data_indices_) {
    if (l <= prev || l > steps) {
      throw std::domain_error("TimeGrid: data indices must be strictly increasing in [1, N]");
    }
    prev = l;
  }
}

TimeGrid TimeGrid::aligned(double h, double horizon, const std::vector<double> &data_times) {
  if (!(h > 0.0)) {
    throw std::domain_error("TimeGrid: step h must be positive");
  }
  const double steps_real = horizon / h;
  const long steps = std::lround(steps_real);
  if (steps < 1 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real)) {
    std::ostringstream msg;
    msg << "TimeGrid: horizon " << horizon << " is not a multiple of h=" << h;
    throw std::domain_error(msg.str());
  }
  std::vector<int> indices;
  indices.reserve(data_times.size());
  for (double t : data_times) {
    const double l_real = t / h;
    const long l = std::lround(l_real);
    if (std::abs(l_real - static_cast<double>(l)) > 1e-9 * std::max(1.0, l_real)) {
      std::ostringstream msg;
      msg << "TimeGrid: data time " << t << " is not aligned with h=" << h;
      throw std::domain_error(msg.str());
    }
    indices.push_back(static_cast<int>(l));
  }
  return TimeGrid(h, static_cast<int>(steps), std::move(indices));
}

TimeGrid TimeGrid::refined(int factor) const {
  if (factor < 1) {
    throw std::domain_error("TimeGrid::refined: factor must be >= 1");
  }
  std::vector<int> indices(data_indices_);
  for (int &l : indices) {
    l *= factor;
  }
  return TimeGrid(h_ / factor, steps_ * factor, std::move(indices));
}

} // namespace odeinv
