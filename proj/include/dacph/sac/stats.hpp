#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dacph::sac {

// Trailing mean over the last min(window, i + 1) entries.
inline std::vector<double> moving_average(const std::vector<double>& series, std::size_t window = 20) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be at least 1");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= window) sum -= series[i - window];
    const std::size_t n = i + 1 < window ? i + 1 : window;
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

}  // namespace dacph::sac
