#pragma once

#include <span>
#include <vector>

namespace layoutgen {

/// Linear-beta DDPM schedule; alpha_bar is the running product of 1 - beta.
struct NoiseSchedule {
  int steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;
};

inline constexpr int kDefaultTimesteps = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

NoiseSchedule make_schedule(int steps = kDefaultTimesteps,
                            double beta_start = kDefaultBetaStart,
                            double beta_end = kDefaultBetaEnd);

/// sqrt(alpha_bar[t]) * clean + sqrt(1 - alpha_bar[t]) * noise, elementwise.
std::vector<double> forward_noise(std::span<const double> clean, int t,
                                  std::span<const double> noise,
                                  const NoiseSchedule& sched);

}  // namespace layoutgen
