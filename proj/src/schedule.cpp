#include "layoutgen/schedule.hpp"

#include <cmath>
#include <string>

#include "layoutgen/error.hpp"

namespace layoutgen {

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw InvalidArgument("schedule needs at least one step");
  if (!(beta_start > 0.0) || !(beta_start < beta_end) || !(beta_end < 1.0)) {
    throw InvalidArgument("beta range must satisfy 0 < start < end < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.beta.resize(static_cast<std::size_t>(steps));
  s.alpha_bar.resize(static_cast<std::size_t>(steps));
  double running = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double frac =
        steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
    const double b = beta_start + (beta_end - beta_start) * frac;
    running *= 1.0 - b;
    s.beta[static_cast<std::size_t>(t)] = b;
    s.alpha_bar[static_cast<std::size_t>(t)] = running;
  }
  return s;
}

std::vector<double> forward_noise(std::span<const double> clean, int t,
                                  std::span<const double> noise,
                                  const NoiseSchedule& sched) {
  if (t < 0 || t >= sched.steps) {
    throw InvalidArgument("timestep " + std::to_string(t) + " outside [0, " +
                          std::to_string(sched.steps) + ")");
  }
  if (clean.size() != noise.size()) {
    throw InvalidArgument("clean and noise vectors differ in length");
  }
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  std::vector<double> out(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) out[i] = a * clean[i] + b * noise[i];
  return out;
}

}  // namespace layoutgen
