#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "grade/coherence_model.hpp"

namespace fixtures {

struct GroupCheck {
  std::string name;
  double directional_error = 0.0;  // along one random direction over the whole tensor
  double entry_error = 0.0;        // worst sampled coordinate
  double gradient_norm = 0.0;
  int entries = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of `loss` against `grad` for every non-empty tensor of
/// `params`. Coordinates are drawn at random plus the largest analytic entry.
inline std::vector<GroupCheck> check_gradients(grade::ModelParams<double>& params,
                                               const grade::ModelParams<double>& grad,
                                               const std::function<double()>& loss, int samples_per_group,
                                               std::uint64_t seed, double step = 1e-5, double floor = 1e-6) {
  std::vector<GroupCheck> out;
  std::mt19937_64 rng(seed);
  auto& g = const_cast<grade::ModelParams<double>&>(grad);
  grade::for_each_parameter(
      [&](const std::string& name, auto& t, auto& gt) {
        GroupCheck c;
        c.name = name;
        c.gradient_norm = gt.norm();
        const Eigen::Index n = t.size();

        // Directional derivative along a random unit direction.
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::MatrixXd dir(t.rows(), t.cols());
        for (Eigen::Index i = 0; i < n; ++i) dir.data()[i] = normal(rng);
        dir /= dir.norm();
        const Eigen::MatrixXd saved = t;
        t = saved + step * dir;
        const double up = loss();
        t = saved - step * dir;
        const double down = loss();
        t = saved;
        const double numeric_dir = (up - down) / (2 * step);
        const double analytic_dir = gt.reshaped().dot(dir.reshaped());
        c.directional_error = relative_error(analytic_dir, numeric_dir, floor);

        std::vector<Eigen::Index> coords;
        Eigen::Index largest = 0;
        gt.cwiseAbs().reshaped().maxCoeff(&largest);
        coords.push_back(largest);
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        for (int s = 0; s < samples_per_group && static_cast<Eigen::Index>(coords.size()) < n; ++s) coords.push_back(pick(rng));
        for (auto idx : coords) {
          const double keep = t.data()[idx];
          t.data()[idx] = keep + step;
          const double lp = loss();
          t.data()[idx] = keep - step;
          const double lm = loss();
          t.data()[idx] = keep;
          const double numeric = (lp - lm) / (2 * step);
          c.entry_error = std::max(c.entry_error, relative_error(gt.data()[idx], numeric, floor));
          ++c.entries;
        }
        out.push_back(c);
      },
      params, g);
  return out;
}

}  // namespace fixtures
