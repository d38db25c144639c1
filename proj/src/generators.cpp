#include "qpi/generators.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qpi/rng.hpp"

namespace qpi {

Mdp garnet(int n_states, int n_actions, int branching, std::uint64_t seed, double gamma) {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("garnet: need n >= 1 and m >= 1");
  if (branching < 1 || branching > n_states) throw std::invalid_argument("garnet: branching must lie in [1, n]");

  Rng rng(seed);
  const int pairs = n_states * n_actions;
  Matrix kernel = Matrix::Zero(pairs, n_states);
  Vector cost(pairs);
  std::vector<int> states(n_states);
  std::vector<double> cuts(branching + 1);

  for (int row = 0; row < pairs; ++row) {
    // Partial Fisher-Yates: the first `branching` entries are a uniform subset.
    std::iota(states.begin(), states.end(), 0);
    for (int i = 0; i < branching; ++i) {
      const int j = i + static_cast<int>(rng.below(n_states - i));
      std::swap(states[i], states[j]);
    }

    cuts.front() = 0.0;
    cuts.back() = 1.0;
    for (int i = 1; i < branching; ++i) cuts[i] = rng.uniform();
    std::sort(cuts.begin() + 1, cuts.end() - 1);
    for (int i = 0; i < branching; ++i) kernel(row, states[i]) = cuts[i + 1] - cuts[i];

    cost(row) = rng.uniform();
  }
  return Mdp(n_states, n_actions, gamma, std::move(cost), std::move(kernel));
}

Mdp healthcare(double gamma) {
  constexpr int n = 6;
  constexpr int m = 3;
  constexpr int terminal = n - 1;
  Matrix kernel = Matrix::Zero(n * m, n);
  Vector cost(n * m);

  for (int s = 0; s < terminal; ++s) {
    for (int a = 0; a < m; ++a) {
      const double dose = a + 1;
      const double improve = 0.1 * dose;
      const double stay = 0.6 - 0.05 * dose;
      const double worsen = 1.0 - improve - stay;
      const int row = s * m + a;
      kernel(row, std::max(s - 1, 0)) += improve;
      kernel(row, s) += stay;
      kernel(row, s + 1) += worsen;

      double expected_label = 0.0;
      for (int t = 0; t < n; ++t) expected_label += (t + 1) * kernel(row, t);
      cost(row) = expected_label + dose;
    }
  }
  for (int a = 0; a < m; ++a) {
    kernel(terminal * m + a, terminal) = 1.0;
    cost(terminal * m + a) = 50.0;
  }
  return Mdp(n, m, gamma, std::move(cost), std::move(kernel));
}

Mdp graph(std::uint64_t seed, double gamma, double cost_jitter) {
  constexpr int n = 6;
  constexpr int m = 3;
  constexpr int goal = n - 1;
  Matrix kernel = Matrix::Zero(n * m, n);
  Vector cost = Vector::Ones(n * m);
  Rng rng(seed);

  for (int s = 0; s < goal; ++s) {
    kernel(s * m + 0, s + 1) = 1.0;                    // advance
    kernel(s * m + 1, std::min(s + 2, goal)) = 1.0;    // shortcut
    kernel(s * m + 2, s) = 1.0;                        // stay
    if (cost_jitter > 0.0)
      for (int a = 0; a < m; ++a) cost(s * m + a) += cost_jitter * rng.uniform();
  }
  for (int a = 0; a < m; ++a) {
    kernel(goal * m + a, goal) = 1.0;
    cost(goal * m + a) = 0.0;
  }
  return Mdp(n, m, gamma, std::move(cost), std::move(kernel));
}

}  // namespace qpi
