#pragma once

// Dual-margin dynamic beta for selected boundary negatives.

#include <cstddef>
#include <span>
#include <vector>

#include "dynpo/core.hpp"
#include "dynpo/selection.hpp"

namespace dynpo {

struct DualMargins {
  double delta_p = 0.0;  // l_plus - l_b, boundary ambiguity
  double delta_n = 0.0;  // l_b - l_e, contrast against the easy negatives
  double l_plus = 0.0;
  double l_b = 0.0;
  double l_e = 0.0;
};

struct BetaConfig {
  double beta0 = 1.0;
  double alpha = 0.5;  // in [0, 1) so that beta stays positive
  double gamma = 6.0;
};

void validate(const BetaConfig& cfg);

// Margins of negative `b_index`, which must belong to `boundary`. l_e is the
// mean theta log-likelihood of the negatives outside `boundary`; when every
// negative is in the boundary, l_e = l_b.
DualMargins dual_margins(const LikelihoodRecord& record, std::span<const std::size_t> boundary,
                         std::size_t b_index);

inline DualMargins dual_margins(const LikelihoodRecord& record, const BoundarySelection& sel,
                                std::size_t b_index) {
  return dual_margins(record, sel.boundary, b_index);
}

// beta0 * (1 + alpha * tanh((delta_p - delta_n - gamma) / (|delta_p| + |delta_n|))),
// or exactly beta0 when both margins are zero.
double dynamic_beta(const DualMargins& margins, const BetaConfig& cfg);

// One dynamic beta per entry of `boundary`, in the same order.
std::vector<double> dynamic_betas(const LikelihoodRecord& record,
                                  std::span<const std::size_t> boundary, const BetaConfig& cfg);

}  // namespace dynpo
