#pragma once

#include <cstddef>
#include <span>

#include "tamplan/grad/tape.hpp"

namespace tamplan::tam {

struct InfoNceResult {
  grad::Var loss_sum;      // summed over anchors with at least one positive
  std::size_t anchors = 0;
  std::size_t skipped = 0; // anchors without positives
};

/// Supervised contrastive loss over unit rows z (n x d):
///   sum_i  -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p / tau) / sum_{a != i} exp(z_i.z_a / tau) )
/// with P(i) the other rows sharing label i. Throws ContractError when the
/// batch has fewer than 2 rows or the label count disagrees.
InfoNceResult info_nce(grad::Var z, std::span<const std::size_t> labels, double temperature);

}  // namespace tamplan::tam
