#include "tamplan/tam/losses.hpp"

#include "tamplan/common/errors.hpp"
#include "tamplan/grad/ops.hpp"

namespace tamplan::tam {

using namespace grad;

InfoNceResult info_nce(Var z, std::span<const std::size_t> labels, double temperature) {
  const auto& shape = z.shape();
  if (shape.size() != 2) throw DimensionError("info_nce: z must be (n x d), got " + shape_str(shape));
  const std::size_t n = shape[0];
  if (labels.size() != n) throw ContractError("info_nce: label count does not match batch size");
  if (n < 2) throw ContractError("info_nce: need at least two rows");
  if (!(temperature > 0.0)) throw ContractError("info_nce: temperature must be positive");

  Tape& tape = z.tape();
  Tensor mask({n, n});
  Tensor weight({n, n});
  InfoNceResult out;
  for (std::size_t i = 0; i < n; ++i) {
    mask.at(i, i) = -1e30;
    std::size_t positives = 0;
    for (std::size_t j = 0; j < n; ++j) positives += (j != i && labels[j] == labels[i]);
    if (positives == 0) {
      ++out.skipped;
      continue;
    }
    ++out.anchors;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && labels[j] == labels[i]) weight.at(i, j) = 1.0 / static_cast<double>(positives);
    }
  }
  Var sim = scale(matmul(z, transpose(z)), 1.0 / temperature);
  Var logp = log_softmax(add(sim, tape.constant(std::move(mask))));
  out.loss_sum = negate(dot(tape.constant(std::move(weight)), logp));
  return out;
}

}  // namespace tamplan::tam
