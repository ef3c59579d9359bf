#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "latentnav/core/nn.hpp"

namespace latentnav::core {

struct GradCheckReport {
  Real max_rel_err = 0;
  std::string worst_param;
  int64_t worst_index = -1;
  int probes = 0;
};

// Central finite differences against analytic gradients, probing a random
// subset of coordinates in every listed tensor. `loss_value` must re-evaluate
// the scalar objective from the current parameter values (it is called with
// individual coordinates perturbed in place and must not cache).
GradCheckReport check_gradients(const std::vector<Param*>& params,
                                const std::function<Real()>& loss_value,
                                const std::unordered_map<Param*, Tensor>& analytic,
                                int probes_per_tensor, Real h, Rng& rng,
                                Real denom_floor = 1e-6);

}  // namespace latentnav::core
