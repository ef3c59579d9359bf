#pragma once

#include "latentnav/core/nn.hpp"

namespace latentnav::core {

// AdamW with decoupled weight decay. Moment buffers live on the Param so they
// survive checkpointing.
struct AdamW {
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
  Real weight_decay = 0.01;
  int64_t t = 0;

  void step(ParamStore& ps, Real lr);
};

}  // namespace latentnav::core
