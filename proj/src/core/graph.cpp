#include "latentnav/core/graph.hpp"

namespace latentnav::core {

void Graph::backward(Var loss) {
  LN_CHECK(loss->value.numel() == 1, "backward() needs a scalar loss");
  LN_CHECK(loss->requires_grad, "loss does not depend on any trainable input");
  loss->ensure_grad()[0] = Real(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = *it;
    if (n.id > loss->id) continue;
    if (!n.requires_grad || !n.grad.defined() || !n.backward_fn) continue;
    n.backward_fn(n);
  }
}

}  // namespace latentnav::core
