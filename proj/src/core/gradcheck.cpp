#include "latentnav/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace latentnav::core {

GradCheckReport check_gradients(const std::vector<Param*>& params,
                                const std::function<Real()>& loss_value,
                                const std::unordered_map<Param*, Tensor>& analytic,
                                int probes_per_tensor, Real h, Rng& rng, Real denom_floor) {
  GradCheckReport rep;
  for (Param* p : params) {
    auto it = analytic.find(p);
    LN_CHECK(it != analytic.end(), "no analytic gradient recorded for ", p->name);
    const Tensor& an = it->second;
    const int64_t n = p->value.numel();
    std::vector<int64_t> idx;
    if (n <= probes_per_tensor) {
      for (int64_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int k = 0; k < probes_per_tensor; ++k) idx.push_back(rng.uniform_int(0, n - 1));
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    }
    for (int64_t i : idx) {
      Real saved = p->value[i];
      p->value[i] = saved + h;
      Real fp = loss_value();
      p->value[i] = saved - h;
      Real fm = loss_value();
      p->value[i] = saved;
      Real fd = (fp - fm) / (2 * h);
      Real a = an[i];
      Real rel = std::abs(fd - a) / std::max({denom_floor, std::abs(fd), std::abs(a)});
      ++rep.probes;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p->name;
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

}  // namespace latentnav::core
