#include "sfkit/grad_check.hpp"

#include <cmath>

namespace sfkit {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  if (!(eps > 0.0)) throw InputError("finite_diff_grad: eps must be > 0");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double hi = f(probe);
    probe[i] = saved - eps;
    const double lo = f(probe);
    probe[i] = saved;
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw InvariantError("finite_diff_grad: non-finite function value at component " +
                           std::to_string(i));
    }
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

}  // namespace sfkit
