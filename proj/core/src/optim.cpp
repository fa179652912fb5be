#include "ctxtag/optim.hpp"

#include <cmath>

namespace ctxtag {

void sgd_step(const std::vector<ParamNode*>& params, real lr, real clip_norm) {
  if (lr <= 0) throw ConfigError("sgd_step: learning rate must be positive");
  if (clip_norm <= 0) throw ConfigError("sgd_step: clip_norm must be positive");

  double sq = 0;
  for (ParamNode* p : params) {
    p->node->ensure_grad();
    for (real g : p->grad().data()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  const real scale =
      norm > clip_norm ? static_cast<real>(clip_norm / norm) : real{1};

  for (ParamNode* p : params) {
    Matrix& v = p->value();
    Matrix& g = p->grad();
    for (size_t i = 0; i < v.size(); ++i) v[i] -= lr * scale * g[i];
    g.fill(0);
  }
}

double finite_diff_check(const std::function<Var()>& loss_fn,
                         const std::vector<ParamNode*>& params, double eps) {
  for (ParamNode* p : params) p->zero_grad();
  backward(loss_fn());

  double max_rel = 0;
  for (ParamNode* p : params) {
    Matrix& v = p->value();
    const Matrix analytic = p->grad();
    for (size_t i = 0; i < v.size(); ++i) {
      const real saved = v[i];
      v[i] = saved + static_cast<real>(eps);
      const double f_plus = loss_fn()->scalar();
      v[i] = saved - static_cast<real>(eps);
      const double f_minus = loss_fn()->scalar();
      v[i] = saved;
      const double numeric = (f_plus - f_minus) / (2 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
  }
  for (ParamNode* p : params) p->zero_grad();
  return max_rel;
}

}  // namespace ctxtag
