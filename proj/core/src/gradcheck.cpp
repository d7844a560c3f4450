#include "glad/gradcheck.hpp"

#include <cmath>
#include <string>

namespace glad {

std::vector<double> central_diff(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& theta, double eps) {
  if (!(eps > 0.0)) {
    throw InvalidInputError("central_diff: eps must be positive, got " +
                            std::to_string(eps));
  }
  std::vector<double> probe = theta;
  std::vector<double> grad(theta.size(), 0.0);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = probe[k];
    probe[k] = saved + eps;
    const double fp = f(probe);
    probe[k] = saved - eps;
    const double fm = f(probe);
    probe[k] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw InvalidInputError(
          "central_diff: non-finite objective at coordinate " +
          std::to_string(k));
    }
    grad[k] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double gradient_rel_error(const std::vector<double>& a,
                          const std::vector<double>& b, double norm_floor) {
  if (a.size() != b.size()) {
    throw ShapeError("gradient_rel_error: lengths " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
  double na = 0.0, nb = 0.0, nd = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] * a[i];
    nb += b[i] * b[i];
    const double d = a[i] - b[i];
    nd += d * d;
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  nd = std::sqrt(nd);
  const double denom = std::max(na, nb);
  return denom >= norm_floor ? nd / denom : nd;
}

}  // namespace glad
