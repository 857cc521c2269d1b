#include "posergcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace posergcn {

namespace {

double eval_loss(const LossBuilder& build) {
  Tape tape;
  Var root = build(tape);
  const Matrix& v = root.value();
  if (v.rows() != 1 || v.cols() != 1)
    throw ArgumentError("finite_diff_check: loss must be scalar, got " + shape_str(v));
  const double loss = v(0, 0);
  if (!std::isfinite(loss)) throw EvaluationError("finite_diff_check: non-finite loss");
  return loss;
}

}  // namespace

double finite_diff_check(const LossBuilder& build, std::span<Param* const> params, double step) {
  if (step <= 0.0) throw ArgumentError("finite_diff_check: step must be positive");

  for (Param* p : params) p->zero_grad();
  {
    Tape tape;
    Var root = build(tape);
    const Matrix& v = root.value();
    if (v.rows() != 1 || v.cols() != 1)
      throw ArgumentError("finite_diff_check: loss must be scalar, got " + shape_str(v));
    if (!std::isfinite(v(0, 0))) throw EvaluationError("finite_diff_check: non-finite loss");
    tape.backward(root);
  }
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    for (int i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double fp = eval_loss(build);
      p.value[i] = saved - step;
      const double fm = eval_loss(build);
      p.value[i] = saved;

      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace posergcn
