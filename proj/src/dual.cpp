#include "resetfree/dual.hpp"

#include <cmath>

namespace resetfree {

DualState make_dual_state(int dim, double radius) {
    if (dim <= 0) throw ContractViolation("make_dual_state: dim must be positive");
    if (!(radius > 0.0)) throw ContractViolation("make_dual_state: radius must be positive");
    DualState d;
    d.theta = Eigen::VectorXd::Zero(dim);
    d.radius = radius;
    d.episode = 1;
    return d;
}

Eigen::VectorXd project_dual(const Eigen::VectorXd& theta, double radius) {
    if (!(radius > 0.0)) throw ContractViolation("project_dual: radius must be positive");
    Eigen::VectorXd out = theta.cwiseMax(0.0);
    const double norm = out.norm();
    if (norm > radius) out *= radius / norm;
    return out;
}

double lambda_value(const DualState& dual, const DualFeatures& xi, const EnvState& state) {
    if (xi.dim() != dual.theta.size()) throw ContractViolation("lambda_value: feature dim mismatch");
    Eigen::VectorXd f(xi.dim());
    xi.evaluate(state, f);
    const double lam = dual.theta.dot(f);
    if (!std::isfinite(lam)) throw NumericError("lambda_value: non-finite multiplier");
    return lam;
}

DualState ogd_step(const DualState& dual, const DualFeatures& xi, const EnvState& initial_state,
                   double v_c_estimate) {
    if (!(v_c_estimate >= 0.0 && v_c_estimate <= 1.0))
        throw ContractViolation("ogd_step: reset-value estimate outside [0,1]");
    if (xi.dim() != dual.theta.size()) throw ContractViolation("ogd_step: feature dim mismatch");
    Eigen::VectorXd f(xi.dim());
    xi.evaluate(initial_state, f);
    const double eta = dual.radius / std::sqrt(static_cast<double>(dual.episode));
    DualState next;
    next.theta = project_dual(dual.theta + eta * v_c_estimate * f, dual.radius);
    next.radius = dual.radius;
    next.episode = dual.episode + 1;
    return next;
}

} // namespace resetfree
