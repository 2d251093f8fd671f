#include "otflow/flow.hpp"

#include <algorithm>
#include <cmath>

namespace otflow {

namespace {

void check_compat(const FieldFamily& field, const ControlSchedule& u) {
  if (u.k != field.channels())
    throw std::invalid_argument("flow: control channels do not match field");
  if (u.M < 1) throw std::invalid_argument("flow: empty control schedule");
}

}  // namespace

Trajectory flow_forward(const FieldFamily& field, const ControlSchedule& u,
                        const Eigen::VectorXd& x0) {
  check_compat(field, u);
  if (x0.size() != field.dim())
    throw std::invalid_argument("flow: initial point dimension mismatch");
  const int M = u.M;
  const double h = u.h();
  Trajectory traj;
  traj.states.resize(field.dim(), M + 1);
  traj.states.col(0) = x0;
  Eigen::MatrixXd F(field.dim(), field.channels());
  for (int l = 0; l < M; ++l) {
    field.eval(traj.states.col(l), F);
    traj.states.col(l + 1) =
        traj.states.col(l) + h * (F * u.values.row(l).transpose());
    if (!traj.states.col(l + 1).allFinite()) throw FlowBlowupError(l, -1);
  }
  return traj;
}

std::vector<Trajectory> flow_map(const FieldFamily& field, const ControlSchedule& u,
                                 const std::vector<Eigen::VectorXd>& points) {
  std::vector<Trajectory> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    try {
      out.push_back(flow_forward(field, u, points[i]));
    } catch (const FlowBlowupError& e) {
      throw FlowBlowupError(e.step(), static_cast<int>(i));
    }
  }
  return out;
}

Eigen::MatrixXd costate_backward(const FieldFamily& field, const ControlSchedule& u,
                                 const Trajectory& traj,
                                 const Eigen::VectorXd& lambda_terminal) {
  check_compat(field, u);
  const int M = u.M;
  const int n = field.dim();
  if (traj.steps() != M) throw std::invalid_argument("costate: trajectory/control mismatch");
  if (lambda_terminal.size() != n)
    throw std::invalid_argument("costate: covector dimension mismatch");
  const double h = u.h();
  Eigen::MatrixXd lambdas(M + 1, n);
  lambdas.row(M) = lambda_terminal.transpose();
  Eigen::MatrixXd A(n, n);
  for (int l = M - 1; l >= 0; --l) {
    field.jacobian(traj.states.col(l), u.step(l), A);
    // lambda^l (I - h A) = lambda^{l+1}, solved through the transpose.
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n) - h * A;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S.transpose());
    if (!lu.isInvertible())
      throw std::runtime_error(
          "costate: singular implicit step (step size too large), step " +
          std::to_string(l));
    lambdas.row(l) = lu.solve(lambdas.row(l + 1).transpose()).transpose();
    if (!lambdas.row(l).allFinite())
      throw std::runtime_error("costate: non-finite covector at step " + std::to_string(l));
  }
  return lambdas;
}

double growth_bound(const FieldFamily& field, double radius, double control_norm) {
  if (radius < 0.0 || control_norm < 0.0)
    throw std::invalid_argument("growth_bound: negative argument");
  const double a = std::sqrt(static_cast<double>(field.channels())) * control_norm;
  return (radius + field.growth_constant() * a) * std::exp(a);
}

double lipschitz_bound(const FieldFamily& field, double control_norm) {
  if (control_norm < 0.0) throw std::invalid_argument("lipschitz_bound: negative norm");
  return std::exp(field.lipschitz_constant() *
                  std::sqrt(static_cast<double>(field.channels())) * control_norm);
}

std::vector<Eigen::VectorXd> flow_prefix_map(const FieldFamily& field,
                                             const ControlSchedule& u,
                                             const std::vector<Eigen::VectorXd>& points,
                                             double t) {
  check_compat(field, u);
  if (t < -1e-12 || t > 1.0 + 1e-12)
    throw std::invalid_argument("flow_prefix_map: t outside [0, 1]");
  const int node = static_cast<int>(std::lround(std::min(1.0, std::max(0.0, t)) * u.M));
  const double h = u.h();
  std::vector<Eigen::VectorXd> out;
  out.reserve(points.size());
  Eigen::MatrixXd F(field.dim(), field.channels());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Eigen::VectorXd z = points[i];
    for (int l = 0; l < node; ++l) {
      field.eval(z, F);
      z += h * (F * u.values.row(l).transpose());
      if (!z.allFinite()) throw FlowBlowupError(l, static_cast<int>(i));
    }
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace otflow
