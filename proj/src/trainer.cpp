#include "otflow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace otflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Plan sufficient statistics for the covectors: row masses w_i = sum_j
// gamma_ij and row barycenter sums s_i = sum_j gamma_ij y_j.
struct PlanStats {
  const CouplingPlan& plan;
  const DiscreteMeasure& nu;
  std::vector<double> row_mass;
  std::vector<Eigen::VectorXd> row_sum;

  PlanStats(const CouplingPlan& p, const DiscreteMeasure& target)
      : plan(p), nu(target) {
    row_mass.assign(static_cast<std::size_t>(plan.n1()), 0.0);
    row_sum.assign(static_cast<std::size_t>(plan.n1()),
                   Eigen::VectorXd::Zero(nu.dim()));
    for (const PlanEntry& e : plan.entries()) {
      row_mass[static_cast<std::size_t>(e.i)] += e.mass;
      row_sum[static_cast<std::size_t>(e.i)] += e.mass * nu.atom(e.j);
    }
  }

  // sum_ij gamma_ij |z_i - y_j|^2, summed entrywise so it is exactly
  // nonnegative.
  double coupling_cost(const std::vector<Eigen::VectorXd>& z) const {
    double c = 0.0;
    for (const PlanEntry& e : plan.entries())
      c += e.mass * (z[static_cast<std::size_t>(e.i)] - nu.atom(e.j)).squaredNorm();
    return c;
  }

  Eigen::VectorXd terminal_lambda(int i, const Eigen::VectorXd& z) const {
    return -2.0 * (row_mass[static_cast<std::size_t>(i)] * z -
                   row_sum[static_cast<std::size_t>(i)]);
  }
};

void check_instance(const FieldFamily& field, const DiscreteMeasure& mu,
                    const DiscreteMeasure& nu, const CouplingPlan& plan) {
  if (mu.dim() != field.dim() || nu.dim() != field.dim())
    throw std::invalid_argument("trainer: measure dimension does not match field");
  if (plan.n1() != mu.size() || plan.n2() != nu.size())
    throw std::invalid_argument("trainer: plan does not match measures");
}

double control_energy(const ControlSchedule& u, double beta) {
  return 0.5 * beta * u.values.squaredNorm() / u.M;
}

std::vector<Eigen::VectorXd> terminal_states(const std::vector<Trajectory>& trajs) {
  std::vector<Eigen::VectorXd> z;
  z.reserve(trajs.size());
  for (const Trajectory& t : trajs) z.push_back(t.terminal());
  return z;
}

[[noreturn]] void contract_violation(const char* what) {
  throw std::logic_error(std::string("trainer contract violated: ") + what);
}

}  // namespace

void TrainerConfig::validate() const {
  if (!(beta > 0)) throw std::invalid_argument("trainer config: beta must be positive");
  if (!(rho0 > 0)) throw std::invalid_argument("trainer config: rho0 must be positive");
  if (!(tau > 0 && tau < 1))
    throw std::invalid_argument("trainer config: tau must lie in (0, 1)");
  if (max_iter < 0) throw std::invalid_argument("trainer config: max_iter must be >= 0");
  if (!(rho_min > 0)) throw std::invalid_argument("trainer config: rho_min must be positive");
  if (!(cost_tol >= 0)) throw std::invalid_argument("trainer config: cost_tol negative");
}

double cost_functional(const FieldFamily& field, const ControlSchedule& u,
                       const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                       const CouplingPlan& plan, double beta) {
  check_instance(field, mu, nu, plan);
  const PlanStats stats(plan, nu);
  const std::vector<Trajectory> trajs = flow_map(field, u, mu.atoms());
  return stats.coupling_cost(terminal_states(trajs)) + control_energy(u, beta);
}

std::vector<Eigen::VectorXd> terminal_covector(const std::vector<Eigen::VectorXd>& terminal,
                                               const CouplingPlan& plan,
                                               const DiscreteMeasure& nu) {
  if (static_cast<int>(terminal.size()) != plan.n1())
    throw std::invalid_argument("terminal_covector: state count mismatch");
  const PlanStats stats(plan, nu);
  std::vector<Eigen::VectorXd> lambdas;
  lambdas.reserve(terminal.size());
  for (std::size_t i = 0; i < terminal.size(); ++i)
    lambdas.push_back(stats.terminal_lambda(static_cast<int>(i), terminal[i]));
  return lambdas;
}

Eigen::VectorXd corrected_covector(const Eigen::VectorXd& lambda, double row_mass,
                                   const Eigen::VectorXd& z_old,
                                   const Eigen::VectorXd& z_new) {
  return lambda - 2.0 * row_mass * (z_new - z_old);
}

Eigen::VectorXd maximize_augmented_hamiltonian(const Eigen::VectorXd& a,
                                               const Eigen::VectorXd& u_prev,
                                               double beta, double rho) {
  if (!(rho > 0) || !(beta > 0))
    throw std::invalid_argument("maximize_augmented_hamiltonian: rho and beta must be positive");
  if (a.size() != u_prev.size())
    throw std::invalid_argument("maximize_augmented_hamiltonian: size mismatch");
  return (rho * a + u_prev) / (1.0 + rho * beta);
}

TrainerState init_trainer_state(const FieldFamily& field, const DiscreteMeasure& mu,
                                const DiscreteMeasure& nu, const CouplingPlan& plan,
                                const TrainerConfig& config,
                                const std::optional<ControlSchedule>& u0, int steps) {
  config.validate();
  check_instance(field, mu, nu, plan);
  TrainerState state;
  state.u = u0 ? *u0 : zero_control(steps, field.channels());
  if (state.u.k != field.channels())
    throw std::invalid_argument("trainer: control channels do not match field");
  state.trajectories = flow_map(field, state.u, mu.atoms());
  const PlanStats stats(plan, nu);
  state.cost = stats.coupling_cost(terminal_states(state.trajectories)) +
               control_energy(state.u, config.beta);
  state.rho = config.rho0;
  state.flag = 1;
  return state;
}

void pmp_iteration(const FieldFamily& field, const DiscreteMeasure& mu,
                   const DiscreteMeasure& nu, const CouplingPlan& plan,
                   const TrainerConfig& config, TrainerState& state) {
  check_instance(field, mu, nu, plan);
  const int N = mu.size();
  const int M = state.u.M;
  const int n = field.dim();
  const int k = field.channels();
  const double h = state.u.h();
  const PlanStats stats(plan, nu);

  // Fresh covectors along the implicit scheme when the trajectories moved.
  if (state.flag == 1) {
    state.covectors.resize(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
      const Eigen::VectorXd lam_T =
          stats.terminal_lambda(i, state.trajectories[static_cast<std::size_t>(i)].terminal());
      state.covectors[static_cast<std::size_t>(i)] =
          costate_backward(field, state.u, state.trajectories[static_cast<std::size_t>(i)], lam_T);
    }
  }

  // Trial sweep at the current rho.
  ControlSchedule u_new = state.u;
  std::vector<Trajectory> trial(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    trial[static_cast<std::size_t>(i)].states.resize(n, M + 1);
    trial[static_cast<std::size_t>(i)].states.col(0) =
        state.trajectories[static_cast<std::size_t>(i)].states.col(0);
  }
  std::vector<Eigen::VectorXd> lam_corr(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i)
    lam_corr[static_cast<std::size_t>(i)] =
        state.covectors[static_cast<std::size_t>(i)].row(0).transpose();

  std::vector<Eigen::MatrixXd> F(static_cast<std::size_t>(N),
                                 Eigen::MatrixXd(n, k));
  bool blown_up = false;
  for (int l = 1; l <= M && !blown_up; ++l) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < N; ++i) {
      field.eval(trial[static_cast<std::size_t>(i)].states.col(l - 1),
                 F[static_cast<std::size_t>(i)]);
      a.noalias() += F[static_cast<std::size_t>(i)].transpose() *
                     lam_corr[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd v = maximize_augmented_hamiltonian(
        a, state.u.values.row(l - 1).transpose(), config.beta, state.rho);
    u_new.values.row(l - 1) = v.transpose();
    for (int i = 0; i < N; ++i) {
      auto& ti = trial[static_cast<std::size_t>(i)];
      ti.states.col(l) = ti.states.col(l - 1) + h * (F[static_cast<std::size_t>(i)] * v);
      if (!ti.states.col(l).allFinite()) {
        blown_up = true;
        break;
      }
      lam_corr[static_cast<std::size_t>(i)] = corrected_covector(
          state.covectors[static_cast<std::size_t>(i)].row(l).transpose(),
          stats.row_mass[static_cast<std::size_t>(i)],
          state.trajectories[static_cast<std::size_t>(i)].states.col(l),
          ti.states.col(l));
    }
  }

  double cost_new = kInf;
  if (!blown_up)
    cost_new = stats.coupling_cost(terminal_states(trial)) +
               control_energy(u_new, config.beta);

  const int iter = static_cast<int>(state.history.size()) + 1;
  if (cost_new < state.cost) {
    state.u = std::move(u_new);
    state.trajectories = std::move(trial);
    state.cost = cost_new;
    state.flag = 1;
  } else {
    state.rho *= config.tau;
    state.flag = 0;
  }
  state.history.push_back(IterationRecord{iter, state.cost, state.rho, state.flag == 1});
}

TrainResult train(const FieldFamily& field, const DiscreteMeasure& mu,
                  const DiscreteMeasure& nu, const CouplingPlan& plan,
                  const TrainerConfig& config, int steps,
                  const std::optional<ControlSchedule>& u0) {
  TrainerState state = init_trainer_state(field, mu, nu, plan, config, u0, steps);

  TrainResult result;
  result.u = state.u;
  result.cost = state.cost;
  result.termination = "max_iter";

  int small_streak = 0;
  for (int it = 0; it < config.max_iter; ++it) {
    const double prev_cost = state.cost;
    const double prev_rho = state.rho;
    const ControlSchedule prev_u = state.u;
    pmp_iteration(field, mu, nu, plan, config, state);
    const IterationRecord& rec = state.history.back();

    if (rec.accepted) {
      if (!(state.cost < prev_cost)) contract_violation("accepted without strict decrease");
      if (state.rho != prev_rho) contract_violation("accepted step changed rho");
      ++result.accepted;
      if (state.cost < result.cost) {
        result.cost = state.cost;
        result.u = state.u;
      }
      const double rel = (prev_cost - state.cost) / std::max(std::abs(prev_cost), 1e-300);
      small_streak = (rel < config.cost_tol) ? small_streak + 1 : 0;
      if (small_streak >= 10) {
        result.termination = "converged";
        break;
      }
    } else {
      if (state.cost != prev_cost) contract_violation("rejected step changed cost");
      if (state.rho != prev_rho * config.tau) contract_violation("rejected step mis-scaled rho");
      if ((state.u.values - prev_u.values).norm() != 0.0)
        contract_violation("rejected step changed control");
      if (state.rho < config.rho_min) {
        result.termination = "stalled";
        break;
      }
    }
  }
  result.history = std::move(state.history);
  return result;
}

Eigen::MatrixXd adjoint_gradient(const FieldFamily& field, const ControlSchedule& u,
                                 const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                 const CouplingPlan& plan, double beta) {
  check_instance(field, mu, nu, plan);
  const int M = u.M;
  const int n = field.dim();
  const int k = field.channels();
  const double h = u.h();
  const PlanStats stats(plan, nu);
  const std::vector<Trajectory> trajs = flow_map(field, u, mu.atoms());

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(M, k);
  Eigen::MatrixXd F(n, k);
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < mu.size(); ++i) {
    const Trajectory& traj = trajs[static_cast<std::size_t>(i)];
    // p = gradient of the coupling term w.r.t. the state, swept backwards
    // through the transposed Euler transition (I + h A)^T.
    Eigen::VectorXd p = -stats.terminal_lambda(i, traj.terminal());
    for (int c = M - 1; c >= 0; --c) {
      field.eval(traj.states.col(c), F);
      grad.row(c).noalias() += h * (F.transpose() * p).transpose();
      field.jacobian(traj.states.col(c), u.step(c), A);
      p.noalias() += h * (A.transpose() * p).eval();
    }
  }
  grad += (beta * h) * u.values;
  return grad;
}

void GradientDescentConfig::validate() const {
  if (!(beta > 0)) throw std::invalid_argument("gd config: beta must be positive");
  if (!(step0 > 0)) throw std::invalid_argument("gd config: step0 must be positive");
  if (!(shrink > 0 && shrink < 1))
    throw std::invalid_argument("gd config: shrink must lie in (0, 1)");
  if (!(grow >= 1)) throw std::invalid_argument("gd config: grow must be >= 1");
  if (!(armijo > 0 && armijo < 1))
    throw std::invalid_argument("gd config: armijo must lie in (0, 1)");
  if (max_iter < 0) throw std::invalid_argument("gd config: max_iter must be >= 0");
  if (!(step_min > 0)) throw std::invalid_argument("gd config: step_min must be positive");
  if (!(cost_tol >= 0)) throw std::invalid_argument("gd config: cost_tol negative");
}

TrainResult gradient_descent_train(const FieldFamily& field, const DiscreteMeasure& mu,
                                   const DiscreteMeasure& nu, const CouplingPlan& plan,
                                   const GradientDescentConfig& config, int steps,
                                   const std::optional<ControlSchedule>& u0) {
  config.validate();
  check_instance(field, mu, nu, plan);
  const PlanStats stats(plan, nu);

  ControlSchedule u = u0 ? *u0 : zero_control(steps, field.channels());
  if (u.k != field.channels())
    throw std::invalid_argument("gd: control channels do not match field");

  auto eval_cost = [&](const ControlSchedule& c) {
    try {
      const std::vector<Trajectory> trajs = flow_map(field, c, mu.atoms());
      return stats.coupling_cost(terminal_states(trajs)) + control_energy(c, config.beta);
    } catch (const FlowBlowupError&) {
      return kInf;
    }
  };

  TrainResult result;
  result.u = u;
  result.cost = eval_cost(u);
  result.termination = "max_iter";

  double cost = result.cost;
  double step = config.step0;
  Eigen::MatrixXd g = adjoint_gradient(field, u, mu, nu, plan, config.beta);
  int small_streak = 0;
  for (int it = 1; it <= config.max_iter; ++it) {
    const double gnorm2 = g.squaredNorm();
    if (gnorm2 == 0.0) {
      result.termination = "converged";
      break;
    }
    ControlSchedule u_try = u;
    u_try.values -= step * g;
    const double cost_try = eval_cost(u_try);
    const bool accept = cost_try < cost - config.armijo * step * gnorm2;
    if (accept) {
      const double prev_cost = cost;
      u = std::move(u_try);
      cost = cost_try;
      g = adjoint_gradient(field, u, mu, nu, plan, config.beta);
      ++result.accepted;
      if (cost < result.cost) {
        result.cost = cost;
        result.u = u;
      }
      const double rel = (prev_cost - cost) / std::max(std::abs(prev_cost), 1e-300);
      small_streak = (rel < config.cost_tol) ? small_streak + 1 : 0;
      result.history.push_back(IterationRecord{it, cost, step, true});
      if (small_streak >= 10) {
        result.termination = "converged";
        break;
      }
      step = std::min(step * config.grow, config.step_max);
    } else {
      step *= config.shrink;
      result.history.push_back(IterationRecord{it, cost, step, false});
      if (step < config.step_min) {
        result.termination = "stalled";
        break;
      }
    }
  }
  return result;
}

double minimizer_norm_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                            double beta, const CouplingPlan* plan) {
  if (!(beta > 0)) throw std::invalid_argument("minimizer_norm_bound: beta must be positive");
  double worst = 0.0;
  if (plan) {
    if (plan->n1() != mu.size() || plan->n2() != nu.size())
      throw std::invalid_argument("minimizer_norm_bound: plan does not match measures");
    for (const PlanEntry& p : plan->entries())
      worst = std::max(worst, squared_cost(mu.atom(p.i), nu.atom(p.j)));
  } else {
    for (int i = 0; i < mu.size(); ++i)
      for (int j = 0; j < nu.size(); ++j)
        worst = std::max(worst, squared_cost(mu.atom(i), nu.atom(j)));
  }
  return 2.0 * worst / beta;
}

}  // namespace otflow
