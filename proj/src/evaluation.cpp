#include "otflow/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "otflow/flow.hpp"

namespace otflow {

namespace {

std::vector<Eigen::VectorXd> terminal_points(const FieldFamily& field,
                                             const ControlSchedule& u,
                                             const DiscreteMeasure& mu) {
  std::vector<Eigen::VectorXd> z;
  z.reserve(static_cast<std::size_t>(mu.size()));
  for (const Trajectory& traj : flow_map(field, u, mu.atoms()))
    z.push_back(traj.terminal());
  return z;
}

std::vector<Eigen::VectorXd> mapped_points(const DiscreteMeasure& mu,
                                           const PointMap& map) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(mu.size()));
  for (const Eigen::VectorXd& x : mu.atoms()) {
    Eigen::VectorXd y = map(x);
    if (!y.allFinite())
      throw std::invalid_argument("evaluation: exact map produced non-finite point");
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace

EvalReport evaluate(const FieldFamily& field, const ControlSchedule& u,
                    const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    const CouplingPlan& plan, const PointMap* exact_map,
                    const DiscreteMeasure* mu_ref, const DiscreteMeasure* nu_ref) {
  if (plan.n1() != mu.size() || plan.n2() != nu.size())
    throw std::invalid_argument("evaluate: plan does not match measures");
  const std::vector<Eigen::VectorXd> z = terminal_points(field, u, mu);

  EvalReport report;
  report.control_norm = l2_norm(u);
  for (const PlanEntry& p : plan.entries())
    report.coupling_cost +=
        p.mass * (z[static_cast<std::size_t>(p.i)] - nu.atom(p.j)).squaredNorm();

  const DiscreteMeasure push(z, mu.weights());
  report.w2_push_vs_target = w2_distance(push, nu);
  if (report.w2_push_vs_target * report.w2_push_vs_target >
      report.coupling_cost + 1e-9)
    throw std::logic_error("evaluate: pushforward distance exceeded the coupling cost");

  if (exact_map) {
    const std::vector<Eigen::VectorXd> t = mapped_points(mu, *exact_map);
    double err2 = 0.0;
    for (int i = 0; i < mu.size(); ++i)
      err2 += mu.weight(i) * (z[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(i)]).squaredNorm();
    report.l2_map_error = std::sqrt(err2);
  }

  if (mu_ref && nu_ref) {
    const double lip = lipschitz_bound(field, report.control_norm);
    report.decomposition = std::array<double, 3>{
        lip * w2_distance(*mu_ref, mu),
        2.0 * std::sqrt(report.coupling_cost),
        w2_distance(nu, *nu_ref)};
  }
  return report;
}

nlohmann::json eval_report_to_json(const EvalReport& report) {
  nlohmann::json j{{"w2_push_vs_target", report.w2_push_vs_target},
                   {"kappa_proxy", report.coupling_cost},
                   {"coupling_cost", report.coupling_cost},
                   {"control_norm", report.control_norm}};
  j["l2_map_error"] =
      report.l2_map_error ? nlohmann::json(*report.l2_map_error) : nlohmann::json();
  if (report.decomposition) {
    const auto& d = *report.decomposition;
    j["decomposition"] = {{"source_term", d[0]},
                          {"coupling_term", d[1]},
                          {"target_term", d[2]},
                          {"total", d[0] + d[1] + d[2]}};
  } else {
    j["decomposition"] = nlohmann::json();
  }
  return j;
}

void write_eval_json(const std::string& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << eval_report_to_json(report).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed on " + path);
}

DiscreteMeasure interpolated_pushforward(const DiscreteMeasure& mu,
                                         const std::vector<Eigen::VectorXd>& mapped,
                                         double t) {
  if (static_cast<int>(mapped.size()) != mu.size())
    throw std::invalid_argument("interpolated_pushforward: point count mismatch");
  if (t < 0.0 || t > 1.0)
    throw std::invalid_argument("interpolated_pushforward: t outside [0, 1]");
  std::vector<Eigen::VectorXd> atoms;
  atoms.reserve(mapped.size());
  for (int i = 0; i < mu.size(); ++i)
    atoms.push_back((1.0 - t) * mu.atom(i) + t * mapped[static_cast<std::size_t>(i)]);
  return DiscreteMeasure(std::move(atoms), mu.weights());
}

double l2_map_error(const FieldFamily& field, const ControlSchedule& u,
                    const DiscreteMeasure& mu, const PointMap& exact_map) {
  const std::vector<Eigen::VectorXd> z = terminal_points(field, u, mu);
  const std::vector<Eigen::VectorXd> t = mapped_points(mu, exact_map);
  double err2 = 0.0;
  for (int i = 0; i < mu.size(); ++i)
    err2 += mu.weight(i) *
            (z[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(i)]).squaredNorm();
  return std::sqrt(err2);
}

std::vector<DeviationSample> geodesic_deviation(const FieldFamily& field,
                                                const ControlSchedule& u,
                                                const DiscreteMeasure& mu,
                                                const PointMap& exact_map,
                                                const std::vector<double>& ts) {
  const std::vector<Eigen::VectorXd> learned = terminal_points(field, u, mu);
  const std::vector<Eigen::VectorXd> exact = mapped_points(mu, exact_map);
  double err2 = 0.0;
  for (int i = 0; i < mu.size(); ++i)
    err2 += mu.weight(i) *
            (learned[static_cast<std::size_t>(i)] - exact[static_cast<std::size_t>(i)]).squaredNorm();
  const double err = std::sqrt(err2);

  std::vector<DeviationSample> out;
  out.reserve(ts.size());
  for (double t : ts) {
    const DiscreteMeasure eta_learned = interpolated_pushforward(mu, learned, t);
    const DiscreteMeasure eta_exact = interpolated_pushforward(mu, exact, t);
    out.push_back(DeviationSample{t, t * err, w2_distance(eta_learned, eta_exact)});
  }
  return out;
}

std::vector<CurveSample> prefix_curve_deviation(const FieldFamily& field,
                                                const ControlSchedule& u,
                                                const DiscreteMeasure& mu,
                                                const PointMap& exact_map,
                                                const std::vector<double>& ts) {
  const std::vector<Eigen::VectorXd> exact = mapped_points(mu, exact_map);
  std::vector<CurveSample> out;
  out.reserve(ts.size());
  for (double t : ts) {
    const std::vector<Eigen::VectorXd> states = flow_prefix_map(field, u, mu.atoms(), t);
    const DiscreteMeasure flow_marginal(states, mu.weights());
    const DiscreteMeasure eta = interpolated_pushforward(mu, exact, t);
    out.push_back(CurveSample{t, w2_distance(flow_marginal, eta)});
  }
  return out;
}

}  // namespace otflow
