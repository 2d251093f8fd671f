#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otflow/control.hpp"
#include "otflow/field_family.hpp"
#include "otflow/measure.hpp"

namespace otflow {

using PointMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Quality report for a trained control against a coupling.
// coupling_cost (the kappa proxy) always dominates w2_push_vs_target^2: the
// plan itself couples the pushforward with the target.
struct EvalReport {
  double w2_push_vs_target = 0.0;
  double coupling_cost = 0.0;
  double control_norm = 0.0;
  std::optional<double> l2_map_error;
  // {L_beta * W2(mu_ref, mu), 2 sqrt(coupling_cost), W2(nu, nu_ref)}
  std::optional<std::array<double, 3>> decomposition;
};

EvalReport evaluate(const FieldFamily& field, const ControlSchedule& u,
                    const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    const CouplingPlan& plan, const PointMap* exact_map = nullptr,
                    const DiscreteMeasure* mu_ref = nullptr,
                    const DiscreteMeasure* nu_ref = nullptr);

nlohmann::json eval_report_to_json(const EvalReport& report);
void write_eval_json(const std::string& path, const EvalReport& report);

// ((1-t) Id + t map)_# mu from precomputed mapped points.
DiscreteMeasure interpolated_pushforward(const DiscreteMeasure& mu,
                                         const std::vector<Eigen::VectorXd>& mapped,
                                         double t);

// sqrt( sum_i w_i |Phi_u(x_i) - T(x_i)|^2 ).
double l2_map_error(const FieldFamily& field, const ControlSchedule& u,
                    const DiscreteMeasure& mu, const PointMap& exact_map);

struct DeviationSample {
  double t = 0.0;
  double bound = 0.0;
  double actual = 0.0;
};

// W2 between the two straight-line interpolations (learned vs exact) at each
// t, with the guaranteed bound t * l2_map_error.
std::vector<DeviationSample> geodesic_deviation(const FieldFamily& field,
                                                const ControlSchedule& u,
                                                const DiscreteMeasure& mu,
                                                const PointMap& exact_map,
                                                const std::vector<double>& ts);

struct CurveSample {
  double t = 0.0;
  double value = 0.0;
};

// W2 between the flow's own time-t marginal (at grid nodes round(t M)) and
// the straight-line interpolation toward the exact map.
std::vector<CurveSample> prefix_curve_deviation(const FieldFamily& field,
                                                const ControlSchedule& u,
                                                const DiscreteMeasure& mu,
                                                const PointMap& exact_map,
                                                const std::vector<double>& ts);

}  // namespace otflow
