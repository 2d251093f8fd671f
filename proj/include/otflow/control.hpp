#pragma once

#include <Eigen/Dense>
#include <string>

#include <json.hpp>

namespace otflow {

// Piecewise-constant control on [0, 1]: M steps of width 1/M, k channels.
// Row l of values is the control on [l/M, (l+1)/M).
struct ControlSchedule {
  int M = 0;
  int k = 0;
  Eigen::MatrixXd values;  // M x k

  double h() const { return 1.0 / M; }
  Eigen::VectorXd step(int l) const { return values.row(l).transpose(); }
};

ControlSchedule zero_control(int M, int k);
ControlSchedule make_control(int M, int k, Eigen::MatrixXd values);

// L^2([0,1]) norm: sqrt( (1/M) sum_l |u_l|^2 ).
double l2_norm(const ControlSchedule& u);

// JSON form: {"M": int, "k": int, "values": [[k reals] x M]}.
nlohmann::json control_to_json(const ControlSchedule& u);
ControlSchedule control_from_json(const nlohmann::json& j);
void write_control_json(const std::string& path, const ControlSchedule& u);
ControlSchedule read_control_json(const std::string& path);

}  // namespace otflow
