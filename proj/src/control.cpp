#include "otflow/control.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace otflow {

namespace {

void check_shape(int M, int k) {
  if (M < 1 || k < 1)
    throw std::invalid_argument("control schedule: M and k must be at least 1");
}

}  // namespace

ControlSchedule zero_control(int M, int k) {
  check_shape(M, k);
  return ControlSchedule{M, k, Eigen::MatrixXd::Zero(M, k)};
}

ControlSchedule make_control(int M, int k, Eigen::MatrixXd values) {
  check_shape(M, k);
  if (values.rows() != M || values.cols() != k)
    throw std::invalid_argument("control schedule: value shape mismatch");
  if (!values.allFinite())
    throw std::invalid_argument("control schedule: non-finite values");
  return ControlSchedule{M, k, std::move(values)};
}

double l2_norm(const ControlSchedule& u) {
  return std::sqrt(u.values.squaredNorm() / u.M);
}

nlohmann::json control_to_json(const ControlSchedule& u) {
  nlohmann::json values = nlohmann::json::array();
  for (int l = 0; l < u.M; ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < u.k; ++j) row.push_back(u.values(l, j));
    values.push_back(std::move(row));
  }
  return nlohmann::json{{"M", u.M}, {"k", u.k}, {"values", std::move(values)}};
}

ControlSchedule control_from_json(const nlohmann::json& j) {
  if (!j.contains("M") || !j.contains("k") || !j.contains("values"))
    throw std::invalid_argument("control json: expected M, k, values");
  const int M = j.at("M").get<int>();
  const int k = j.at("k").get<int>();
  check_shape(M, k);
  const nlohmann::json& values = j.at("values");
  if (!values.is_array() || static_cast<int>(values.size()) != M)
    throw std::invalid_argument("control json: values must have M rows");
  Eigen::MatrixXd v(M, k);
  for (int l = 0; l < M; ++l) {
    const nlohmann::json& row = values.at(static_cast<std::size_t>(l));
    if (!row.is_array() || static_cast<int>(row.size()) != k)
      throw std::invalid_argument("control json: each row must have k entries");
    for (int c = 0; c < k; ++c) v(l, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return make_control(M, k, std::move(v));
}

void write_control_json(const std::string& path, const ControlSchedule& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << control_to_json(u).dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed on " + path);
}

ControlSchedule read_control_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return control_from_json(j);
}

}  // namespace otflow
