#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace otflow {

// One channel of a control-linear field family: the vector field
//   v(x) = x^alpha * g(x)^gaussian * e_component,
// with x^alpha a monomial and g(x) = exp(-|x|^2 / (2 zeta)).
struct FieldChannel {
  int component = 0;
  std::vector<int> exponents;  // one entry per coordinate
  bool gaussian = false;
};

// Family F(x) = [v_1(x) ... v_k(x)], driving dx/dt = F(x) u(t).
// Carries certified constants: L with |F_j(x) - F_j(y)| <= L |x - y| and
// C with |F_j(x)| <= C (1 + |x|) for every channel j.
class FieldFamily {
 public:
  FieldFamily(int dim, std::vector<FieldChannel> channels, double zeta,
              std::string descriptor);

  int dim() const { return dim_; }
  int channels() const { return static_cast<int>(channels_.size()); }
  double zeta() const { return zeta_; }
  const std::string& descriptor() const { return descriptor_; }
  double lipschitz_constant() const { return lipschitz_; }
  double growth_constant() const { return growth_; }
  // Certified sup of |F_j| for bounded channels, +inf for unbounded ones.
  double channel_sup(int j) const { return channel_sup_[static_cast<std::size_t>(j)]; }
  double channel_lipschitz(int j) const { return channel_lip_[static_cast<std::size_t>(j)]; }

  // F(x) as a dim x k matrix (columns are channels).
  void eval(const Eigen::VectorXd& x, Eigen::MatrixXd& F) const;
  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;

  // d/dx [F(x) u], a dim x dim matrix.
  void jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                Eigen::MatrixXd& A) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;

 private:
  int dim_;
  std::vector<FieldChannel> channels_;
  double zeta_;
  std::string descriptor_;
  double lipschitz_ = 0.0;
  double growth_ = 0.0;
  std::vector<double> channel_sup_;
  std::vector<double> channel_lip_;
};

// Constant fields e_1..e_n; k = n, L = 0, C = 1.
FieldFamily make_translation_family(int dim);

// Plane family with k = 14 channels: constants, Gaussian constants, linear
// fields, and Gaussian-weighted quadratics on both components.
FieldFamily make_hermite2d_family(double zeta);

// Constants plus Gaussian constants in any dimension; k = 2n.
FieldFamily make_hermite_family(int dim, double zeta);

// Descriptor strings: "translations:dim=N", "hermite2d:zeta=Z",
// "hermiteNd:dim=N,zeta=Z".
FieldFamily parse_field_family(const std::string& descriptor);

}  // namespace otflow
