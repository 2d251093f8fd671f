#include "otflow/field_family.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace otflow {

namespace {

// Certified channel constants, all closed form.
//
// Gaussian constant g(x) = e^{-|x|^2/(2z)}:  |grad g| maxes at |x| = sqrt(z),
// giving L = 1/sqrt(e z).
//
// Gaussian square x_c^2 g(x): with t = x_c^2/z and r the orthogonal radius,
//   |grad|^2 = e^{-r^2/z} e^{-t} z t (2-t)^2 + [x_c^4 e^{-t}] r^2 e^{-r^2/z} / z^2
// bounded termwise by z g(t*) + 4 z e^{-3}, t* = (5 - sqrt 17)/2.
//
// Gaussian cross x_c x_d g(x): termwise bound z (2/e + e^{-3}).
//
// Sups: x_c^2 g <= 2z/e, |x_c x_d| g <= z/e (both attained).
struct ChannelConstants {
  double sup;   // +inf when unbounded
  double lip;
  double growth;  // C with |v(x)| <= C (1 + |x|)
};

ChannelConstants classify(const FieldChannel& ch, double zeta, int dim) {
  const int degree = std::accumulate(ch.exponents.begin(), ch.exponents.end(), 0);
  const double inf = std::numeric_limits<double>::infinity();
  if (ch.component < 0 || ch.component >= dim)
    throw std::invalid_argument("field channel: component out of range");
  if (static_cast<int>(ch.exponents.size()) != dim)
    throw std::invalid_argument("field channel: exponent arity mismatch");

  if (!ch.gaussian) {
    if (degree == 0) return {1.0, 0.0, 1.0};
    if (degree == 1) return {inf, 1.0, 1.0};
    throw std::invalid_argument("field channel: unweighted degree > 1 unsupported");
  }
  if (zeta <= 0.0) throw std::invalid_argument("field family: zeta must be positive");
  if (degree == 0) {
    return {1.0, 1.0 / std::sqrt(std::exp(1.0) * zeta), 1.0};
  }
  if (degree == 2) {
    const bool square =
        std::any_of(ch.exponents.begin(), ch.exponents.end(), [](int e) { return e == 2; });
    if (square) {
      const double tstar = (5.0 - std::sqrt(17.0)) / 2.0;
      const double g = tstar * (2.0 - tstar) * (2.0 - tstar) * std::exp(-tstar);
      const double sup = 2.0 * zeta / std::exp(1.0);
      return {sup, std::sqrt(zeta * (g + 4.0 * std::exp(-3.0))), sup};
    }
    const double sup = zeta / std::exp(1.0);
    return {sup, std::sqrt(zeta * (2.0 / std::exp(1.0) + std::exp(-3.0))), sup};
  }
  throw std::invalid_argument("field channel: unsupported gaussian degree");
}

double monomial(const Eigen::VectorXd& x, const std::vector<int>& exps) {
  double m = 1.0;
  for (int d = 0; d < x.size(); ++d) {
    const int e = exps[static_cast<std::size_t>(d)];
    for (int p = 0; p < e; ++p) m *= x[d];
  }
  return m;
}

}  // namespace

FieldFamily::FieldFamily(int dim, std::vector<FieldChannel> channels, double zeta,
                         std::string descriptor)
    : dim_(dim), channels_(std::move(channels)), zeta_(zeta),
      descriptor_(std::move(descriptor)) {
  if (dim_ <= 0) throw std::invalid_argument("field family: dim must be positive");
  if (channels_.empty()) throw std::invalid_argument("field family: no channels");
  for (const FieldChannel& ch : channels_) {
    const ChannelConstants c = classify(ch, zeta_, dim_);
    channel_sup_.push_back(c.sup);
    channel_lip_.push_back(c.lip);
    lipschitz_ = std::max(lipschitz_, c.lip);
    growth_ = std::max(growth_, c.growth);
  }
}

void FieldFamily::eval(const Eigen::VectorXd& x, Eigen::MatrixXd& F) const {
  if (x.size() != dim_) throw std::invalid_argument("field eval: dimension mismatch");
  F.setZero(dim_, channels());
  double gauss = 0.0;
  bool have_gauss = false;
  for (int j = 0; j < channels(); ++j) {
    const FieldChannel& ch = channels_[static_cast<std::size_t>(j)];
    double val = monomial(x, ch.exponents);
    if (ch.gaussian) {
      if (!have_gauss) {
        gauss = std::exp(-x.squaredNorm() / (2.0 * zeta_));
        have_gauss = true;
      }
      val *= gauss;
    }
    F(ch.component, j) = val;
  }
}

Eigen::MatrixXd FieldFamily::eval(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd F;
  eval(x, F);
  return F;
}

void FieldFamily::jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           Eigen::MatrixXd& A) const {
  if (x.size() != dim_) throw std::invalid_argument("field jacobian: dimension mismatch");
  if (u.size() != channels())
    throw std::invalid_argument("field jacobian: control dimension mismatch");
  A.setZero(dim_, dim_);
  const double gauss = std::exp(-x.squaredNorm() / (2.0 * zeta_));
  Eigen::VectorXd grad(dim_);
  for (int j = 0; j < channels(); ++j) {
    if (u[j] == 0.0) continue;
    const FieldChannel& ch = channels_[static_cast<std::size_t>(j)];
    const double m = monomial(x, ch.exponents);
    // grad of the monomial.
    for (int d = 0; d < dim_; ++d) {
      const int e = ch.exponents[static_cast<std::size_t>(d)];
      if (e == 0) {
        grad[d] = 0.0;
        continue;
      }
      double g = e;
      for (int p = 0; p < e - 1; ++p) g *= x[d];
      for (int dd = 0; dd < dim_; ++dd) {
        if (dd == d) continue;
        const int ee = ch.exponents[static_cast<std::size_t>(dd)];
        for (int p = 0; p < ee; ++p) g *= x[dd];
      }
      grad[d] = g;
    }
    if (ch.gaussian) {
      grad *= gauss;
      grad -= (m * gauss / zeta_) * x;
    }
    A.row(ch.component) += u[j] * grad.transpose();
  }
}

Eigen::MatrixXd FieldFamily::jacobian(const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u) const {
  Eigen::MatrixXd A;
  jacobian(x, u, A);
  return A;
}

FieldFamily make_translation_family(int dim) {
  std::vector<FieldChannel> chans;
  for (int d = 0; d < dim; ++d)
    chans.push_back({d, std::vector<int>(static_cast<std::size_t>(dim), 0), false});
  return FieldFamily(dim, std::move(chans), 1.0,
                     "translations:dim=" + std::to_string(dim));
}

FieldFamily make_hermite2d_family(double zeta) {
  std::vector<FieldChannel> chans;
  auto exps = [](int e0, int e1) { return std::vector<int>{e0, e1}; };
  // Constants, Gaussian constants, linear fields, Gaussian quadratics.
  chans.push_back({0, exps(0, 0), false});
  chans.push_back({1, exps(0, 0), false});
  chans.push_back({0, exps(0, 0), true});
  chans.push_back({1, exps(0, 0), true});
  chans.push_back({0, exps(1, 0), false});
  chans.push_back({0, exps(0, 1), false});
  chans.push_back({1, exps(1, 0), false});
  chans.push_back({1, exps(0, 1), false});
  chans.push_back({0, exps(2, 0), true});
  chans.push_back({0, exps(1, 1), true});
  chans.push_back({0, exps(0, 2), true});
  chans.push_back({1, exps(2, 0), true});
  chans.push_back({1, exps(1, 1), true});
  chans.push_back({1, exps(0, 2), true});
  char buf[64];
  std::snprintf(buf, sizeof(buf), "hermite2d:zeta=%g", zeta);
  return FieldFamily(2, std::move(chans), zeta, buf);
}

FieldFamily make_hermite_family(int dim, double zeta) {
  std::vector<FieldChannel> chans;
  for (int d = 0; d < dim; ++d)
    chans.push_back({d, std::vector<int>(static_cast<std::size_t>(dim), 0), false});
  for (int d = 0; d < dim; ++d)
    chans.push_back({d, std::vector<int>(static_cast<std::size_t>(dim), 0), true});
  char buf[64];
  std::snprintf(buf, sizeof(buf), "hermiteNd:dim=%d,zeta=%g", dim, zeta);
  return FieldFamily(dim, std::move(chans), zeta, buf);
}

FieldFamily parse_field_family(const std::string& descriptor) {
  const std::size_t colon = descriptor.find(':');
  const std::string name = descriptor.substr(0, colon);
  std::map<std::string, double> kv;
  if (colon != std::string::npos) {
    std::string rest = descriptor.substr(colon + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
      std::size_t comma = rest.find(',', start);
      if (comma == std::string::npos) comma = rest.size();
      const std::string item = rest.substr(start, comma - start);
      const std::size_t eq = item.find('=');
      if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("field descriptor: expected key=value in '" +
                                    descriptor + "'");
      try {
        kv[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw std::invalid_argument("field descriptor: bad value in '" + descriptor + "'");
      }
      start = comma + 1;
    }
  }
  auto get = [&](const char* key, double fallback, bool required) {
    auto it = kv.find(key);
    if (it != kv.end()) return it->second;
    if (required)
      throw std::invalid_argument(std::string("field descriptor: missing ") + key);
    return fallback;
  };
  if (name == "translations")
    return make_translation_family(static_cast<int>(get("dim", 0, true)));
  if (name == "hermite2d") return make_hermite2d_family(get("zeta", 0, true));
  if (name == "hermiteNd")
    return make_hermite_family(static_cast<int>(get("dim", 0, true)),
                               get("zeta", 0, true));
  throw std::invalid_argument("field descriptor: unknown family '" + name + "'");
}

}  // namespace otflow
