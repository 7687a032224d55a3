#include "evtrack/emsif.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "evtrack/error.hpp"

namespace evtrack {

const char* to_string(ModelKind kind) {
  return kind == ModelKind::kDiskPolar ? "disk_polar" : "constant_velocity";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "disk_polar") return ModelKind::kDiskPolar;
  if (name == "constant_velocity") return ModelKind::kConstantVelocity;
  throw ConfigError("unknown filter model '" + name + "'");
}

namespace {

bool symmetric_psd(const Eigen::MatrixXd& m, bool strict) {
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
  return strict ? ev.minCoeff() > 0.0 : ev.minCoeff() >= -1e-12;
}

}  // namespace

void FilterModel::validate() const {
  const int n = dim();
  if (F.rows() != n || F.cols() != n) throw ConfigError("filter: F must be n x n");
  if (Q.rows() != n || Q.cols() != n) throw ConfigError("filter: Q must be n x n");
  if (p0.size() != n) throw ConfigError("filter: p0_diag must have n entries");
  if (!symmetric_psd(Q, false)) throw ConfigError("filter: Q must be symmetric PSD");
  if (!symmetric_psd(R, true)) throw ConfigError("filter: R must be symmetric positive definite");
  if (!(delta.array() > 0.0).all() || !delta.allFinite())
    throw ConfigError("filter: delta must be > 0");
  if (!(p0.array() >= 0.0).all() || !p0.allFinite()) throw ConfigError("filter: p0_diag must be >= 0");
  if (!(r_min > 0.0)) throw ConfigError("filter: r_min must be > 0");
  if (!center.allFinite()) throw ConfigError("filter: center must be finite");
}

FilterModel FilterModel::disk_polar(const Vec2& center) {
  FilterModel m;
  m.kind = ModelKind::kDiskPolar;
  m.F = Eigen::Matrix3d::Identity();
  m.F(0, 1) = 1.0;
  m.Q = Eigen::Vector3d(1e-5, 1e-6, 1e-3).asDiagonal();
  m.p0 = Eigen::Vector3d(0.1, 0.01, 25.0);
  m.center = center;
  return m;
}

FilterModel FilterModel::constant_velocity() {
  FilterModel m;
  m.kind = ModelKind::kConstantVelocity;
  m.F = Eigen::Matrix4d::Identity();
  m.F(0, 2) = 1.0;
  m.F(1, 3) = 1.0;
  m.Q = 1e-3 * Eigen::Matrix4d::Identity();
  m.p0 = Eigen::Vector4d(25.0, 25.0, 1.0, 1.0);
  return m;
}

Vec2 h_measure(const FilterModel& model, const Eigen::VectorXd& s) {
  if (model.kind == ModelKind::kDiskPolar)
    return model.center + s(2) * Vec2(std::cos(s(0)), std::sin(s(0)));
  return Vec2(s(0), s(1));
}

Eigen::MatrixXd h_jacobian(const FilterModel& model, const Eigen::VectorXd& s) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, model.dim());
  if (model.kind == ModelKind::kDiskPolar) {
    const double c = std::cos(s(0)), sn = std::sin(s(0));
    H << -s(2) * sn, 0.0, c,
          s(2) * c,  0.0, sn;
  } else {
    H(0, 0) = 1.0;
    H(1, 1) = 1.0;
  }
  return H;
}

PseudoInverse pseudo_inverse(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd gram = a * a.transpose();
  const double smallest =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues()(0);
  PseudoInverse out;
  if (smallest > 1e-10) {
    out.matrix = a.transpose() * gram.inverse();
  } else {
    const Eigen::MatrixXd reg = gram + 1e-8 * Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
    out.matrix = a.transpose() * reg.inverse();
    out.ill_conditioned = true;
  }
  return out;
}

void normalize_state(const FilterModel& model, Eigen::VectorXd& s) {
  if (model.kind == ModelKind::kDiskPolar) s(0) = wrap_angle(s(0));
}

Correction compute_correction(const FilterModel& model, const Eigen::VectorXd& s, const Vec2& z) {
  Correction c;
  c.innovation = z - h_measure(model, s);
  c.H = h_jacobian(model, s);
  for (int i = 0; i < 2; ++i) c.saturation(i) = std::min(1.0, std::abs(c.innovation(i)) / model.delta(i));
  PseudoInverse pinv;
  if (model.gain == GainForm::kPropagated) {
    pinv = pseudo_inverse(c.H * model.F);
    pinv.matrix = model.F * pinv.matrix;
  } else {
    pinv = pseudo_inverse(c.H);
  }
  c.ill_conditioned = pinv.ill_conditioned;
  c.K = pinv.matrix * c.saturation.asDiagonal();
  c.ds = c.K * c.innovation;
  return c;
}

Eigen::MatrixXd joseph(const Eigen::MatrixXd& P, const Eigen::MatrixXd& K, const Eigen::MatrixXd& H,
                       const Eigen::Matrix2d& R) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(P.rows(), P.cols()) - K * H;
  Eigen::MatrixXd out = A * P * A.transpose() + K * R * K.transpose();
  return 0.5 * (out + out.transpose());
}

FilterState predict(const FilterModel& model, const FilterState& state) {
  FilterState out = state;
  out.s = model.F * state.s;
  normalize_state(model, out.s);
  out.P = model.F * state.P * model.F.transpose() + model.Q;
  out.P = 0.5 * (out.P + out.P.transpose());
  out.frame = state.frame + 1;
  return out;
}

FilterState update(const FilterModel& model, const FilterState& state, const Vec2& z) {
  const Correction c = compute_correction(model, state.s, z);
  FilterState out = state;
  out.s = state.s + c.ds;
  normalize_state(model, out.s);
  out.degenerate = false;
  if (model.kind == ModelKind::kDiskPolar && out.s(2) < model.r_min) {
    out.s(2) = model.r_min;
    out.degenerate = true;
  }
  out.P = joseph(state.P, c.K, c.H, model.R);
  out.innovation = c.innovation;
  out.saturation = c.saturation;
  out.ill_conditioned = c.ill_conditioned;
  return out;
}

FilterState init_from_detection(const FilterModel& model, const Vec2& z, int frame) {
  FilterState st;
  st.frame = frame;
  st.P = model.p0.asDiagonal();
  if (model.kind == ModelKind::kDiskPolar) {
    const Vec2 d = z - model.center;
    if (d.norm() < model.r_min)
      throw ConfigError("init_from_detection: detection at the disk center, radius undefined");
    st.s = Eigen::Vector3d(std::atan2(d.y(), d.x()), 0.0, d.norm());
  } else {
    st.s = Eigen::Vector4d(z.x(), z.y(), 0.0, 0.0);
  }
  return st;
}

Eigen::Matrix2d innovation_covariance(const FilterModel& model, const FilterState& state) {
  const Eigen::MatrixXd H = h_jacobian(model, state.s);
  return H * state.P * H.transpose() + model.R;
}

Vec2 velocity(const FilterModel& model, const Eigen::VectorXd& s) {
  if (model.kind == ModelKind::kDiskPolar)
    return s(2) * s(1) * Vec2(-std::sin(s(0)), std::cos(s(0)));
  return Vec2(s(2), s(3));
}

}  // namespace evtrack
