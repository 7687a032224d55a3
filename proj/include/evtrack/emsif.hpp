#pragma once

#include <string>

#include <Eigen/Core>

#include "evtrack/geometry.hpp"

namespace evtrack {

enum class ModelKind { kDiskPolar, kConstantVelocity };

/// How the sliding-innovation gain maps a pixel innovation into state space.
///   kPropagated:    K = F (H F)^+ diag(sat) — corrects the previous-frame
///                   state and carries the correction through F, so rates
///                   (omega, velocity) are observable.
///   kPseudoInverse: K = H^+ diag(sat) — the textbook SIF form; H has a zero
///                   column for every rate, so rates are never corrected.
enum class GainForm { kPropagated, kPseudoInverse };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct FilterModel {
  ModelKind kind = ModelKind::kDiskPolar;
  Eigen::MatrixXd F;
  Eigen::MatrixXd Q;
  Eigen::Matrix2d R = Eigen::Matrix2d::Identity();
  Eigen::Vector2d delta = Eigen::Vector2d::Constant(10.0);
  Eigen::VectorXd p0;  // diagonal of the initial covariance
  Vec2 center = Vec2(64.0, 64.0);
  double r_min = 1.0;
  GainForm gain = GainForm::kPropagated;

  int dim() const { return kind == ModelKind::kDiskPolar ? 3 : 4; }
  /// Throws ConfigError unless shapes match and Q >= 0, R > 0, delta > 0.
  void validate() const;

  static FilterModel disk_polar(const Vec2& center = Vec2(64.0, 64.0));
  static FilterModel constant_velocity();
};

/// DiskPolar: s = [theta, omega, r]; ConstantVelocity: s = [x, y, vx, vy].
struct FilterState {
  Eigen::VectorXd s;
  Eigen::MatrixXd P;
  int frame = 0;
  Eigen::Vector2d innovation = Eigen::Vector2d::Zero();
  Eigen::Vector2d saturation = Eigen::Vector2d::Zero();
  bool degenerate = false;       // r was clamped to r_min
  bool ill_conditioned = false;  // pseudo-inverse used the Tikhonov fallback
};

Vec2 h_measure(const FilterModel& model, const Eigen::VectorXd& s);
Eigen::MatrixXd h_jacobian(const FilterModel& model, const Eigen::VectorXd& s);

struct PseudoInverse {
  Eigen::MatrixXd matrix;
  bool ill_conditioned = false;
};

/// Right pseudo-inverse A^T (A A^T)^-1, regularized by 1e-8 I when the
/// smallest eigenvalue of A A^T is <= 1e-10.
PseudoInverse pseudo_inverse(const Eigen::MatrixXd& a);

/// Sliding-innovation gain for prior state `s` and measurement `z`.
struct Correction {
  Eigen::Vector2d innovation = Eigen::Vector2d::Zero();
  Eigen::Vector2d saturation = Eigen::Vector2d::Zero();
  Eigen::MatrixXd H;
  Eigen::MatrixXd K;
  Eigen::VectorXd ds;  // K * innovation
  bool ill_conditioned = false;
};

Correction compute_correction(const FilterModel& model, const Eigen::VectorXd& s, const Vec2& z);

/// Wraps theta (DiskPolar) into [-pi, pi).
void normalize_state(const FilterModel& model, Eigen::VectorXd& s);

FilterState predict(const FilterModel& model, const FilterState& state);
FilterState update(const FilterModel& model, const FilterState& state, const Vec2& z);
/// Joseph-form covariance update for an arbitrary gain.
Eigen::MatrixXd joseph(const Eigen::MatrixXd& P, const Eigen::MatrixXd& K, const Eigen::MatrixXd& H,
                       const Eigen::Matrix2d& R);

/// omega0 = 0 / velocity 0: the filter starts with a wrong rate on purpose.
FilterState init_from_detection(const FilterModel& model, const Vec2& z, int frame = 0);

/// Innovation covariance S = H P H^T + R at the state's current estimate.
Eigen::Matrix2d innovation_covariance(const FilterModel& model, const FilterState& state);

/// Velocity in px/frame: r * omega * (-sin theta, cos theta) or (vx, vy).
Vec2 velocity(const FilterModel& model, const Eigen::VectorXd& s);

}  // namespace evtrack
