#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "evtrack/frame.hpp"
#include "evtrack/geometry.hpp"
#include "evtrack/scene.hpp"

namespace evtrack {

enum class Activation { kIdentity, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;
  Activation activation = Activation::kIdentity;
};

/// Feedforward classifier over P x P luminance patches. The last output is
/// the background class, so it has class_labels.size() + 1 outputs.
struct MlpNetwork {
  std::vector<DenseLayer> layers;
  std::vector<std::string> class_labels;
  double decision_threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  Eigen::Index input_width() const { return layers.front().weights.cols(); }
  int patch_size() const;
};

struct ForwardResult {
  Eigen::VectorXd scores;
  Eigen::VectorXd features;  // penultimate activations
};

struct BatchForwardResult {
  Eigen::MatrixXd scores;    // one column per patch
  Eigen::MatrixXd features;
};

ForwardResult forward(const MlpNetwork& net, const Eigen::VectorXd& patch);
BatchForwardResult forward_batch(const MlpNetwork& net, const Eigen::MatrixXd& patches);

Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

/// Zero mean, unit variance; a constant patch maps to all zeros.
Eigen::VectorXd standardize_patch(const Eigen::VectorXd& patch);

/// P x P window centered on round(center), row-major, zero outside the frame.
Eigen::VectorXd extract_patch(const Frame& frame, const Vec2& center, int patch_size);

struct HiddenLayerSpec {
  int input_width = 24 * 24;
  int width = 128;
  std::uint64_t seed = 7;
};

struct LabeledPatch {
  Eigen::VectorXd patch;  // already standardized
  int class_index = 0;    // index into labels; labels.size() means background
};

struct TrainResult {
  MlpNetwork net;
  double training_accuracy = 0.0;
};

/// Fixed random tanh hidden layer plus a ridge-regression readout solved in
/// closed form against one-hot targets of height `target_logit`.
TrainResult train_readout(const HiddenLayerSpec& hidden, std::span<const LabeledPatch> samples,
                          const std::vector<std::string>& class_labels, double lambda,
                          double target_logit = 4.0, double decision_threshold = 0.5);

struct ValidationVerdict {
  std::string label;  // class label or "unmodeled"
  int class_index = -1;
  double confidence = 0.0;

  bool unmodeled() const { return label == "unmodeled"; }
};

ValidationVerdict validate_detection(const MlpNetwork& net, const Frame& frame,
                                     const Vec2& centroid);

struct AnnTrainingConfig {
  int patch_size = 24;
  int hidden_width = 512;
  int samples_per_class = 1000;
  double lambda = 1.0;
  double target_logit = 4.0;
  double decision_threshold = 0.5;
  double position_jitter = 2.0;  // px
  // Extra background samples: a modeled shape drawn at the wrong size, as a
  // multiple of samples_per_class.
  double rescaled_negatives = 0.5;
  std::uint64_t seed = 7;
};

/// Object-centered patches of every orbiting scene object at random disk
/// angles, plus background crops (empty disk and off-center near misses).
std::vector<LabeledPatch> synthesize_training_set(const DiskScene& scene,
                                                  const AnnTrainingConfig& cfg,
                                                  std::vector<std::string>& class_labels);

TrainResult train_scene_validator(const DiskScene& scene, const AnnTrainingConfig& cfg);

void save_model(const std::filesystem::path& path, const MlpNetwork& net);
MlpNetwork load_model(const std::filesystem::path& path);

}  // namespace evtrack
