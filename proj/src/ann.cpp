#include "evtrack/ann.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "evtrack/error.hpp"

namespace evtrack {

std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name + "'");
}

void MlpNetwork::validate() const {
  if (layers.empty()) throw ConfigError("mlp: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weights.rows())
      throw ConfigError("mlp: layer " + std::to_string(i) + " bias/weight mismatch");
    if (i > 0 && l.weights.cols() != layers[i - 1].weights.rows())
      throw ConfigError("mlp: layer " + std::to_string(i) + " input width mismatch");
  }
  if (layers.back().weights.rows() != static_cast<Eigen::Index>(class_labels.size()) + 1)
    throw ConfigError("mlp: output width must be class count + 1");
  if (!(decision_threshold >= 0.0 && decision_threshold <= 1.0))
    throw ConfigError("mlp: decision threshold outside [0, 1]");
}

int MlpNetwork::patch_size() const {
  const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(input_width()))));
  if (static_cast<Eigen::Index>(side) * side != input_width())
    throw ConfigError("mlp: input width is not a square patch");
  return side;
}

namespace {

void apply(Activation a, Eigen::MatrixXd& m) {
  if (a == Activation::kTanh) m = m.array().tanh().matrix();
}

}  // namespace

BatchForwardResult forward_batch(const MlpNetwork& net, const Eigen::MatrixXd& patches) {
  if (patches.rows() != net.input_width())
    throw ConfigError("forward: patch has " + std::to_string(patches.rows()) +
                      " values, network expects " + std::to_string(net.input_width()));
  BatchForwardResult r;
  Eigen::MatrixXd act = patches;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (act.rows() != l.weights.cols()) throw ConfigError("forward: layer dimension mismatch");
    if (i + 1 == net.layers.size()) r.features = act;
    Eigen::MatrixXd next = l.weights * act;
    next.colwise() += l.bias;
    apply(l.activation, next);
    act = std::move(next);
  }
  r.scores = std::move(act);
  return r;
}

ForwardResult forward(const MlpNetwork& net, const Eigen::VectorXd& patch) {
  auto b = forward_batch(net, patch);
  return {b.scores.col(0), b.features.col(0)};
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  const double m = scores.maxCoeff();
  Eigen::VectorXd e = (scores.array() - m).exp().matrix();
  return e / e.sum();
}

Eigen::VectorXd standardize_patch(const Eigen::VectorXd& patch) {
  const double mean = patch.mean();
  Eigen::VectorXd centered = patch.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(patch.size());
  if (var < 1e-18) return Eigen::VectorXd::Zero(patch.size());
  return centered / std::sqrt(var);
}

Eigen::VectorXd extract_patch(const Frame& frame, const Vec2& center, int patch_size) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(patch_size) * patch_size);
  const int x0 = static_cast<int>(std::lround(center.x())) - patch_size / 2;
  const int y0 = static_cast<int>(std::lround(center.y())) - patch_size / 2;
  for (int j = 0; j < patch_size; ++j)
    for (int i = 0; i < patch_size; ++i)
      if (frame.contains(x0 + i, y0 + j)) p(j * patch_size + i) = frame.at(x0 + i, y0 + j);
  return p;
}

TrainResult train_readout(const HiddenLayerSpec& hidden, std::span<const LabeledPatch> samples,
                          const std::vector<std::string>& class_labels, double lambda,
                          double target_logit, double decision_threshold) {
  if (!(lambda > 0.0)) throw ConfigError("train_readout: ridge lambda must be > 0");
  const int classes = static_cast<int>(class_labels.size()) + 1;
  if (classes < 2) throw ConfigError("train_readout: need at least one object class");
  std::vector<int> per_class(static_cast<std::size_t>(classes), 0);
  for (const auto& s : samples) {
    if (s.class_index < 0 || s.class_index >= classes)
      throw ConfigError("train_readout: class index out of range");
    if (s.patch.size() != hidden.input_width)
      throw ConfigError("train_readout: sample width mismatch");
    ++per_class[static_cast<std::size_t>(s.class_index)];
  }
  for (int c = 0; c < classes; ++c)
    if (per_class[static_cast<std::size_t>(c)] < 10)
      throw ConfigError("train_readout: class " +
                        (c + 1 == classes ? std::string("background")
                                          : class_labels[static_cast<std::size_t>(c)]) +
                        " has fewer than 10 samples");

  MlpNetwork net;
  net.class_labels = class_labels;
  net.decision_threshold = decision_threshold;
  net.seed = hidden.seed;

  DenseLayer h;
  h.activation = Activation::kTanh;
  h.weights.resize(hidden.width, hidden.input_width);
  h.bias.resize(hidden.width);
  std::mt19937_64 rng(hidden.seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(hidden.input_width)));
  for (Eigen::Index r = 0; r < h.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < h.weights.cols(); ++c) h.weights(r, c) = gauss(rng);
  for (Eigen::Index r = 0; r < h.bias.size(); ++r) h.bias(r) = gauss(rng);
  net.layers.push_back(h);

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(hidden.input_width, n);
  for (Eigen::Index i = 0; i < n; ++i) x.col(i) = samples[static_cast<std::size_t>(i)].patch;
  Eigen::MatrixXd act = h.weights * x;
  act.colwise() += h.bias;
  act = act.array().tanh().matrix();

  // Design matrix with a trailing bias column.
  Eigen::MatrixXd design(n, hidden.width + 1);
  design.leftCols(hidden.width) = act.transpose();
  design.col(hidden.width).setOnes();
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i)
    targets(i, samples[static_cast<std::size_t>(i)].class_index) = target_logit;

  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal().array() += lambda;
  const Eigen::MatrixXd beta = gram.ldlt().solve(design.transpose() * targets);
  if (!beta.allFinite()) throw ConfigError("train_readout: singular ridge system");

  DenseLayer out;
  out.activation = Activation::kIdentity;
  out.weights = beta.topRows(hidden.width).transpose();
  out.bias = beta.row(hidden.width).transpose();
  net.layers.push_back(out);

  const Eigen::MatrixXd scores = design * beta;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg = 0;
    scores.row(i).maxCoeff(&arg);
    if (arg == samples[static_cast<std::size_t>(i)].class_index) ++correct;
  }
  TrainResult r{std::move(net), n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0};
  r.net.validate();
  return r;
}

ValidationVerdict validate_detection(const MlpNetwork& net, const Frame& frame,
                                     const Vec2& centroid) {
  const Eigen::VectorXd patch = standardize_patch(extract_patch(frame, centroid, net.patch_size()));
  const Eigen::VectorXd p = softmax(forward(net, patch).scores);
  Eigen::Index arg = 0;
  const double conf = p.maxCoeff(&arg);
  ValidationVerdict v;
  v.confidence = conf;
  const auto background = static_cast<Eigen::Index>(net.class_labels.size());
  if (arg == background || conf < net.decision_threshold) {
    v.label = "unmodeled";
  } else {
    v.label = net.class_labels[static_cast<std::size_t>(arg)];
    v.class_index = static_cast<int>(arg);
  }
  return v;
}

namespace {

Eigen::VectorXd render_patch(const DiskScene& scene, std::span<const kernels::RasterShape> shapes,
                             const Vec2& center, int patch_size, double noise_sigma,
                             std::mt19937_64& rng) {
  const int x0 = static_cast<int>(std::lround(center.x())) - patch_size / 2;
  const int y0 = static_cast<int>(std::lround(center.y())) - patch_size / 2;
  std::vector<kernels::RasterShape> local(shapes.begin(), shapes.end());
  for (auto& s : local) {
    s.cx -= x0;
    s.cy -= y0;
  }
  std::vector<double> pix(static_cast<std::size_t>(patch_size) * patch_size);
  kernels::serial::rasterize(local, patch_size, patch_size, scene.background_intensity,
                             scene.supersample, pix);
  Eigen::VectorXd p = Eigen::Map<Eigen::VectorXd>(pix.data(), static_cast<Eigen::Index>(pix.size()));
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::clamp(p(i) + noise(rng), 0.0, 1.0);
  }
  return standardize_patch(p);
}

}  // namespace

std::vector<LabeledPatch> synthesize_training_set(const DiskScene& scene,
                                                  const AnnTrainingConfig& cfg,
                                                  std::vector<std::string>& class_labels) {
  std::vector<const SceneObject*> modeled;
  class_labels.clear();
  for (const auto& o : scene.objects) {
    if (!o.orbiting()) continue;
    modeled.push_back(&o);
    class_labels.push_back(to_string(o.shape));
  }
  std::mt19937_64 rng(cfg.seed ^ 0xA5A5A5A5ULL);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> jitter(-cfg.position_jitter, cfg.position_jitter);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double noise = std::max(scene.pixel_noise_sigma, 0.01);

  auto disk_shapes = [&](double rotation) {
    std::vector<kernels::RasterShape> shapes;
    for (const auto* o : modeled) {
      const double th = o->initial_angle + rotation;
      const Vec2 p = scene.center + o->orbit_radius * Vec2(std::cos(th), std::sin(th));
      shapes.push_back({o->shape, p.x(), p.y(), o->size, th, scene.object_intensity});
    }
    return shapes;
  };

  std::vector<LabeledPatch> out;
  for (std::size_t c = 0; c < modeled.size(); ++c) {
    for (int i = 0; i < cfg.samples_per_class; ++i) {
      const auto shapes = disk_shapes(angle(rng));
      const Vec2 center(shapes[c].cx + jitter(rng), shapes[c].cy + jitter(rng));
      out.push_back({render_patch(scene, shapes, center, cfg.patch_size,
                                  (i % 2) ? noise : 0.0, rng),
                     static_cast<int>(c)});
    }
  }
  const int background = static_cast<int>(modeled.size());
  for (int i = 0; i < cfg.samples_per_class; ++i) {
    const auto shapes = disk_shapes(angle(rng));
    Vec2 center;
    if (i % 2 == 0 && !shapes.empty()) {
      // Near miss: the object sits at the patch border.
      const auto& s = shapes[static_cast<std::size_t>(i / 2) % shapes.size()];
      const double a = angle(rng);
      const double d = bounding_radius(s.kind, s.size) + 4.0 + 8.0 * unit(rng);
      center = Vec2(s.cx + d * std::cos(a), s.cy + d * std::sin(a));
    } else {
      center = Vec2(unit(rng) * (scene.width - 1), unit(rng) * (scene.height - 1));
    }
    out.push_back({render_patch(scene, shapes, center, cfg.patch_size, (i % 4 == 1) ? noise : 0.0, rng),
                   background});
  }
  const int rescaled = static_cast<int>(std::lround(cfg.rescaled_negatives * cfg.samples_per_class));
  std::uniform_real_distribution<double> shrink(0.5, 0.7), grow(1.4, 1.8);
  for (int i = 0; i < rescaled && !modeled.empty(); ++i) {
    auto shapes = disk_shapes(angle(rng));
    auto& s = shapes[static_cast<std::size_t>(i) % shapes.size()];
    s.size *= (i / static_cast<int>(shapes.size())) % 2 ? grow(rng) : shrink(rng);
    const Vec2 center(s.cx + jitter(rng), s.cy + jitter(rng));
    out.push_back({render_patch(scene, shapes, center, cfg.patch_size, (i % 2) ? noise : 0.0, rng),
                   background});
  }
  return out;
}

TrainResult train_scene_validator(const DiskScene& scene, const AnnTrainingConfig& cfg) {
  std::vector<std::string> labels;
  const auto samples = synthesize_training_set(scene, cfg, labels);
  HiddenLayerSpec hidden{cfg.patch_size * cfg.patch_size, cfg.hidden_width, cfg.seed};
  return train_readout(hidden, samples, labels, cfg.lambda, cfg.target_logit,
                       cfg.decision_threshold);
}

void save_model(const std::filesystem::path& path, const MlpNetwork& net) {
  using nlohmann::json;
  json j;
  j["layers"] = json::array();
  for (const auto& l : net.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    j["layers"].push_back({{"rows", l.weights.rows()},
                           {"cols", l.weights.cols()},
                           {"weights", w},
                           {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())},
                           {"activation", to_string(l.activation)}});
  }
  j["class_labels"] = net.class_labels;
  j["threshold"] = net.decision_threshold;
  j["seed"] = net.seed;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path.string());
  out << j.dump(1) << '\n';
}

MlpNetwork load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    MlpNetwork net;
    for (const auto& lj : j.at("layers")) {
      DenseLayer l;
      const auto rows = lj.at("rows").get<Eigen::Index>();
      const auto cols = lj.at("cols").get<Eigen::Index>();
      const auto w = lj.at("weights").get<std::vector<double>>();
      const auto b = lj.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
        throw ConfigError("model: layer sizes do not match rows/cols");
      l.weights.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
      l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
      l.activation = activation_from_string(lj.at("activation").get<std::string>());
      net.layers.push_back(std::move(l));
    }
    net.class_labels = j.at("class_labels").get<std::vector<std::string>>();
    net.decision_threshold = j.at("threshold").get<double>();
    net.seed = j.value("seed", std::uint64_t{0});
    net.validate();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model: ") + e.what(), path.string());
  }
}

}  // namespace evtrack
