#pragma once

// Small convolutional feature extractor: three (3x3 conv, ReLU, 2x2 max-pool)
// stages, a ReLU fully connected layer and a softmax output layer. The
// flattened output of the last pooling stage is the per-patch feature.
//
// Activations are stored as C x (H*W) matrices, pixel index y*W + x.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "enreg/errors.hpp"
#include "enreg/io.hpp"
#include "enreg/rng.hpp"
#include "enreg/types.hpp"

namespace enreg {

struct CnnArchitecture {
  int input_size = 32;
  int in_channels = 3;
  std::array<int, 3> channels{32, 64, 64};
  int fc_hidden = 64;
  int n_classes = 2;

  int feature_length() const { return channels[2] * (input_size / 8) * (input_size / 8); }

  void validate() const {
    if (input_size < 8 || input_size % 8 != 0) throw ConfigError("CNN input size must be a positive multiple of 8");
    if (in_channels < 1 || fc_hidden < 1 || n_classes < 1) throw ConfigError("CNN layer sizes must be positive");
    for (int c : channels)
      if (c < 1) throw ConfigError("CNN channel counts must be positive");
  }
};

struct ConvLayer {
  Eigen::MatrixXd weight;  // out x (in * 9), column index ci*9 + ky*3 + kx
  Eigen::VectorXd bias;
};

struct CnnNetwork {
  CnnArchitecture arch;
  std::array<ConvLayer, 3> conv;
  Eigen::MatrixXd fc_weight;  // hidden x feature_length
  Eigen::VectorXd fc_bias;
  Eigen::MatrixXd out_weight;  // classes x hidden
  Eigen::VectorXd out_bias;

  static CnnNetwork zeros(const CnnArchitecture& arch) {
    arch.validate();
    CnnNetwork net;
    net.arch = arch;
    int in = arch.in_channels;
    for (std::size_t s = 0; s < 3; ++s) {
      net.conv[s].weight = Eigen::MatrixXd::Zero(arch.channels[s], in * 9);
      net.conv[s].bias = Eigen::VectorXd::Zero(arch.channels[s]);
      in = arch.channels[s];
    }
    net.fc_weight = Eigen::MatrixXd::Zero(arch.fc_hidden, arch.feature_length());
    net.fc_bias = Eigen::VectorXd::Zero(arch.fc_hidden);
    net.out_weight = Eigen::MatrixXd::Zero(arch.n_classes, arch.fc_hidden);
    net.out_bias = Eigen::VectorXd::Zero(arch.n_classes);
    return net;
  }

  /// He-normal weights, zero biases.
  static CnnNetwork initialize(const CnnArchitecture& arch, std::uint64_t seed) {
    CnnNetwork net = zeros(arch);
    Xoshiro256 rng(seed);
    auto fill = [&rng](Eigen::MatrixXd& w) {
      const double sd = std::sqrt(2.0 / static_cast<double>(w.cols()));
      for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal(0.0, sd);
    };
    for (auto& layer : net.conv) fill(layer.weight);
    fill(net.fc_weight);
    fill(net.out_weight);
    return net;
  }

  /// Calls f(name, tensor) for every parameter tensor in a fixed order.
  template <class F>
  void visit(F&& f) {
    for (std::size_t s = 0; s < 3; ++s) {
      f("conv" + std::to_string(s + 1) + ".weight", conv[s].weight);
      f("conv" + std::to_string(s + 1) + ".bias", conv[s].bias);
    }
    f(std::string("fc.weight"), fc_weight);
    f(std::string("fc.bias"), fc_bias);
    f(std::string("out.weight"), out_weight);
    f(std::string("out.bias"), out_bias);
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<CnnNetwork*>(this)->visit([&f](const std::string& name, const auto& t) { f(name, t); });
  }

  Index parameter_count() const {
    Index n = 0;
    visit([&n](const std::string&, const auto& t) { n += t.size(); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&ok](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }
};

struct StageShape {
  int channels, height, width;
  bool operator==(const StageShape&) const = default;
};

struct CnnOutput {
  Eigen::VectorXd feature;
  Eigen::VectorXd class_probs;
  std::vector<StageShape> trace;  // conv1, pool1, conv2, pool2, conv3, pool3
};

namespace detail {

inline Eigen::MatrixXd im2col(const Eigen::MatrixXd& in, int size) {
  const Index channels = in.rows();
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(channels * 9, static_cast<Index>(size) * size);
  for (Index c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const Index row = c * 9 + ky * 3 + kx;
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= size) continue;
          for (int x = 0; x < size; ++x) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= size) continue;
            cols(row, y * size + x) = in(c, sy * size + sx);
          }
        }
      }
  return cols;
}

inline Eigen::MatrixXd col2im(const Eigen::MatrixXd& cols, Index channels, int size) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(channels, static_cast<Index>(size) * size);
  for (Index c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const Index row = c * 9 + ky * 3 + kx;
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= size) continue;
          for (int x = 0; x < size; ++x) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= size) continue;
            out(c, sy * size + sx) += cols(row, y * size + x);
          }
        }
      }
  return out;
}

// 2x2 max-pool; ties keep the first element in row-major window order.
inline Eigen::MatrixXd max_pool(const Eigen::MatrixXd& in, int size, std::vector<Index>& argmax) {
  const int half = size / 2;
  Eigen::MatrixXd out(in.rows(), static_cast<Index>(half) * half);
  argmax.assign(static_cast<std::size_t>(out.size()), 0);
  for (Index c = 0; c < in.rows(); ++c)
    for (int y = 0; y < half; ++y)
      for (int x = 0; x < half; ++x) {
        Index best = (2 * y) * size + 2 * x;
        for (Index cand : {best + 1, best + size, best + size + 1})
          if (in(c, cand) > in(c, best)) best = cand;
        out(c, y * half + x) = in(c, best);
        argmax[static_cast<std::size_t>(c + out.rows() * (y * half + x))] = best;
      }
  return out;
}

struct ForwardCache {
  std::array<Eigen::MatrixXd, 3> cols;
  std::array<Eigen::MatrixXd, 3> activation;  // post-ReLU, pre-pool
  std::array<std::vector<Index>, 3> argmax;
  Eigen::VectorXd feature, hidden, logits, probs;
};

inline void check_input(const CnnNetwork& net, const Eigen::MatrixXd& image) {
  const auto& a = net.arch;
  if (image.rows() != a.in_channels || image.cols() != static_cast<Index>(a.input_size) * a.input_size)
    throw DimensionError("CNN input must be " + std::to_string(a.in_channels) + " x " + std::to_string(a.input_size) +
                         "^2, got " + std::to_string(image.rows()) + " x " + std::to_string(image.cols()));
  if (!image.allFinite()) throw NumericalError("CNN input contains non-finite values");
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

inline void forward(const CnnNetwork& net, const Eigen::MatrixXd& image, ForwardCache& cache,
                    std::vector<StageShape>* trace) {
  check_input(net, image);
  if (!net.all_finite()) throw NumericalError("CNN parameters contain non-finite values");
  int size = net.arch.input_size;
  Eigen::MatrixXd x = image;
  for (std::size_t s = 0; s < 3; ++s) {
    cache.cols[s] = im2col(x, size);
    cache.activation[s] = ((net.conv[s].weight * cache.cols[s]).colwise() + net.conv[s].bias).cwiseMax(0.0);
    if (trace) trace->push_back({static_cast<int>(cache.activation[s].rows()), size, size});
    x = max_pool(cache.activation[s], size, cache.argmax[s]);
    size /= 2;
    if (trace) trace->push_back({static_cast<int>(x.rows()), size, size});
  }
  // flatten channel-major: feature(c * H*W + pixel)
  const Eigen::MatrixXd xt = x.transpose();
  cache.feature = Eigen::Map<const Eigen::VectorXd>(xt.data(), xt.size());
  cache.hidden = ((net.fc_weight * cache.feature) + net.fc_bias).cwiseMax(0.0);
  cache.logits = net.out_weight * cache.hidden + net.out_bias;
  cache.probs = softmax(cache.logits);
}

}  // namespace detail

/// Expected stage trace for an architecture; every forward pass is checked against it.
inline std::vector<StageShape> expected_trace(const CnnArchitecture& a) {
  std::vector<StageShape> t;
  int size = a.input_size;
  for (int c : a.channels) {
    t.push_back({c, size, size});
    size /= 2;
    t.push_back({c, size, size});
  }
  return t;
}

inline CnnOutput cnn_forward(const CnnNetwork& net, const Eigen::MatrixXd& image) {
  detail::ForwardCache cache;
  CnnOutput out;
  detail::forward(net, image, cache, &out.trace);
  if (out.trace != expected_trace(net.arch) || cache.feature.size() != net.arch.feature_length())
    throw ContractError("CNN forward pass produced unexpected stage shapes");
  out.feature = std::move(cache.feature);
  out.class_probs = std::move(cache.probs);
  return out;
}

struct LossAndGradient {
  double loss = 0.0;
  CnnNetwork gradient;
};

/// Mean cross-entropy over the batch and its gradient by backpropagation.
inline LossAndGradient cnn_loss_grad(const CnnNetwork& net, const std::vector<Eigen::MatrixXd>& images,
                                     std::span<const int> labels) {
  if (images.empty()) throw EmptyInputError("CNN batch is empty");
  if (images.size() != labels.size())
    throw LengthError(images.size(), labels.size());
  LossAndGradient out{0.0, CnnNetwork::zeros(net.arch)};
  auto& g = out.gradient;
  const double scale = 1.0 / static_cast<double>(images.size());
  detail::ForwardCache cache;
  for (std::size_t b = 0; b < images.size(); ++b) {
    const int label = labels[b];
    if (label < 0 || label >= net.arch.n_classes) throw DataError("CNN label out of range: " + std::to_string(label));
    detail::forward(net, images[b], cache, nullptr);

    const double shift = cache.logits.maxCoeff();
    const double log_norm = shift + std::log((cache.logits.array() - shift).exp().sum());
    out.loss += (log_norm - cache.logits(label)) * scale;

    Eigen::VectorXd d_logits = cache.probs;
    d_logits(label) -= 1.0;
    d_logits *= scale;
    g.out_weight.noalias() += d_logits * cache.hidden.transpose();
    g.out_bias += d_logits;
    Eigen::VectorXd d_hidden = net.out_weight.transpose() * d_logits;
    d_hidden = (cache.hidden.array() > 0.0).select(d_hidden, 0.0);
    g.fc_weight.noalias() += d_hidden * cache.feature.transpose();
    g.fc_bias += d_hidden;
    const Eigen::VectorXd d_feature = net.fc_weight.transpose() * d_hidden;

    int size = net.arch.input_size / 8;
    const Index c3 = net.arch.channels[2];
    // undo the channel-major flatten
    Eigen::MatrixXd d_pooled =
        Eigen::Map<const Eigen::MatrixXd>(d_feature.data(), static_cast<Index>(size) * size, c3).transpose();
    for (int s = 2; s >= 0; --s) {
      const auto su = static_cast<std::size_t>(s);
      const Eigen::MatrixXd& act = cache.activation[su];
      Eigen::MatrixXd d_act = Eigen::MatrixXd::Zero(act.rows(), act.cols());
      for (Index c = 0; c < d_pooled.rows(); ++c)
        for (Index p = 0; p < d_pooled.cols(); ++p)
          d_act(c, cache.argmax[su][static_cast<std::size_t>(c + d_pooled.rows() * p)]) += d_pooled(c, p);
      d_act = (act.array() > 0.0).select(d_act, 0.0);
      g.conv[su].weight.noalias() += d_act * cache.cols[su].transpose();
      g.conv[su].bias += d_act.rowwise().sum();
      size *= 2;
      if (s > 0) {
        const Eigen::MatrixXd d_cols = net.conv[su].weight.transpose() * d_act;
        d_pooled = detail::col2im(d_cols, net.conv[su].weight.cols() / 9, size);
      }
    }
  }
  return out;
}

/// dst += a * src, tensor by tensor.
inline void add_scaled(CnnNetwork& dst, double a, const CnnNetwork& src) {
  for (std::size_t s = 0; s < 3; ++s) {
    dst.conv[s].weight += a * src.conv[s].weight;
    dst.conv[s].bias += a * src.conv[s].bias;
  }
  dst.fc_weight += a * src.fc_weight;
  dst.fc_bias += a * src.fc_bias;
  dst.out_weight += a * src.out_weight;
  dst.out_bias += a * src.out_bias;
}

struct SgdOptions {
  int epochs = 20;
  double learning_rate = 0.01;
  int batch_size = 16;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  }
};

struct CnnTrainingResult {
  CnnNetwork net;
  std::vector<double> epoch_loss;  // mean minibatch loss per completed epoch
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
};

inline double cnn_mean_loss(const CnnNetwork& net, const std::vector<Eigen::MatrixXd>& images,
                            std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto out = cnn_forward(net, images[i]);
    loss -= std::log(std::max(out.class_probs(labels[i]), std::numeric_limits<double>::min()));
  }
  return loss / static_cast<double>(images.size());
}

/// Plain minibatch SGD with a seeded shuffle per epoch. A non-finite loss or
/// update stops training and returns the parameters from before that step.
inline CnnTrainingResult cnn_train_sgd(CnnNetwork net, const std::vector<Eigen::MatrixXd>& images,
                                       std::span<const int> labels, const SgdOptions& opt) {
  opt.validate();
  if (images.empty()) throw EmptyInputError("CNN training set is empty");
  if (images.size() != labels.size()) throw LengthError(images.size(), labels.size());
  Xoshiro256 rng(opt.seed);
  CnnTrainingResult result{std::move(net), {}, 0.0, false};
  std::vector<std::size_t> order(images.size());
  std::vector<Eigen::MatrixXd> batch;
  std::vector<int> batch_labels;
  for (int epoch = 0; epoch < opt.epochs && !result.diverged; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      batch.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(images[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      const auto lg = cnn_loss_grad(result.net, batch, batch_labels);
      CnnNetwork next = result.net;
      add_scaled(next, -opt.learning_rate, lg.gradient);
      if (!std::isfinite(lg.loss) || !next.all_finite()) {
        result.diverged = true;
        break;
      }
      result.net = std::move(next);
      sum += lg.loss;
      ++batches;
    }
    if (!result.diverged) result.epoch_loss.push_back(sum / batches);
  }
  result.final_loss = cnn_mean_loss(result.net, images, labels);
  return result;
}

inline std::vector<int> cnn_predict(const CnnNetwork& net, const std::vector<Eigen::MatrixXd>& images) {
  std::vector<int> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    const auto probs = cnn_forward(net, img).class_probs;
    Index arg = 0;
    for (Index c = 1; c < probs.size(); ++c)
      if (probs(c) > probs(arg)) arg = c;
    out.push_back(static_cast<int>(arg));
  }
  return out;
}

inline TextBlocks cnn_to_blocks(const CnnNetwork& net) {
  TextBlocks b;
  const auto& a = net.arch;
  b.add_attribute("architecture", "input=" + std::to_string(a.input_size) + " in_channels=" +
                                      std::to_string(a.in_channels) + " channels=" + std::to_string(a.channels[0]) +
                                      "," + std::to_string(a.channels[1]) + "," + std::to_string(a.channels[2]) +
                                      " hidden=" + std::to_string(a.fc_hidden) + " classes=" + std::to_string(a.n_classes));
  net.visit([&b](const std::string& name, const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd>) b.add_matrix(name, t);
    else b.add_vector(name, t);
  });
  return b;
}

inline CnnNetwork cnn_from_blocks(const TextBlocks& b) {
  CnnArchitecture a;
  std::string desc = b.get("architecture").attribute;
  std::replace(desc.begin(), desc.end(), ',', ' ');
  std::istringstream in(desc);
  std::string tok;
  auto value = [&](const std::string& key) {
    if (!(in >> tok) || tok.rfind(key + "=", 0) != 0) throw FormatError("bad CNN architecture line, expected " + key);
    return std::stoi(tok.substr(key.size() + 1));
  };
  a.input_size = value("input");
  a.in_channels = value("in_channels");
  a.channels[0] = value("channels");
  if (!(in >> a.channels[1] >> a.channels[2])) throw FormatError("bad CNN channel list");
  a.fc_hidden = value("hidden");
  a.n_classes = value("classes");
  CnnNetwork net = CnnNetwork::zeros(a);
  net.visit([&b](const std::string& name, auto& t) {
    const auto& block = b.get(name);
    if (block.data.rows() * block.data.cols() != t.size() ||
        (std::is_same_v<std::decay_t<decltype(t)>, Eigen::MatrixXd> && block.data.rows() != t.rows()))
      throw FormatError("CNN tensor '" + name + "' has the wrong shape");
    t = Eigen::Map<const std::decay_t<decltype(t)>>(block.data.data(), t.rows(), t.cols());
  });
  return net;
}

}  // namespace enreg
