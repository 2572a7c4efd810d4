#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dcsr/noise.hpp"

namespace dcsr {

enum class Activation { SiLU, Tanh };

/// Architecture of the time-conditioned score network.
///
/// A stack of periodic dilated 1D convolutions with residual connections. Every
/// hidden layer receives a per-channel bias computed from a Gaussian random
/// Fourier embedding of t. Conditional networks take the upsampled
/// low-resolution field as a second input channel. Input and output are
/// rescaled by the noise level, with a skip path from the input, so the trunk
/// works at unit scale for every t.
struct NetArch {
  std::size_t resolution = 100;
  /// 0 for unconditional networks; otherwise the upsampling factor applied to
  /// the conditioning field before it is stacked as an input channel.
  std::size_t cond_factor = 0;
  std::size_t embed_dim = 128;
  std::size_t channels = 32;
  std::size_t kernel = 5;
  std::vector<std::size_t> dilations{1, 2, 4};
  double fourier_scale = 16.0;
  /// Typical data magnitude used to precondition the network input and output.
  double data_scale = 1.0;
  Activation activation = Activation::SiLU;
  std::uint64_t init_seed = 0;

  bool conditional() const { return cond_factor > 0; }
  std::size_t in_channels() const { return conditional() ? 2 : 1; }
  std::size_t cond_resolution() const { return conditional() ? resolution / cond_factor : 0; }

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  bool operator==(const NetArch&) const = default;
};

void to_json(nlohmann::json& j, const NetArch& a);
void from_json(const nlohmann::json& j, NetArch& a);

/// Trainable network; the score is forward(x, t) / sigma(t).
class ScoreNet {
 public:
  struct Cache {
    std::size_t batch = 0;
    double out_scale = 1.0;
    Eigen::VectorXd features;  // Fourier features of t
    Eigen::VectorXd embed_pre;
    Eigen::VectorXd embed;
    std::vector<Eigen::MatrixXd> cols;  // im2col input of every conv (hidden layers + output)
    std::vector<Eigen::MatrixXd> pre;   // hidden pre-activations
  };

  /// Random initialization from arch.init_seed; Fourier frequencies are drawn
  /// here and never trained.
  ScoreNet(NetArch arch, NoiseSchedule sched);
  ScoreNet(NetArch arch, NoiseSchedule sched, Eigen::VectorXd params, Eigen::VectorXd frequencies);

  const NetArch& arch() const { return arch_; }
  const NoiseSchedule& schedule() const { return sched_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& frequencies() const { return freqs_; }

  /// x: n x B, one sample per column. cond: n x B upsampled condition, required
  /// iff the network is conditional. Returns the raw output sigma(t) * S(x, t), n x B.
  /// Throws std::domain_error for t outside (0, 1].
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd* cond, double t,
                          Cache* cache = nullptr) const;

  /// Adds dL/dparams to `grad` given dL/d(output).
  void backward(const Cache& cache, const Eigen::MatrixXd& dout, Eigen::VectorXd& grad) const;

 private:
  struct ConvSlot {
    std::size_t weight = 0;  // C_out x (kernel * C_in), column-major
    std::size_t bias = 0;
    std::size_t embed = 0;   // C_out x E (hidden layers only)
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t dilation = 1;
  };

  void build_layout();
  void init_parameters();
  Eigen::Map<const Eigen::MatrixXd> mat(std::size_t off, std::size_t rows, std::size_t cols) const;

  NetArch arch_;
  NoiseSchedule sched_;
  Eigen::VectorXd params_;
  Eigen::VectorXd freqs_;
  std::size_t embed_w_ = 0, embed_b_ = 0;
  std::vector<ConvSlot> hidden_;
  ConvSlot out_;
};

}  // namespace dcsr
