#include "dcsr/network.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dcsr/error.hpp"
#include "dcsr/rng.hpp"

namespace dcsr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void NetArch::validate() const {
  if (resolution < 4) throw ConfigError("network resolution must be >= 4");
  if (embed_dim < 2 || embed_dim % 2 != 0) throw ConfigError("embed_dim must be even and >= 2");
  if (channels == 0) throw ConfigError("channels must be positive");
  if (!(data_scale > 0.0)) throw ConfigError("data_scale must be positive");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("kernel must be odd");
  if (dilations.empty()) throw ConfigError("at least one hidden layer is required");
  for (auto d : dilations)
    if (d == 0) throw ConfigError("dilations must be positive");
  if (conditional() && (cond_factor < 2 || resolution % cond_factor != 0))
    throw ConfigError("cond_factor must be >= 2 and divide the resolution");
}

void to_json(nlohmann::json& j, const NetArch& a) {
  j = nlohmann::json{{"resolution", a.resolution},
                     {"cond_factor", a.cond_factor},
                     {"embed_dim", a.embed_dim},
                     {"channels", a.channels},
                     {"kernel", a.kernel},
                     {"dilations", a.dilations},
                     {"fourier_scale", a.fourier_scale},
                     {"data_scale", a.data_scale},
                     {"activation", a.activation == Activation::SiLU ? "silu" : "tanh"},
                     {"init_seed", a.init_seed}};
}

void from_json(const nlohmann::json& j, NetArch& a) {
  NetArch d;
  a.resolution = j.value("resolution", d.resolution);
  a.cond_factor = j.value("cond_factor", d.cond_factor);
  a.embed_dim = j.value("embed_dim", d.embed_dim);
  a.channels = j.value("channels", d.channels);
  a.kernel = j.value("kernel", d.kernel);
  a.dilations = j.value("dilations", d.dilations);
  a.fourier_scale = j.value("fourier_scale", d.fourier_scale);
  a.data_scale = j.value("data_scale", d.data_scale);
  const std::string act = j.value("activation", std::string("silu"));
  if (act == "silu")
    a.activation = Activation::SiLU;
  else if (act == "tanh")
    a.activation = Activation::Tanh;
  else
    throw ConfigError("unknown activation '" + act + "'");
  a.init_seed = j.value("init_seed", d.init_seed);
}

namespace {

double activate(Activation a, double z) {
  if (a == Activation::Tanh) return std::tanh(z);
  return z / (1.0 + std::exp(-z));
}

double activate_grad(Activation a, double z) {
  if (a == Activation::Tanh) {
    const double th = std::tanh(z);
    return 1.0 - th * th;
  }
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 + z * (1.0 - s));
}

// Periodic dilated im2col. h holds B stacked samples of n rows each; column
// tap * C + c of the result is channel c shifted by (tap - kernel/2) * dilation.
MatrixXd im2col(const MatrixXd& h, std::size_t n, std::size_t kernel, std::size_t dilation) {
  const auto rows = h.rows();
  const auto ch = static_cast<std::size_t>(h.cols());
  const std::size_t batch = static_cast<std::size_t>(rows) / n;
  MatrixXd cols(rows, static_cast<Eigen::Index>(kernel * ch));
  const long half = static_cast<long>(kernel / 2);
  const long ln = static_cast<long>(n);
  for (std::size_t tap = 0; tap < kernel; ++tap) {
    long off = (static_cast<long>(tap) - half) * static_cast<long>(dilation);
    off = ((off % ln) + ln) % ln;
    const auto head = static_cast<Eigen::Index>(n - static_cast<std::size_t>(off));
    const auto shift = static_cast<Eigen::Index>(off);
    for (std::size_t c = 0; c < ch; ++c) {
      const auto dst_col = static_cast<Eigen::Index>(tap * ch + c);
      for (std::size_t b = 0; b < batch; ++b) {
        const auto base = static_cast<Eigen::Index>(b * n);
        // out[i] = in[(i + off) mod n]
        cols.col(dst_col).segment(base, head) = h.col(static_cast<Eigen::Index>(c)).segment(base + shift, head);
        if (shift > 0)
          cols.col(dst_col).segment(base + head, shift) = h.col(static_cast<Eigen::Index>(c)).segment(base, shift);
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters column gradients back onto the source rows.
MatrixXd col2im(const MatrixXd& dcols, std::size_t n, std::size_t ch, std::size_t kernel,
                std::size_t dilation) {
  const auto rows = dcols.rows();
  const std::size_t batch = static_cast<std::size_t>(rows) / n;
  MatrixXd dh = MatrixXd::Zero(rows, static_cast<Eigen::Index>(ch));
  const long half = static_cast<long>(kernel / 2);
  const long ln = static_cast<long>(n);
  for (std::size_t tap = 0; tap < kernel; ++tap) {
    long off = (static_cast<long>(tap) - half) * static_cast<long>(dilation);
    off = ((off % ln) + ln) % ln;
    const auto head = static_cast<Eigen::Index>(n - static_cast<std::size_t>(off));
    const auto shift = static_cast<Eigen::Index>(off);
    for (std::size_t c = 0; c < ch; ++c) {
      const auto src_col = static_cast<Eigen::Index>(tap * ch + c);
      for (std::size_t b = 0; b < batch; ++b) {
        const auto base = static_cast<Eigen::Index>(b * n);
        dh.col(static_cast<Eigen::Index>(c)).segment(base + shift, head) += dcols.col(src_col).segment(base, head);
        if (shift > 0)
          dh.col(static_cast<Eigen::Index>(c)).segment(base, shift) += dcols.col(src_col).segment(base + head, shift);
      }
    }
  }
  return dh;
}

}  // namespace

ScoreNet::ScoreNet(NetArch arch, NoiseSchedule sched) : arch_(std::move(arch)), sched_(sched) {
  arch_.validate();
  build_layout();
  init_parameters();
}

ScoreNet::ScoreNet(NetArch arch, NoiseSchedule sched, VectorXd params, VectorXd frequencies)
    : arch_(std::move(arch)), sched_(sched), params_(std::move(params)), freqs_(std::move(frequencies)) {
  arch_.validate();
  const VectorXd given = params_;
  build_layout();
  if (given.size() != params_.size())
    throw ConfigError("parameter block size does not match the architecture");
  if (freqs_.size() != static_cast<Eigen::Index>(arch_.embed_dim / 2))
    throw ConfigError("frequency block size does not match embed_dim");
  params_ = given;
}

void ScoreNet::build_layout() {
  const std::size_t c = arch_.channels;
  const std::size_t e = arch_.channels;  // embedding projection width
  std::size_t off = 0;
  embed_w_ = off;
  off += e * arch_.embed_dim;
  embed_b_ = off;
  off += e;
  hidden_.clear();
  std::size_t in = arch_.in_channels();
  for (auto d : arch_.dilations) {
    ConvSlot s;
    s.in_ch = in;
    s.out_ch = c;
    s.dilation = d;
    s.weight = off;
    off += c * arch_.kernel * in;
    s.bias = off;
    off += c;
    s.embed = off;
    off += c * e;
    hidden_.push_back(s);
    in = c;
  }
  out_ = ConvSlot{};
  out_.in_ch = c;
  out_.out_ch = 1;
  out_.weight = off;
  off += arch_.kernel * c;
  out_.bias = off;
  off += 1;
  params_ = VectorXd::Zero(static_cast<Eigen::Index>(off));
}

void ScoreNet::init_parameters() {
  Rng rng(derive_seed(arch_.init_seed, {0x6e6574}));
  auto fill = [&](std::size_t off, std::size_t count, double scale) {
    for (std::size_t i = 0; i < count; ++i) params_[static_cast<Eigen::Index>(off + i)] = scale * rng.gaussian();
  };
  const std::size_t c = arch_.channels;
  fill(embed_w_, c * arch_.embed_dim, 1.0 / std::sqrt(static_cast<double>(arch_.embed_dim)));
  for (const auto& s : hidden_) {
    fill(s.weight, s.out_ch * arch_.kernel * s.in_ch,
         1.0 / std::sqrt(static_cast<double>(arch_.kernel * s.in_ch)));
    fill(s.embed, s.out_ch * c, 1.0 / std::sqrt(static_cast<double>(c)));
  }
  fill(out_.weight, arch_.kernel * c, 1.0 / std::sqrt(static_cast<double>(arch_.kernel * c)));
  freqs_.resize(static_cast<Eigen::Index>(arch_.embed_dim / 2));
  for (auto& w : freqs_) w = arch_.fourier_scale * rng.gaussian();
}

Eigen::Map<const MatrixXd> ScoreNet::mat(std::size_t off, std::size_t rows, std::size_t cols) const {
  return {params_.data() + off, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

MatrixXd ScoreNet::forward(const MatrixXd& x, const MatrixXd* cond, double t, Cache* cache) const {
  if (!(t > 0.0 && t <= 1.0)) throw std::domain_error("score undefined at t=0");
  const std::size_t n = arch_.resolution;
  if (static_cast<std::size_t>(x.rows()) != n) throw std::invalid_argument("ScoreNet: resolution mismatch");
  if (arch_.conditional() != (cond != nullptr))
    throw std::invalid_argument("ScoreNet: conditioning input mismatch");
  if (cond && (cond->rows() != x.rows() || cond->cols() != x.cols()))
    throw std::invalid_argument("ScoreNet: conditioning shape mismatch");
  const auto batch = static_cast<std::size_t>(x.cols());
  const auto rows = static_cast<Eigen::Index>(n * batch);
  const std::size_t c = arch_.channels;
  const auto act = arch_.activation;

  const std::size_t half = arch_.embed_dim / 2;
  VectorXd features(static_cast<Eigen::Index>(arch_.embed_dim));
  for (std::size_t i = 0; i < half; ++i) {
    const double arg = 2.0 * std::numbers::pi * freqs_[static_cast<Eigen::Index>(i)] * t;
    features[static_cast<Eigen::Index>(i)] = std::sin(arg);
    features[static_cast<Eigen::Index>(half + i)] = std::cos(arg);
  }
  const VectorXd embed_pre = mat(embed_w_, c, arch_.embed_dim) * features +
                             Eigen::Map<const VectorXd>(params_.data() + embed_b_, static_cast<Eigen::Index>(c));
  const VectorXd embed = embed_pre.unaryExpr([act](double z) { return activate(act, z); });

  // Input/output preconditioning: the raw trunk F is mixed with a skip path so that
  // sigma S = -sigma r / (sigma^2 + d^2) + d / sqrt(sigma^2 + d^2) F with d = data_scale.
  // r is x itself, or the residual x - cond for conditional networks, which then
  // only model the detail missing from the upsampled condition.
  const double var = sched_.sigma_sq(t), d2 = arch_.data_scale * arch_.data_scale;
  const double c_in = 1.0 / std::sqrt(var + d2);
  const double c_out = arch_.data_scale * c_in;
  const double c_skip = -std::sqrt(var) / (var + d2);
  const MatrixXd r = cond ? MatrixXd(x - *cond) : x;
  MatrixXd h(rows, static_cast<Eigen::Index>(arch_.in_channels()));
  h.col(0) = Eigen::Map<const VectorXd>(r.data(), rows) * c_in;
  if (cond) h.col(1) = Eigen::Map<const VectorXd>(cond->data(), rows);

  if (cache) {
    cache->batch = batch;
    cache->out_scale = c_out;
    cache->features = features;
    cache->embed_pre = embed_pre;
    cache->embed = embed;
    cache->cols.clear();
    cache->pre.clear();
  }

  for (const auto& s : hidden_) {
    MatrixXd cols = im2col(h, n, arch_.kernel, s.dilation);
    MatrixXd z = cols * mat(s.weight, s.out_ch, arch_.kernel * s.in_ch).transpose();
    const VectorXd shift = Eigen::Map<const VectorXd>(params_.data() + s.bias, static_cast<Eigen::Index>(s.out_ch)) +
                           mat(s.embed, s.out_ch, c) * embed;
    z.rowwise() += shift.transpose();
    MatrixXd a = z.unaryExpr([act](double v) { return activate(act, v); });
    if (s.in_ch == s.out_ch) a += h;
    if (cache) {
      cache->cols.push_back(std::move(cols));
      cache->pre.push_back(std::move(z));
    }
    h = std::move(a);
  }

  MatrixXd cols = im2col(h, n, arch_.kernel, 1);
  VectorXd o = cols * Eigen::Map<const VectorXd>(params_.data() + out_.weight,
                                                 static_cast<Eigen::Index>(arch_.kernel * c));
  o.array() += params_[static_cast<Eigen::Index>(out_.bias)];
  if (cache) cache->cols.push_back(std::move(cols));
  return c_out * Eigen::Map<const MatrixXd>(o.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(batch)) +
         c_skip * r;
}

void ScoreNet::backward(const Cache& cache, const MatrixXd& dout, VectorXd& grad) const {
  if (grad.size() != params_.size()) grad = VectorXd::Zero(params_.size());
  const std::size_t n = arch_.resolution;
  const std::size_t c = arch_.channels;
  const auto rows = static_cast<Eigen::Index>(n * cache.batch);
  const auto act = arch_.activation;
  const VectorXd dflat = Eigen::Map<const VectorXd>(dout.data(), rows) * cache.out_scale;

  // Output conv.
  const MatrixXd& out_cols = cache.cols.back();
  Eigen::Map<VectorXd>(grad.data() + out_.weight, static_cast<Eigen::Index>(arch_.kernel * c)) +=
      out_cols.transpose() * dflat;
  grad[static_cast<Eigen::Index>(out_.bias)] += dflat.sum();
  const Eigen::Map<const Eigen::RowVectorXd> wout(params_.data() + out_.weight,
                                                  static_cast<Eigen::Index>(arch_.kernel * c));
  MatrixXd dh = col2im(dflat * wout, n, c, arch_.kernel, 1);

  VectorXd dembed = VectorXd::Zero(static_cast<Eigen::Index>(c));
  for (std::size_t li = hidden_.size(); li-- > 0;) {
    const auto& s = hidden_[li];
    const MatrixXd& z = cache.pre[li];
    MatrixXd dz = dh.cwiseProduct(z.unaryExpr([act](double v) { return activate_grad(act, v); }));
    const auto wk = arch_.kernel * s.in_ch;
    Eigen::Map<MatrixXd>(grad.data() + s.weight, static_cast<Eigen::Index>(s.out_ch), static_cast<Eigen::Index>(wk)) +=
        dz.transpose() * cache.cols[li];
    const VectorXd dshift = dz.colwise().sum().transpose();
    Eigen::Map<VectorXd>(grad.data() + s.bias, static_cast<Eigen::Index>(s.out_ch)) += dshift;
    Eigen::Map<MatrixXd>(grad.data() + s.embed, static_cast<Eigen::Index>(s.out_ch), static_cast<Eigen::Index>(c)) +=
        dshift * cache.embed.transpose();
    dembed += mat(s.embed, s.out_ch, c).transpose() * dshift;
    if (li == 0) break;  // input channels carry no parameters
    MatrixXd dprev = col2im(dz * mat(s.weight, s.out_ch, wk), n, s.in_ch, arch_.kernel, s.dilation);
    if (s.in_ch == s.out_ch) dprev += dh;
    dh = std::move(dprev);
  }

  const VectorXd dembed_pre =
      dembed.cwiseProduct(cache.embed_pre.unaryExpr([act](double v) { return activate_grad(act, v); }));
  Eigen::Map<MatrixXd>(grad.data() + embed_w_, static_cast<Eigen::Index>(c),
                       static_cast<Eigen::Index>(arch_.embed_dim)) += dembed_pre * cache.features.transpose();
  Eigen::Map<VectorXd>(grad.data() + embed_b_, static_cast<Eigen::Index>(c)) += dembed_pre;
}

}  // namespace dcsr
