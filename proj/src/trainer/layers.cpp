#include <algorithm>
#include <cmath>

#include "difflab/error.hpp"
#include "difflab/trainer.hpp"

namespace difflab {
namespace {

void kaiming_uniform(std::span<double> weights, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& w : weights) w = rng.uniform(-bound, bound);
}

// y = W x + b, W stored row-major (out x in), followed by b.
class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out) : in_(in), out_(out) {}

  std::size_t in_size() const override { return in_; }
  std::size_t out_size() const override { return out_; }
  std::size_t param_size() const override { return out_ * in_ + out_; }

  void init(std::span<double> params, Rng& rng) const override {
    kaiming_uniform(params.first(out_ * in_), in_, rng);
    std::fill(params.begin() + static_cast<std::ptrdiff_t>(out_ * in_), params.end(), 0.0);
  }

  void forward(std::span<const double> params, std::span<const double> in,
               std::span<double> out) const override {
    const double* w = params.data();
    const double* b = params.data() + out_ * in_;
    for (std::size_t o = 0; o < out_; ++o) {
      const double* row = w + o * in_;
      double acc = b[o];
      for (std::size_t i = 0; i < in_; ++i) acc += row[i] * in[i];
      out[o] = acc;
    }
  }

  void backward(std::span<const double> params, std::span<const double> in,
                std::span<const double>, std::span<const double> grad_out,
                std::span<double> grad_params, std::span<double> grad_in) const override {
    const double* w = params.data();
    if (!grad_params.empty()) {
      double* gw = grad_params.data();
      double* gb = grad_params.data() + out_ * in_;
      for (std::size_t o = 0; o < out_; ++o) {
        const double g = grad_out[o];
        double* row = gw + o * in_;
        for (std::size_t i = 0; i < in_; ++i) row[i] += g * in[i];
        gb[o] += g;
      }
    }
    if (!grad_in.empty()) {
      std::fill(grad_in.begin(), grad_in.end(), 0.0);
      for (std::size_t o = 0; o < out_; ++o) {
        const double g = grad_out[o];
        const double* row = w + o * in_;
        for (std::size_t i = 0; i < in_; ++i) grad_in[i] += g * row[i];
      }
    }
  }

 private:
  std::size_t in_;
  std::size_t out_;
};

class Relu final : public Layer {
 public:
  explicit Relu(std::size_t size) : size_(size) {}

  std::size_t in_size() const override { return size_; }
  std::size_t out_size() const override { return size_; }
  std::size_t param_size() const override { return 0; }
  void init(std::span<double>, Rng&) const override {}

  void forward(std::span<const double>, std::span<const double> in,
               std::span<double> out) const override {
    for (std::size_t i = 0; i < size_; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  }

  void backward(std::span<const double>, std::span<const double> in, std::span<const double>,
                std::span<const double> grad_out, std::span<double>,
                std::span<double> grad_in) const override {
    if (grad_in.empty()) return;
    for (std::size_t i = 0; i < size_; ++i) grad_in[i] = in[i] > 0.0 ? grad_out[i] : 0.0;
  }

 private:
  std::size_t size_;
};

// 3x3 convolution, stride 1, zero padding 1. Weights [out][in][3][3], then bias.
class Conv3x3 final : public Layer {
 public:
  Conv3x3(InputShape in, std::size_t out_channels) : in_(in), out_channels_(out_channels) {}

  std::size_t in_size() const override { return in_.size(); }
  std::size_t out_size() const override { return out_channels_ * in_.height * in_.width; }
  std::size_t param_size() const override { return weight_count() + out_channels_; }

  void init(std::span<double> params, Rng& rng) const override {
    kaiming_uniform(params.first(weight_count()), in_.channels * 9, rng);
    std::fill(params.begin() + static_cast<std::ptrdiff_t>(weight_count()), params.end(), 0.0);
  }

  void forward(std::span<const double> params, std::span<const double> in,
               std::span<double> out) const override {
    const std::size_t h = in_.height, w = in_.width, plane = h * w;
    const double* weights = params.data();
    const double* bias = params.data() + weight_count();
    for (std::size_t o = 0; o < out_channels_; ++o) {
      double* dst = out.data() + o * plane;
      std::fill(dst, dst + plane, bias[o]);
      for (std::size_t c = 0; c < in_.channels; ++c) {
        const double* src = in.data() + c * plane;
        const double* k = weights + (o * in_.channels + c) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const double kv = k[ky * 3 + kx];
            // output (y, x) reads input (y + ky - 1, x + kx - 1)
            const std::size_t y0 = ky == 0 ? 1 : 0, y1 = ky == 2 ? h - 1 : h;
            const std::size_t x0 = kx == 0 ? 1 : 0, x1 = kx == 2 ? w - 1 : w;
            for (std::size_t y = y0; y < y1; ++y) {
              const double* srow = src + (y + ky - 1) * w;
              double* drow = dst + y * w;
              for (std::size_t x = x0; x < x1; ++x) drow[x] += kv * srow[x + kx - 1];
            }
          }
        }
      }
    }
  }

  void backward(std::span<const double> params, std::span<const double> in,
                std::span<const double>, std::span<const double> grad_out,
                std::span<double> grad_params, std::span<double> grad_in) const override {
    const std::size_t h = in_.height, w = in_.width, plane = h * w;
    const double* weights = params.data();
    if (!grad_in.empty()) std::fill(grad_in.begin(), grad_in.end(), 0.0);
    for (std::size_t o = 0; o < out_channels_; ++o) {
      const double* g = grad_out.data() + o * plane;
      if (!grad_params.empty()) {
        double gb = 0.0;
        for (std::size_t p = 0; p < plane; ++p) gb += g[p];
        grad_params[weight_count() + o] += gb;
      }
      for (std::size_t c = 0; c < in_.channels; ++c) {
        const double* src = in.data() + c * plane;
        const std::size_t kbase = (o * in_.channels + c) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::size_t y0 = ky == 0 ? 1 : 0, y1 = ky == 2 ? h - 1 : h;
            const std::size_t x0 = kx == 0 ? 1 : 0, x1 = kx == 2 ? w - 1 : w;
            const double kv = weights[kbase + ky * 3 + kx];
            double gk = 0.0;
            for (std::size_t y = y0; y < y1; ++y) {
              const std::size_t row = (y + ky - 1) * w;
              const double* grow = g + y * w;
              if (!grad_params.empty()) {
                const double* srow = src + row;
                for (std::size_t x = x0; x < x1; ++x) gk += grow[x] * srow[x + kx - 1];
              }
              if (!grad_in.empty()) {
                double* girow = grad_in.data() + c * plane + row;
                for (std::size_t x = x0; x < x1; ++x) girow[x + kx - 1] += kv * grow[x];
              }
            }
            if (!grad_params.empty()) grad_params[kbase + ky * 3 + kx] += gk;
          }
        }
      }
    }
  }

 private:
  std::size_t weight_count() const { return out_channels_ * in_.channels * 9; }

  InputShape in_;
  std::size_t out_channels_;
};

class AvgPool2 final : public Layer {
 public:
  explicit AvgPool2(InputShape in) : in_(in) {}

  std::size_t in_size() const override { return in_.size(); }
  std::size_t out_size() const override { return in_.channels * (in_.height / 2) * (in_.width / 2); }
  std::size_t param_size() const override { return 0; }
  void init(std::span<double>, Rng&) const override {}

  void forward(std::span<const double>, std::span<const double> in,
               std::span<double> out) const override {
    const std::size_t oh = in_.height / 2, ow = in_.width / 2;
    for (std::size_t c = 0; c < in_.channels; ++c) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          const double* src = in.data() + c * in_.height * in_.width + 2 * y * in_.width + 2 * x;
          out[(c * oh + y) * ow + x] = 0.25 * (src[0] + src[1] + src[in_.width] + src[in_.width + 1]);
        }
      }
    }
  }

  void backward(std::span<const double>, std::span<const double>, std::span<const double>,
                std::span<const double> grad_out, std::span<double>,
                std::span<double> grad_in) const override {
    if (grad_in.empty()) return;
    const std::size_t oh = in_.height / 2, ow = in_.width / 2;
    for (std::size_t c = 0; c < in_.channels; ++c) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          const double g = 0.25 * grad_out[(c * oh + y) * ow + x];
          double* dst = grad_in.data() + c * in_.height * in_.width + 2 * y * in_.width + 2 * x;
          dst[0] = g;
          dst[1] = g;
          dst[in_.width] = g;
          dst[in_.width + 1] = g;
        }
      }
    }
  }

 private:
  InputShape in_;
};

}  // namespace

std::shared_ptr<const Layer> make_dense(std::size_t in, std::size_t out) {
  require(in > 0 && out > 0, "dense layer with zero size");
  return std::make_shared<Dense>(in, out);
}

std::shared_ptr<const Layer> make_relu(std::size_t size) { return std::make_shared<Relu>(size); }

std::shared_ptr<const Layer> make_conv3x3(InputShape in, std::size_t out_channels) {
  require(in.size() > 0 && out_channels > 0, "conv layer with zero size");
  return std::make_shared<Conv3x3>(in, out_channels);
}

std::shared_ptr<const Layer> make_avg_pool2(InputShape in) {
  require(in.height % 2 == 0 && in.width % 2 == 0, "average pool needs even spatial size");
  return std::make_shared<AvgPool2>(in);
}

}  // namespace difflab
