#pragma once

// Minimal CPU building blocks for the sigma-conditioned U-Net: a CHW tensor,
// named parameters, and the network itself with an explicit backward pass.
// Templated on the scalar so gradient checks can run in double precision.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace surfcdm::nn {

template <typename T>
struct Tensor {
    int channels = 0;
    int height = 0;  // angular axis (circular)
    int width = 0;   // radial axis (zero padded)
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, int h, int w, T fill = T{})
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
    T* channel(int c) noexcept { return data.data() + plane() * c; }
    const T* channel(int c) const noexcept { return data.data() + plane() * c; }
    T& operator()(int c, int h, int w) { return data[plane() * c + static_cast<std::size_t>(h) * width + w]; }
    T operator()(int c, int h, int w) const { return data[plane() * c + static_cast<std::size_t>(h) * width + w]; }
};

template <typename T>
struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;

    std::size_t size() const noexcept { return value.size(); }
};

struct UNetShape {
    int input_channels = 2;
    int levels = 4;
    std::vector<int> channels{16, 32, 64, 128};
};

/// U-shaped encoder/decoder. Every hidden 3x3 convolution is followed by SiLU and
/// a per-channel multiplicative gate computed by a fully connected map of sigma.
/// The head is a 1x1 convolution with a sigmoid.
template <typename T>
class UNet {
public:
    struct UnitCache {
        Tensor<T> input;
        Tensor<T> pre;  // convolution output before activation
        std::vector<T> gate;
    };
    struct Cache {
        T sigma{};
        std::vector<UnitCache> units;
        std::vector<int> skip_channels;
        Tensor<T> head_input;
        Tensor<T> prob;
    };

    UNet() = default;
    explicit UNet(const UNetShape& shape);

    void initialize(std::uint64_t seed);

    /// input: (input_channels, H, W) -> (1, H, W) probabilities in [0, 1].
    Tensor<T> forward(const Tensor<T>& input, T sigma, Cache* cache = nullptr) const;

    /// Accumulates parameter gradients for d(loss)/d(prob).
    void backward(const Cache& cache, const Tensor<T>& grad_prob);

    void zero_grad();

    std::vector<Param<T>>& params() noexcept { return params_; }
    const std::vector<Param<T>>& params() const noexcept { return params_; }
    const UNetShape& shape() const noexcept { return shape_; }

    /// Number of hidden (gated) convolution units.
    int hidden_units() const noexcept { return static_cast<int>(units_.size()); }
    /// Parameter indices of unit k: {weight, bias, gate_weight, gate_bias}.
    std::array<int, 4> unit_params(int k) const;
    int head_weight_index() const noexcept { return head_w_; }
    int head_bias_index() const noexcept { return head_b_; }

    /// Feature map produced by hidden unit k during the last cached forward pass.
    static Tensor<T> unit_output(const UnitCache& uc);

private:
    struct Unit {
        int cin = 0;
        int cout = 0;
        int w = -1;
        int b = -1;
        int gw = -1;
        int gb = -1;
    };

    int add_param(std::string name, std::vector<int> shape);
    int add_unit(const std::string& name, int cin, int cout);

    Tensor<T> unit_forward(const Unit& u, const Tensor<T>& x, T sigma, UnitCache* uc) const;
    Tensor<T> unit_backward(const Unit& u, const UnitCache& uc, T sigma, const Tensor<T>& grad_out);

    int enc_unit(int level, int k) const { return 2 * level + k; }
    int dec_unit(int level, int k) const { return 2 * shape_.levels + 2 * level + k; }

    UNetShape shape_;
    std::vector<Param<T>> params_;
    std::vector<Unit> units_;
    int head_w_ = -1;
    int head_b_ = -1;
};

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace surfcdm::nn
