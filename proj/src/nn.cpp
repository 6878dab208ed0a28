#include "surfcdm/nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <random>

#include "surfcdm/errors.hpp"

namespace surfcdm::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

// 3x3 patches with circular wrap along height and zero padding along width.
template <typename T>
void im2col(const Tensor<T>& x, std::vector<T>& col) {
    const int H = x.height;
    const int W = x.width;
    const std::size_t hw = x.plane();
    col.assign(static_cast<std::size_t>(x.channels) * 9 * hw, T(0));
    for (int c = 0; c < x.channels; ++c) {
        const T* src = x.channel(c);
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* dst = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                const int dx = kx - 1;
                const int w0 = std::max(0, -dx);
                const int w1 = std::min(W, W - dx);
                for (int h = 0; h < H; ++h) {
                    const int hs = (h + ky - 1 + H) % H;
                    std::memcpy(dst + static_cast<std::size_t>(h) * W + w0,
                                src + static_cast<std::size_t>(hs) * W + w0 + dx,
                                sizeof(T) * static_cast<std::size_t>(w1 - w0));
                }
            }
        }
    }
}

template <typename T>
void col2im(const std::vector<T>& col, Tensor<T>& dx) {
    const int H = dx.height;
    const int W = dx.width;
    const std::size_t hw = dx.plane();
    std::fill(dx.data.begin(), dx.data.end(), T(0));
    for (int c = 0; c < dx.channels; ++c) {
        T* dst = dx.channel(c);
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* src = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * hw;
                const int ox = kx - 1;
                const int w0 = std::max(0, -ox);
                const int w1 = std::min(W, W - ox);
                for (int h = 0; h < H; ++h) {
                    const int hs = (h + ky - 1 + H) % H;
                    T* d = dst + static_cast<std::size_t>(hs) * W + ox;
                    const T* s = src + static_cast<std::size_t>(h) * W;
                    for (int w = w0; w < w1; ++w) d[w] += s[w];
                }
            }
        }
    }
}

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& x) {
    Tensor<T> y(x.channels, x.height / 2, x.width / 2);
    for (int c = 0; c < y.channels; ++c)
        for (int h = 0; h < y.height; ++h)
            for (int w = 0; w < y.width; ++w)
                y(c, h, w) = T(0.25) * (x(c, 2 * h, 2 * w) + x(c, 2 * h, 2 * w + 1) + x(c, 2 * h + 1, 2 * w) +
                                        x(c, 2 * h + 1, 2 * w + 1));
    return y;
}

template <typename T>
Tensor<T> avg_pool_backward(const Tensor<T>& gy, int in_h, int in_w) {
    Tensor<T> gx(gy.channels, in_h, in_w);
    for (int c = 0; c < gy.channels; ++c)
        for (int h = 0; h < in_h; ++h)
            for (int w = 0; w < in_w; ++w) gx(c, h, w) = T(0.25) * gy(c, h / 2, w / 2);
    return gx;
}

template <typename T>
Tensor<T> upsample(const Tensor<T>& x) {
    Tensor<T> y(x.channels, x.height * 2, x.width * 2);
    for (int c = 0; c < y.channels; ++c)
        for (int h = 0; h < y.height; ++h)
            for (int w = 0; w < y.width; ++w) y(c, h, w) = x(c, h / 2, w / 2);
    return y;
}

template <typename T>
Tensor<T> upsample_backward(const Tensor<T>& gy) {
    Tensor<T> gx(gy.channels, gy.height / 2, gy.width / 2);
    for (int c = 0; c < gy.channels; ++c)
        for (int h = 0; h < gy.height; ++h)
            for (int w = 0; w < gy.width; ++w) gx(c, h / 2, w / 2) += gy(c, h, w);
    return gx;
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> y(a.channels + b.channels, a.height, a.width);
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return y;
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    for (std::size_t k = 0; k < dst.data.size(); ++k) dst.data[k] += src.data[k];
}

}  // namespace

template <typename T>
UNet<T>::UNet(const UNetShape& shape) : shape_(shape) {
    if (shape_.levels < 1 || static_cast<int>(shape_.channels.size()) != shape_.levels) {
        throw Error(ErrorKind::InvalidConfig, "channel list length must equal levels");
    }
    if (shape_.input_channels < 1) throw Error(ErrorKind::InvalidConfig, "input_channels must be >= 1");
    for (int c : shape_.channels) {
        if (c < 1) throw Error(ErrorKind::InvalidConfig, "channel counts must be >= 1");
    }
    int cin = shape_.input_channels;
    for (int l = 0; l < shape_.levels; ++l) {
        const int c = shape_.channels[static_cast<std::size_t>(l)];
        add_unit("enc" + std::to_string(l) + ".conv0", cin, c);
        add_unit("enc" + std::to_string(l) + ".conv1", c, c);
        cin = c;
    }
    for (int l = 0; l + 1 < shape_.levels; ++l) {
        const int c = shape_.channels[static_cast<std::size_t>(l)];
        const int below = shape_.channels[static_cast<std::size_t>(l + 1)];
        add_unit("dec" + std::to_string(l) + ".conv0", below + c, c);
        add_unit("dec" + std::to_string(l) + ".conv1", c, c);
    }
    head_w_ = add_param("head.weight", {1, shape_.channels[0]});
    head_b_ = add_param("head.bias", {1});
}

template <typename T>
int UNet<T>::add_param(std::string name, std::vector<int> shape) {
    Param<T> p;
    p.name = std::move(name);
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    p.shape = std::move(shape);
    p.value.assign(n, T(0));
    p.grad.assign(n, T(0));
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size()) - 1;
}

template <typename T>
int UNet<T>::add_unit(const std::string& name, int cin, int cout) {
    Unit u;
    u.cin = cin;
    u.cout = cout;
    u.w = add_param(name + ".weight", {cout, cin, 3, 3});
    u.b = add_param(name + ".bias", {cout});
    u.gw = add_param(name + ".gate.weight", {cout, 1});
    u.gb = add_param(name + ".gate.bias", {cout});
    units_.push_back(u);
    return static_cast<int>(units_.size()) - 1;
}

template <typename T>
std::array<int, 4> UNet<T>::unit_params(int k) const {
    const Unit& u = units_.at(static_cast<std::size_t>(k));
    return {u.w, u.b, u.gw, u.gb};
}

template <typename T>
void UNet<T>::initialize(std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const Unit& u : units_) {
        const double scale = std::sqrt(2.0 / (9.0 * u.cin));
        for (T& v : params_[static_cast<std::size_t>(u.w)].value) v = static_cast<T>(scale * normal(engine));
        for (T& v : params_[static_cast<std::size_t>(u.b)].value) v = T(0);
        for (T& v : params_[static_cast<std::size_t>(u.gw)].value) v = static_cast<T>(0.1 * normal(engine));
        for (T& v : params_[static_cast<std::size_t>(u.gb)].value) v = T(1);
    }
    const double head_scale = std::sqrt(1.0 / shape_.channels[0]);
    for (T& v : params_[static_cast<std::size_t>(head_w_)].value) v = static_cast<T>(head_scale * normal(engine));
    params_[static_cast<std::size_t>(head_b_)].value[0] = T(-2);
    zero_grad();
}

template <typename T>
void UNet<T>::zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <typename T>
Tensor<T> UNet<T>::unit_output(const UnitCache& uc) {
    Tensor<T> out(static_cast<int>(uc.gate.size()), uc.pre.height, uc.pre.width);
    for (int c = 0; c < out.channels; ++c) {
        const T* z = uc.pre.channel(c);
        T* o = out.channel(c);
        for (std::size_t k = 0; k < out.plane(); ++k) o[k] = z[k] * sigmoid(z[k]) * uc.gate[static_cast<std::size_t>(c)];
    }
    return out;
}

template <typename T>
Tensor<T> UNet<T>::unit_forward(const Unit& u, const Tensor<T>& x, T sigma, UnitCache* uc) const {
    const std::size_t hw = x.plane();
    std::vector<T> col;
    im2col(x, col);
    Tensor<T> pre(u.cout, x.height, x.width);
    ConstMatMap<T> wmat(params_[static_cast<std::size_t>(u.w)].value.data(), u.cout, u.cin * 9);
    ConstMatMap<T> cmat(col.data(), u.cin * 9, static_cast<Eigen::Index>(hw));
    MatMap<T> zmat(pre.data.data(), u.cout, static_cast<Eigen::Index>(hw));
    zmat.noalias() = wmat * cmat;

    const auto& bias = params_[static_cast<std::size_t>(u.b)].value;
    const auto& gw = params_[static_cast<std::size_t>(u.gw)].value;
    const auto& gb = params_[static_cast<std::size_t>(u.gb)].value;
    std::vector<T> gate(static_cast<std::size_t>(u.cout));
    Tensor<T> out(u.cout, x.height, x.width);
    for (int c = 0; c < u.cout; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        gate[cc] = gw[cc] * sigma + gb[cc];
        T* z = pre.channel(c);
        T* o = out.channel(c);
        for (std::size_t k = 0; k < hw; ++k) {
            z[k] += bias[cc];
            o[k] = z[k] * sigmoid(z[k]) * gate[cc];
        }
    }
    if (uc) {
        uc->input = x;
        uc->pre = std::move(pre);
        uc->gate = std::move(gate);
    }
    return out;
}

template <typename T>
Tensor<T> UNet<T>::unit_backward(const Unit& u, const UnitCache& uc, T sigma, const Tensor<T>& grad_out) {
    const std::size_t hw = grad_out.plane();
    auto& gw = params_[static_cast<std::size_t>(u.gw)].grad;
    auto& gb = params_[static_cast<std::size_t>(u.gb)].grad;
    auto& bgrad = params_[static_cast<std::size_t>(u.b)].grad;

    Tensor<T> dz(u.cout, grad_out.height, grad_out.width);
    for (int c = 0; c < u.cout; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const T* z = uc.pre.channel(c);
        const T* go = grad_out.channel(c);
        T* d = dz.channel(c);
        T dgate = T(0);
        T dbias = T(0);
        for (std::size_t k = 0; k < hw; ++k) {
            const T s = sigmoid(z[k]);
            const T act = z[k] * s;
            dgate += go[k] * act;
            d[k] = go[k] * uc.gate[cc] * (s + z[k] * s * (T(1) - s));
            dbias += d[k];
        }
        gw[cc] += dgate * sigma;
        gb[cc] += dgate;
        bgrad[cc] += dbias;
    }

    std::vector<T> col;
    im2col(uc.input, col);
    ConstMatMap<T> cmat(col.data(), u.cin * 9, static_cast<Eigen::Index>(hw));
    ConstMatMap<T> dzmat(dz.data.data(), u.cout, static_cast<Eigen::Index>(hw));
    MatMap<T> dw(params_[static_cast<std::size_t>(u.w)].grad.data(), u.cout, u.cin * 9);
    dw.noalias() += dzmat * cmat.transpose();

    std::vector<T> dcol(col.size());
    MatMap<T> dcmat(dcol.data(), u.cin * 9, static_cast<Eigen::Index>(hw));
    ConstMatMap<T> wmat(params_[static_cast<std::size_t>(u.w)].value.data(), u.cout, u.cin * 9);
    dcmat.noalias() = wmat.transpose() * dzmat;
    Tensor<T> dx(u.cin, grad_out.height, grad_out.width);
    col2im(dcol, dx);
    return dx;
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& input, T sigma, Cache* cache) const {
    if (input.channels != shape_.input_channels) {
        throw Error(ErrorKind::ShapeMismatch, "unexpected input channel count");
    }
    const int factor = 1 << (shape_.levels - 1);
    if (input.height % factor != 0 || input.width % factor != 0) {
        throw Error(ErrorKind::ShapeMismatch, "input extent not divisible by 2^(levels-1)");
    }
    if (cache) {
        cache->sigma = sigma;
        cache->units.assign(units_.size(), UnitCache{});
    }
    auto uc = [&](int k) -> UnitCache* { return cache ? &cache->units[static_cast<std::size_t>(k)] : nullptr; };

    std::vector<Tensor<T>> skips(static_cast<std::size_t>(shape_.levels));
    Tensor<T> x = input;
    for (int l = 0; l < shape_.levels; ++l) {
        if (l > 0) x = avg_pool(skips[static_cast<std::size_t>(l - 1)]);
        x = unit_forward(units_[static_cast<std::size_t>(enc_unit(l, 0))], x, sigma, uc(enc_unit(l, 0)));
        x = unit_forward(units_[static_cast<std::size_t>(enc_unit(l, 1))], x, sigma, uc(enc_unit(l, 1)));
        skips[static_cast<std::size_t>(l)] = x;
    }
    Tensor<T> d = std::move(x);
    for (int l = shape_.levels - 2; l >= 0; --l) {
        Tensor<T> cat = concat(upsample(d), skips[static_cast<std::size_t>(l)]);
        d = unit_forward(units_[static_cast<std::size_t>(dec_unit(l, 0))], cat, sigma, uc(dec_unit(l, 0)));
        d = unit_forward(units_[static_cast<std::size_t>(dec_unit(l, 1))], d, sigma, uc(dec_unit(l, 1)));
    }

    const auto& hw = params_[static_cast<std::size_t>(head_w_)].value;
    const T hb = params_[static_cast<std::size_t>(head_b_)].value[0];
    Tensor<T> prob(1, d.height, d.width, hb);
    for (int c = 0; c < d.channels; ++c) {
        const T wc = hw[static_cast<std::size_t>(c)];
        const T* src = d.channel(c);
        T* dst = prob.channel(0);
        for (std::size_t k = 0; k < d.plane(); ++k) dst[k] += wc * src[k];
    }
    for (T& v : prob.data) {
        v = sigmoid(v);
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteActivation, "non-finite network output");
    }
    if (cache) {
        cache->head_input = std::move(d);
        cache->prob = prob;
    }
    return prob;
}

template <typename T>
void UNet<T>::backward(const Cache& cache, const Tensor<T>& grad_prob) {
    const Tensor<T>& d = cache.head_input;
    const Tensor<T>& p = cache.prob;
    Tensor<T> dlogit(1, p.height, p.width);
    for (std::size_t k = 0; k < p.data.size(); ++k) dlogit.data[k] = grad_prob.data[k] * p.data[k] * (T(1) - p.data[k]);

    auto& hwg = params_[static_cast<std::size_t>(head_w_)].grad;
    const auto& hw = params_[static_cast<std::size_t>(head_w_)].value;
    T bsum = T(0);
    for (T v : dlogit.data) bsum += v;
    params_[static_cast<std::size_t>(head_b_)].grad[0] += bsum;
    Tensor<T> gd(d.channels, d.height, d.width);
    for (int c = 0; c < d.channels; ++c) {
        const T* src = d.channel(c);
        T* dst = gd.channel(c);
        T acc = T(0);
        for (std::size_t k = 0; k < d.plane(); ++k) {
            acc += dlogit.data[k] * src[k];
            dst[k] = dlogit.data[k] * hw[static_cast<std::size_t>(c)];
        }
        hwg[static_cast<std::size_t>(c)] += acc;
    }

    const T sigma = cache.sigma;
    std::vector<Tensor<T>> dskips(static_cast<std::size_t>(shape_.levels));
    for (int l = 0; l + 1 < shape_.levels; ++l) {
        const int k1 = dec_unit(l, 1);
        const int k0 = dec_unit(l, 0);
        gd = unit_backward(units_[static_cast<std::size_t>(k1)], cache.units[static_cast<std::size_t>(k1)], sigma, gd);
        Tensor<T> gcat =
            unit_backward(units_[static_cast<std::size_t>(k0)], cache.units[static_cast<std::size_t>(k0)], sigma, gd);
        const int c_up = shape_.channels[static_cast<std::size_t>(l + 1)];
        const int c_skip = shape_.channels[static_cast<std::size_t>(l)];
        Tensor<T> gup(c_up, gcat.height, gcat.width);
        Tensor<T> gskip(c_skip, gcat.height, gcat.width);
        const auto split = static_cast<std::ptrdiff_t>(gup.data.size());
        std::copy(gcat.data.begin(), gcat.data.begin() + split, gup.data.begin());
        std::copy(gcat.data.begin() + split, gcat.data.end(), gskip.data.begin());
        dskips[static_cast<std::size_t>(l)] = std::move(gskip);
        gd = upsample_backward(gup);
    }
    Tensor<T> gx = std::move(gd);
    for (int l = shape_.levels - 1; l >= 0; --l) {
        if (l + 1 < shape_.levels) add_into(gx, dskips[static_cast<std::size_t>(l)]);
        const int k1 = enc_unit(l, 1);
        const int k0 = enc_unit(l, 0);
        gx = unit_backward(units_[static_cast<std::size_t>(k1)], cache.units[static_cast<std::size_t>(k1)], sigma, gx);
        gx = unit_backward(units_[static_cast<std::size_t>(k0)], cache.units[static_cast<std::size_t>(k0)], sigma, gx);
        if (l > 0) {
            const auto& below = cache.units[static_cast<std::size_t>(enc_unit(l - 1, 1))].pre;
            gx = avg_pool_backward(gx, below.height, below.width);
        }
    }
}

template class UNet<float>;
template class UNet<double>;

}  // namespace surfcdm::nn
