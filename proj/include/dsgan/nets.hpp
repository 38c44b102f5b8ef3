#pragma once

// Desk-scale generator and dual-head discriminator.
//
// Discriminator: a stack of stride-2 4x4 convolutions (the shared trunk) ending
// at a 2x2 map, flattened and fed to two linear heads: a realness score and
// K-way pretext logits. With class labels, a projection term <embed(y), h> is
// added to the score. Generator: linear projection to a 4x4 map followed by
// stride-2 transposed convolutions up to the image size, tanh output.

#include <bit>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsgan/nn.hpp"

namespace dsgan {

struct DiscriminatorConfig {
    int image_size = 32;
    int channels = 3;
    int base_channels = 32;
    int pretext_classes = 0;  // 0 disables the pretext head
    int num_classes = 0;      // > 0 enables projection conditioning
    bool spectral_norm = true;
};

struct GeneratorConfig {
    int image_size = 32;
    int channels = 3;
    int base_channels = 32;
    int latent_dim = 128;
    int num_classes = 0;
    int class_embed_dim = 32;
};

namespace detail {

inline int log2_exact(int n, const char* who) {
    require(n >= 8 && std::has_single_bit(static_cast<unsigned>(n)), std::string(who) + ": image size must be a power of two >= 8");
    return std::countr_zero(static_cast<unsigned>(n));
}

inline void check_labels(const std::vector<int>* labels, int num_classes, int n, const char* who) {
    if (num_classes == 0) {
        require(labels == nullptr, std::string(who) + ": labels given to an unconditional model");
        return;
    }
    require(labels != nullptr, std::string(who) + ": conditional model requires labels");
    require(static_cast<int>(labels->size()) == n, std::string(who) + ": one label per sample required");
    for (int y : *labels) require(y >= 0 && y < num_classes, std::string(who) + ": class label out of range");
}

}  // namespace detail

template <class T>
class Discriminator {
public:
    Discriminator() = default;

    Discriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int layers = detail::log2_exact(cfg.image_size, "Discriminator") - 1;
        int in = cfg.channels;
        for (int i = 0; i < layers; ++i) {
            const int out = cfg.base_channels << std::min(i, 3);
            convs_.emplace_back("D.trunk" + std::to_string(i), in, out, 4, 2, 1);
            acts_.emplace_back(T(0.2));
            in = out;
        }
        final_channels_ = in;
        feature_dim_ = in * 4;
        score_ = Linear<T>("D.score", feature_dim_, 1);
        if (cfg.pretext_classes > 0) pretext_ = Linear<T>("D.pretext", feature_dim_, cfg.pretext_classes);
        if (cfg.num_classes > 0) embed_ = Param<T>("D.embed", cfg.num_classes, feature_dim_);

        // Layers shared by every configuration draw first, so runs that differ
        // only in the pretext head or conditioning start from the same trunk.
        for (auto& c : convs_) orthogonal_init(c.weight.param, rng);
        orthogonal_init(score_.weight.param, rng);
        if (cfg.spectral_norm) {
            for (auto& c : convs_) c.weight.enable_spectral(rng);
            score_.weight.enable_spectral(rng);
        }
        if (pretext_) {
            orthogonal_init(pretext_->weight.param, rng);
            if (cfg.spectral_norm) pretext_->weight.enable_spectral(rng);
        }
        if (embed_) normal_init(*embed_, rng, 0.02);
    }

    const DiscriminatorConfig& config() const noexcept { return cfg_; }
    int feature_dim() const noexcept { return feature_dim_; }
    int final_channels() const noexcept { return final_channels_; }
    bool has_pretext_head() const noexcept { return pretext_.has_value(); }
    int pretext_classes() const noexcept { return pretext_ ? pretext_->out_features() : 0; }

    /// Shared trunk D'. Returns N x feature_dim flattened features.
    Tensor<T> trunk(const Tensor<T>& x, bool advance_spectral = false) {
        detail::require(x.c() == cfg_.channels && x.h() == cfg_.image_size && x.w() == cfg_.image_size,
                        "Discriminator: input shape " + shape_string(x.shape()) + " does not match configuration");
        Tensor<T> h = x;
        for (std::size_t i = 0; i < convs_.size(); ++i) h = acts_[i].forward(convs_[i].forward(h, advance_spectral));
        last_block_ = h;
        block_shape_ = h.shape();
        h.reshape(h.n(), feature_dim_, 1, 1);
        return h;
    }

    /// Output of the final trunk block from the most recent trunk() call.
    const Tensor<T>& last_block() const noexcept { return last_block_; }

    /// Backpropagates through the trunk. The gradient with respect to the
    /// images is only formed when `input_grad` is set (empty tensor otherwise).
    Tensor<T> trunk_backward(Tensor<T> grad_features, bool param_grads, bool input_grad = true) {
        grad_features.reshape(block_shape_[0], block_shape_[1], block_shape_[2], block_shape_[3]);
        Tensor<T> g = std::move(grad_features);
        for (std::size_t i = convs_.size(); i-- > 0;)
            g = convs_[i].backward(acts_[i].backward(g), param_grads, i > 0 || input_grad);
        return g;
    }

    /// Realness head D1 (plus the projection term when conditional). N x 1.
    Tensor<T> score_head(const Tensor<T>& features, const std::vector<int>* labels = nullptr, bool advance_spectral = false) {
        detail::check_labels(labels, cfg_.num_classes, features.n(), "Discriminator");
        Tensor<T> s = score_.forward(features, advance_spectral);
        if (embed_) {
            score_features_ = features;
            score_labels_ = *labels;
            for (int i = 0; i < features.n(); ++i) {
                const T* e = embed_->value.data() + std::size_t((*labels)[i]) * feature_dim_;
                const T* f = features.data() + std::size_t(i) * feature_dim_;
                T dot = 0;
                for (int j = 0; j < feature_dim_; ++j) dot += e[j] * f[j];
                s.at(i, 0) += dot;
            }
        }
        return s;
    }

    Tensor<T> score_head_backward(const Tensor<T>& grad_scores, bool param_grads) {
        Tensor<T> g = score_.backward(grad_scores, param_grads);
        if (embed_) {
            for (int i = 0; i < grad_scores.n(); ++i) {
                const T gs = grad_scores.at(i, 0);
                const std::size_t row = std::size_t(score_labels_[i]) * feature_dim_;
                const T* f = score_features_.data() + std::size_t(i) * feature_dim_;
                T* gf = g.data() + std::size_t(i) * feature_dim_;
                for (int j = 0; j < feature_dim_; ++j) {
                    gf[j] += gs * embed_->value[row + j];
                    if (param_grads) embed_->grad[row + j] += gs * f[j];
                }
            }
        }
        return g;
    }

    /// Pretext head D2. N x K logits.
    Tensor<T> pretext_head(const Tensor<T>& features, bool advance_spectral = false) {
        detail::require(pretext_.has_value(), "Discriminator: no pretext head configured");
        return pretext_->forward(features, advance_spectral);
    }

    Tensor<T> pretext_head_backward(const Tensor<T>& grad_logits, bool param_grads) {
        return pretext_->backward(grad_logits, param_grads);
    }

    /// Both heads over one trunk pass; logits are empty without a pretext head.
    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& x, const std::vector<int>* labels = nullptr) {
        detail::check_labels(labels, cfg_.num_classes, x.n(), "Discriminator");
        Tensor<T> f = trunk(x);
        Tensor<T> scores = score_head(f, labels);
        Tensor<T> logits = pretext_ ? pretext_head(f) : Tensor<T>();
        return {std::move(scores), std::move(logits)};
    }

    /// Global-average-pooled final trunk block, N x final_channels.
    Tensor<T> pooled_features(const Tensor<T>& x) {
        trunk(x);
        const Tensor<T>& b = last_block_;
        const int hw = b.h() * b.w();
        Tensor<T> out = Tensor<T>::matrix(b.n(), b.c());
        for (int i = 0; i < b.n(); ++i)
            for (int c = 0; c < b.c(); ++c) {
                T s = 0;
                for (int k = 0; k < hw; ++k) s += b.data()[(std::size_t(i) * b.c() + c) * hw + k];
                out.at(i, c) = s / static_cast<T>(hw);
            }
        return out;
    }

    std::vector<Param<T>*> trunk_params() {
        std::vector<Param<T>*> out;
        for (auto& c : convs_) c.collect(out);
        return out;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out = trunk_params();
        score_.collect(out);
        if (pretext_) pretext_->collect(out);
        if (embed_) out.push_back(&*embed_);
        return out;
    }

    std::vector<Weight<T>*> spectral_weights() {
        std::vector<Weight<T>*> out;
        for (auto& c : convs_) c.collect_spectral(out);
        score_.collect_spectral(out);
        if (pretext_) pretext_->collect_spectral(out);
        return out;
    }

    Param<T>* embedding() noexcept { return embed_ ? &*embed_ : nullptr; }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

private:
    DiscriminatorConfig cfg_;
    std::vector<Conv2d<T>> convs_;
    std::vector<LeakyReLU<T>> acts_;
    Linear<T> score_;
    std::optional<Linear<T>> pretext_;
    std::optional<Param<T>> embed_;
    int final_channels_ = 0;
    int feature_dim_ = 0;
    Tensor<T> last_block_;
    std::array<int, 4> block_shape_{};
    Tensor<T> score_features_;
    std::vector<int> score_labels_;
};

template <class T>
class Generator {
public:
    Generator() = default;

    Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
        const int ups = detail::log2_exact(cfg.image_size, "Generator") - 2;
        start_channels_ = cfg.base_channels << (ups - 1);
        const int in = cfg.latent_dim + (cfg.num_classes > 0 ? cfg.class_embed_dim : 0);
        fc_ = Linear<T>("G.fc", in, start_channels_ * 16);
        bn0_ = BatchNorm2d<T>("G.bn0", start_channels_);
        int ch = start_channels_;
        for (int i = 0; i < ups; ++i) {
            const bool last = i + 1 == ups;
            const int out = last ? cfg.channels : ch / 2;
            up_.emplace_back("G.up" + std::to_string(i), ch, out, 4, 2, 1);
            if (!last) bns_.emplace_back("G.bn" + std::to_string(i + 1), out);
            ch = out;
        }
        relus_.resize(ups);
        if (cfg.num_classes > 0) embed_ = Param<T>("G.embed", cfg.num_classes, cfg.class_embed_dim);

        orthogonal_init(fc_.weight.param, rng);
        for (auto& u : up_) orthogonal_init(u.weight, rng);
        if (embed_) normal_init(*embed_, rng, 1.0);
    }

    const GeneratorConfig& config() const noexcept { return cfg_; }

    /// Maps N x latent_dim latents (plus class labels when conditional) to
    /// N x C x n x n images in [-1, 1].
    Tensor<T> forward(const Tensor<T>& z, const std::vector<int>* labels = nullptr) {
        detail::require(static_cast<int>(z.sample_size()) == cfg_.latent_dim, "Generator: latent size mismatch");
        detail::check_labels(labels, cfg_.num_classes, z.n(), "Generator");
        Tensor<T> in = z;
        if (embed_) {
            const int d = cfg_.latent_dim + cfg_.class_embed_dim;
            in = Tensor<T>::matrix(z.n(), d);
            for (int i = 0; i < z.n(); ++i) {
                std::copy_n(z.data() + std::size_t(i) * cfg_.latent_dim, cfg_.latent_dim, in.data() + std::size_t(i) * d);
                std::copy_n(embed_->value.data() + std::size_t((*labels)[i]) * cfg_.class_embed_dim, cfg_.class_embed_dim,
                            in.data() + std::size_t(i) * d + cfg_.latent_dim);
            }
            labels_ = *labels;
        }
        Tensor<T> h = fc_.forward(in, false);
        h.reshape(z.n(), start_channels_, 4, 4);
        h = relu0_.forward(bn0_.forward(h));
        for (std::size_t i = 0; i < up_.size(); ++i) {
            h = up_[i].forward(h);
            if (i < bns_.size()) h = relus_[i].forward(bns_[i].forward(h));
        }
        return tanh_.forward(h);
    }

    /// Accumulates parameter gradients for d(loss)/d(images); returns d(loss)/dz.
    Tensor<T> backward(const Tensor<T>& grad_images) {
        Tensor<T> g = tanh_.backward(grad_images);
        for (std::size_t i = up_.size(); i-- > 0;) {
            if (i < bns_.size()) g = bns_[i].backward(relus_[i].backward(g), true);
            g = up_[i].backward(g, true);
        }
        g = bn0_.backward(relu0_.backward(g), true);
        g.reshape(g.n(), start_channels_ * 16, 1, 1);
        Tensor<T> gin = fc_.backward(g, true);
        if (!embed_) return gin;
        const int d = cfg_.latent_dim + cfg_.class_embed_dim;
        Tensor<T> gz = Tensor<T>::matrix(gin.n(), cfg_.latent_dim);
        for (int i = 0; i < gin.n(); ++i) {
            std::copy_n(gin.data() + std::size_t(i) * d, cfg_.latent_dim, gz.data() + std::size_t(i) * cfg_.latent_dim);
            for (int j = 0; j < cfg_.class_embed_dim; ++j)
                embed_->grad[std::size_t(labels_[i]) * cfg_.class_embed_dim + j] += gin.data()[std::size_t(i) * d + cfg_.latent_dim + j];
        }
        return gz;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        fc_.collect(out);
        bn0_.collect(out);
        for (std::size_t i = 0; i < up_.size(); ++i) {
            up_[i].collect(out);
            if (i < bns_.size()) bns_[i].collect(out);
        }
        if (embed_) out.push_back(&*embed_);
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

private:
    GeneratorConfig cfg_;
    int start_channels_ = 0;
    Linear<T> fc_;
    BatchNorm2d<T> bn0_;
    ReLU<T> relu0_;
    std::vector<ConvTranspose2d<T>> up_;
    std::vector<BatchNorm2d<T>> bns_;
    std::vector<ReLU<T>> relus_;
    Tanh<T> tanh_;
    std::optional<Param<T>> embed_;
    std::vector<int> labels_;
};

/// Free-function forms of the two forward passes.
template <class T>
Tensor<T> generator_forward(Generator<T>& g, const Tensor<T>& z, const std::vector<int>* labels = nullptr) {
    return g.forward(z, labels);
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> discriminator_forward(Discriminator<T>& d, const Tensor<T>& x,
                                                      const std::vector<int>* labels = nullptr) {
    return d.forward(x, labels);
}

template <class T>
Tensor<T> sample_latents(int n, int dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor<T> z = Tensor<T>::matrix(n, dim);
    for (auto& v : z.storage()) v = static_cast<T>(normal(rng));
    return z;
}

}  // namespace dsgan
