#pragma once

// Alternating discriminator / generator updates with an optional pretext task.
//
// Discriminator step: realness scores on X_real and X_fake (D1 only), pretext
// logits on the rearranged real batch only (D2 only). Generator step: fresh
// fakes, realness scores on X_fake, pretext logits on rearranged fakes with the
// gradient scattered back through the rearrangement map.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dsgan/data.hpp"
#include "dsgan/nets.hpp"
#include "dsgan/objectives.hpp"
#include "dsgan/optim.hpp"
#include "dsgan/permute.hpp"
#include "dsgan/shuffler.hpp"

namespace dsgan {

enum class Pretext { none, deshuffle, rotate };

inline std::string_view to_string(Pretext p) {
    switch (p) {
        case Pretext::none: return "none";
        case Pretext::deshuffle: return "deshuffle";
        case Pretext::rotate: return "rotate";
    }
    return "?";
}

inline Pretext parse_pretext(std::string_view s) {
    if (s == "none") return Pretext::none;
    if (s == "deshuffle") return Pretext::deshuffle;
    if (s == "rotate") return Pretext::rotate;
    throw std::invalid_argument("unknown pretext '" + std::string(s) + "'");
}

struct TrainConfig {
    AdversarialKind objective = AdversarialKind::hinge;
    Pretext pretext = Pretext::deshuffle;
    double alpha = 1.0;
    double beta = 0.5;
    double lr = 2e-4;
    double adam_beta1 = 0.0;
    double adam_beta2 = 0.9;
    int n_dis = 2;
    int batch = 64;
    long iters = 200000;
    int grid = 3;
    int num_perms = 30;
    std::uint64_t seed = 1;       // model init, latents, pretext labels
    std::uint64_t data_seed = 1;  // batch order
    std::uint64_t perm_seed = 1;  // permutation-set construction
    long eval_every = 0;          // 0: evaluate only at the end
    long checkpoint_every = 0;    // 0: checkpoint only at the end

    int image_size = 32;
    int channels = 3;
    int base_channels = 16;
    int latent_dim = 128;
    int num_classes = 0;  // > 0: conditional generator and projection discriminator
    bool spectral_norm = true;

    int pretext_classes() const {
        switch (pretext) {
            case Pretext::none: return 0;
            case Pretext::rotate: return 4;
            case Pretext::deshuffle: return num_perms;
        }
        return 0;
    }

    void validate() const {
        detail::require(n_dis >= 1, "n_dis must be >= 1");
        detail::require(batch >= 2, "batch must be >= 2");
        detail::require(lr > 0, "lr must be > 0");
        detail::require(alpha >= 0 && beta >= 0, "alpha and beta must be >= 0");
        detail::require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
                        "adam betas must lie in [0, 1)");
        detail::require(iters >= 0, "iters must be >= 0");
        detail::require(grid == 2 || grid == 3, "grid must be 2 or 3");
        detail::require(grid == 3 || num_perms == 24, "2x2 grid uses all 24 permutations (num_perms must be 24)");
        detail::require(num_perms >= 2 && num_perms <= 362880, "num_perms must be in [2, 9!]");
        detail::require(image_size >= 8, "image_size must be >= 8");
        detail::require(channels == 1 || channels == 3, "channels must be 1 or 3");
        detail::require(base_channels >= 1 && latent_dim >= 1, "base_channels and latent_dim must be positive");
        detail::require(num_classes >= 0, "num_classes must be >= 0");
        detail::require(eval_every >= 0 && checkpoint_every >= 0, "eval_every and checkpoint_every must be >= 0");
    }
};

/// Objective-dependent defaults: the spectrally normalised hinge setting uses
/// Adam (0, 0.9) with two D steps per G step; the others use (0.5, 0.999) and
/// one D step without spectral normalisation.
inline void apply_objective_defaults(TrainConfig& cfg) {
    if (cfg.objective == AdversarialKind::hinge) {
        cfg.adam_beta1 = 0.0;
        cfg.adam_beta2 = 0.9;
        cfg.n_dis = 2;
        cfg.spectral_norm = true;
    } else {
        cfg.adam_beta1 = 0.5;
        cfg.adam_beta2 = 0.999;
        cfg.n_dis = 1;
        cfg.spectral_norm = false;
    }
}

struct MetricRecord {
    long iter = 0;
    double L_theta = 0;
    double L_phi = 0;
    std::optional<double> V_theta;
    std::optional<double> V_phi;
    std::optional<double> fid;
    std::optional<double> deshuffle_acc;
    std::optional<double> probe_acc;
};

namespace detail {

inline Rng stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(tag)};
    return Rng(seq);
}

template <class T>
Tensor<T> column(std::span<const T> v) {
    Tensor<T> t = Tensor<T>::matrix(static_cast<int>(v.size()), 1);
    std::copy(v.begin(), v.end(), t.data());
    return t;
}

}  // namespace detail

template <class T>
class Trainer {
public:
    /// Everything a discriminator update consumes, sampled up front so the same
    /// batch can be re-evaluated.
    struct DBatch {
        Tensor<T> real;
        std::vector<int> real_labels;
        Tensor<T> fake;
        std::vector<int> fake_labels;
        std::optional<RearrangedBatch<T>> pretext_real;
    };

    struct GBatch {
        Tensor<T> z;
        std::vector<int> fake_labels;
        Tensor<T> real;  // only for objectives whose G loss depends on real scores
        std::vector<int> real_labels;
        std::vector<int> pretext_labels;
    };

    struct Outcome {
        double adversarial = 0;
        std::optional<double> pretext;
        int pretext_real_rows = 0;  // rows of rearranged real images fed to D2
        int pretext_fake_rows = 0;  // rows of rearranged fake images fed to D2
        double total = 0;
    };

    Trainer(const TrainConfig& cfg, std::shared_ptr<const Dataset<T>> data) : cfg_(cfg), data_(std::move(data)) {
        cfg_.validate();
        detail::require(data_ && data_->size() > 0, "Trainer: empty dataset");
        detail::require(data_->images.c() == cfg_.channels && data_->images.h() == cfg_.image_size,
                        "Trainer: dataset images do not match image_size/channels");
        if (cfg_.num_classes > 0)
            detail::require(data_->labelled() && data_->num_classes == cfg_.num_classes,
                            "Trainer: conditional training needs labels for every class");
        if (cfg_.pretext == Pretext::deshuffle) perms_ = permutation_set_for_grid(cfg_.grid, cfg_.num_perms, cfg_.perm_seed);

        Rng init = detail::stream(cfg_.seed, 1);
        GeneratorConfig gc{cfg_.image_size, cfg_.channels, cfg_.base_channels, cfg_.latent_dim, cfg_.num_classes, 32};
        DiscriminatorConfig dc{cfg_.image_size, cfg_.channels, cfg_.base_channels, cfg_.pretext_classes(), cfg_.num_classes,
                               cfg_.spectral_norm};
        g_ = Generator<T>(gc, init);
        d_ = Discriminator<T>(dc, init);
        noise_rng_ = detail::stream(cfg_.seed, 2);
        pretext_rng_ = detail::stream(cfg_.seed, 3);
        sampler_ = BatchSampler(data_->size(), cfg_.data_seed);
    }

    const TrainConfig& config() const noexcept { return cfg_; }
    Generator<T>& generator() noexcept { return g_; }
    Discriminator<T>& discriminator() noexcept { return d_; }
    const PermutationSet& permutations() const noexcept { return perms_; }
    const Dataset<T>& dataset() const noexcept { return *data_; }
    long iteration() const noexcept { return iter_; }

    // -- state for checkpointing ------------------------------------------------
    AdamState<T>& adam_d() noexcept { return adam_d_; }
    AdamState<T>& adam_g() noexcept { return adam_g_; }
    Rng& noise_rng() noexcept { return noise_rng_; }
    Rng& pretext_rng() noexcept { return pretext_rng_; }
    BatchSampler& sampler() noexcept { return sampler_; }
    void set_iteration(long it) noexcept { iter_ = it; }

    AdamConfig adam_config() const { return {cfg_.lr, cfg_.adam_beta1, cfg_.adam_beta2, 1e-8}; }

    // -- discriminator ----------------------------------------------------------

    DBatch sample_d_batch() {
        const auto idx = sampler_.next(cfg_.batch);
        Tensor<T> real = gather_images(data_->images, idx);
        std::vector<int> labels = cfg_.num_classes > 0 ? gather_labels(data_->labels, idx) : std::vector<int>{};
        return make_d_batch(std::move(real), std::move(labels));
    }

    /// Builds a D batch around a caller-provided real batch (fakes and pretext
    /// labels still come from the trainer's streams).
    DBatch make_d_batch(Tensor<T> real, std::vector<int> real_labels) {
        DBatch b;
        b.real = std::move(real);
        b.real_labels = std::move(real_labels);
        const int n = b.real.n();
        const Tensor<T> z = sample_latents<T>(n, cfg_.latent_dim, noise_rng_);
        b.fake_labels = sample_classes(n);
        b.fake = g_.forward(z, labels_or_null(b.fake_labels));
        b.pretext_real = rearrange(b.real);
        return b;
    }

    /// L_theta + alpha * V_theta on a fixed batch. With `backward`, D gradients
    /// are accumulated (after zeroing).
    Outcome d_objective(const DBatch& b, bool backward, bool advance_spectral) {
        const int n = b.real.n(), nf = b.fake.n();
        Outcome out;
        const bool with_pretext = b.pretext_real.has_value();
        const Tensor<T> input = with_pretext ? concat_batch<T>({&b.real, &b.fake, &b.pretext_real->data})
                                             : concat_batch<T>({&b.real, &b.fake});
        if (backward) d_.zero_grad();
        const Tensor<T> feats = d_.trunk(input, advance_spectral);

        std::vector<int> score_labels;
        if (cfg_.num_classes > 0) {
            score_labels = b.real_labels;
            score_labels.insert(score_labels.end(), b.fake_labels.begin(), b.fake_labels.end());
        }
        const Tensor<T> scores = d_.score_head(feats.slice(0, n + nf), labels_or_null(score_labels), advance_spectral);
        const std::span<const T> sv = scores.values();
        const auto adv = adversarial_loss<T>(cfg_.objective, sv.subspan(0, n), sv.subspan(n, nf));
        out.adversarial = static_cast<double>(adv.d);
        out.total = out.adversarial;

        Tensor<T> grad_logits;
        if (with_pretext) {
            const Tensor<T> logits = d_.pretext_head(feats.slice(n + nf, 2 * n + nf), advance_spectral);
            auto ce = deshuffle_loss_d<T>(logits, b.pretext_real->labels);
            out.pretext = static_cast<double>(ce.value);
            out.pretext_real_rows = logits.n();
            out.total += cfg_.alpha * *out.pretext;
            for (auto& g : ce.grad.storage()) g *= static_cast<T>(cfg_.alpha);
            grad_logits = std::move(ce.grad);
        }
        if (!backward) return out;

        std::vector<T> gs(adv.d_wrt_real);
        gs.insert(gs.end(), adv.d_wrt_fake.begin(), adv.d_wrt_fake.end());
        const Tensor<T> g_score_feats = d_.score_head_backward(detail::column<T>(gs), true);
        Tensor<T> g_feats = g_score_feats;
        if (with_pretext) {
            const Tensor<T> g_pre = d_.pretext_head_backward(grad_logits, true);
            g_feats = concat_batch<T>({&g_score_feats, &g_pre});
        }
        d_.trunk_backward(std::move(g_feats), true, false);
        return out;
    }

    /// One discriminator update on a sampled batch.
    Outcome train_step_d() { return apply_d(sample_d_batch()); }

    Outcome train_step_d(Tensor<T> real, std::vector<int> real_labels = {}) {
        return apply_d(make_d_batch(std::move(real), std::move(real_labels)));
    }

    // -- generator --------------------------------------------------------------

    GBatch sample_g_batch() {
        GBatch b;
        b.z = sample_latents<T>(cfg_.batch, cfg_.latent_dim, noise_rng_);
        b.fake_labels = sample_classes(cfg_.batch);
        if (cfg_.objective == AdversarialKind::ralsq) {
            const auto idx = sampler_.next(cfg_.batch);
            b.real = gather_images(data_->images, idx);
            if (cfg_.num_classes > 0) b.real_labels = gather_labels(data_->labels, idx);
        }
        if (cfg_.pretext != Pretext::none) b.pretext_labels = draw_pretext_labels(cfg_.batch);
        return b;
    }

    /// L_phi + beta * V_phi on a fixed batch; D is evaluated without advancing
    /// its power iteration and its parameters receive no gradient.
    /// `adversarial_part`/`pretext_part` select which terms contribute gradient.
    Outcome g_objective(const GBatch& b, bool backward, bool adversarial_part = true, bool pretext_part = true) {
        const int n = b.z.n();
        Outcome out;
        if (backward) g_.zero_grad();
        const Tensor<T> fake = g_.forward(b.z, labels_or_null(b.fake_labels));
        const bool has_real = !b.real.empty();
        const bool with_pretext = cfg_.pretext != Pretext::none;
        // With beta = 0 the rearranged fakes stay out of the differentiated
        // pass so the update matches a run without a pretext task exactly.
        const bool pretext_in_graph = with_pretext && pretext_part && cfg_.beta > 0;

        std::optional<RearrangedBatch<T>> rearranged;
        if (with_pretext) rearranged = rearrange_with(fake, b.pretext_labels);

        const int nr = has_real ? b.real.n() : 0;
        const Tensor<T> input = pretext_in_graph ? concat_batch<T>({&b.real, &fake, &rearranged->data})
                                                 : concat_batch<T>({&b.real, &fake});
        const Tensor<T> feats = d_.trunk(input, false);
        std::vector<int> score_labels;
        if (cfg_.num_classes > 0) {
            score_labels = b.real_labels;
            score_labels.insert(score_labels.end(), b.fake_labels.begin(), b.fake_labels.end());
        }
        const Tensor<T> scores = d_.score_head(feats.slice(0, nr + n), labels_or_null(score_labels), false);
        const std::span<const T> sv = scores.values();
        // G-side losses other than the relativistic one ignore the real scores.
        const auto real_scores = has_real ? sv.subspan(0, nr) : sv.subspan(nr, n);
        const auto adv = adversarial_loss<T>(cfg_.objective, real_scores, sv.subspan(nr, n));
        out.adversarial = static_cast<double>(adv.g);
        out.total = out.adversarial;

        Tensor<T> grad_logits;
        if (pretext_in_graph) {
            const Tensor<T> logits = d_.pretext_head(feats.slice(nr + n, nr + 2 * n), false);
            auto ce = deshuffle_loss_g<T>(logits, rearranged->labels);
            out.pretext = static_cast<double>(ce.value);
            out.pretext_fake_rows = logits.n();
            for (auto& g : ce.grad.storage()) g *= static_cast<T>(cfg_.beta);
            grad_logits = std::move(ce.grad);
            out.total += cfg_.beta * *out.pretext;
        }
        // Logged-only V_phi runs its own trunk pass, so it must follow the backward pass.
        auto finish = [&] {
            if (with_pretext && !pretext_in_graph) {
                out.pretext = pretext_loss_only(*rearranged);
                out.total += cfg_.beta * *out.pretext;
            }
            return out;
        };
        if (!backward) return finish();

        std::vector<T> gs(static_cast<std::size_t>(nr + n), T(0));
        if (adversarial_part)
            for (int j = 0; j < n; ++j) gs[nr + j] = adv.g_wrt_fake[j];
        const Tensor<T> g_score_feats = d_.score_head_backward(detail::column<T>(gs), false);
        Tensor<T> g_feats = g_score_feats;
        if (pretext_in_graph) {
            const Tensor<T> g_pre = d_.pretext_head_backward(grad_logits, false);
            g_feats = concat_batch<T>({&g_score_feats, &g_pre});
        }
        const Tensor<T> g_input = d_.trunk_backward(std::move(g_feats), false, true);
        Tensor<T> g_fake = g_input.slice(nr, nr + n);
        if (pretext_in_graph) {
            const Tensor<T> g_re = rearrange_backward(*rearranged, g_input.slice(nr + n, nr + 2 * n));
            for (std::size_t i = 0; i < g_fake.size(); ++i) g_fake.storage()[i] += g_re.storage()[i];
        }
        g_.backward(g_fake);
        return finish();
    }

    Outcome train_step_g() {
        const GBatch b = sample_g_batch();
        Outcome out = g_objective(b, true);
        check_finite(out, "generator");
        auto params = g_.params();
        adam_step<T>(params, adam_g_, adam_config());
        return out;
    }

    // -- loop -------------------------------------------------------------------

    struct Hooks {
        std::function<void(Trainer&, MetricRecord&)> evaluate;  // fills fid / accuracies
        std::function<std::string(Trainer&)> checkpoint;        // returns the written path
        std::function<void(const MetricRecord&)> record;        // called once per iteration
    };

    /// Runs the remaining iterations up to cfg.iters: n_dis D steps, then one G step.
    std::vector<MetricRecord> run(const Hooks& hooks = {}) {
        std::vector<MetricRecord> log;
        while (iter_ < cfg_.iters) {
            ++iter_;
            MetricRecord rec;
            rec.iter = iter_;
            double l_theta = 0, v_theta = 0;
            bool have_v = false;
            for (int k = 0; k < cfg_.n_dis; ++k) {
                const Outcome o = train_step_d();
                l_theta += o.adversarial / cfg_.n_dis;
                if (o.pretext) {
                    v_theta += *o.pretext / cfg_.n_dis;
                    have_v = true;
                }
            }
            rec.L_theta = l_theta;
            if (have_v) rec.V_theta = v_theta;
            const Outcome og = train_step_g();
            rec.L_phi = og.adversarial;
            rec.V_phi = og.pretext;

            const bool last = iter_ == cfg_.iters;
            if (hooks.evaluate && ((cfg_.eval_every > 0 && iter_ % cfg_.eval_every == 0) || last)) hooks.evaluate(*this, rec);
            if (hooks.checkpoint && ((cfg_.checkpoint_every > 0 && iter_ % cfg_.checkpoint_every == 0) || last))
                last_checkpoint_ = hooks.checkpoint(*this);
            if (hooks.record) hooks.record(rec);
            log.push_back(rec);
        }
        return log;
    }

    const std::string& last_checkpoint() const noexcept { return last_checkpoint_; }
    void set_last_checkpoint(std::string p) { last_checkpoint_ = std::move(p); }

    /// Samples `count` generator outputs (in batches of cfg.batch, BN uses the
    /// statistics of each batch) from a dedicated stream.
    Tensor<T> sample_images(int count, Rng& rng, std::vector<int>* labels_out = nullptr) {
        Tensor<T> out(count, cfg_.channels, cfg_.image_size, cfg_.image_size);
        std::uniform_int_distribution<int> cls(0, std::max(cfg_.num_classes - 1, 0));
        for (int start = 0; start < count; start += cfg_.batch) {
            const int n = cfg_.batch;
            const Tensor<T> z = sample_latents<T>(n, cfg_.latent_dim, rng);
            std::vector<int> y;
            if (cfg_.num_classes > 0)
                for (int i = 0; i < n; ++i) y.push_back(cls(rng));
            const Tensor<T> x = g_.forward(z, labels_or_null(y));
            const int take = std::min(n, count - start);
            std::copy_n(x.data(), take * x.sample_size(), out.data() + start * out.sample_size());
            if (labels_out) labels_out->insert(labels_out->end(), y.begin(), y.begin() + (y.empty() ? 0 : take));
        }
        return out;
    }

private:
    Outcome apply_d(const DBatch& b) {
        Outcome out = d_objective(b, true, true);
        check_finite(out, "discriminator");
        auto params = d_.params();
        adam_step<T>(params, adam_d_, adam_config());
        return out;
    }

    void check_finite(const Outcome& o, const char* who) const {
        if (!std::isfinite(o.total))
            throw NumericalError(std::string(who) + " loss is not finite at iteration " + std::to_string(iter_) +
                                     (last_checkpoint_.empty() ? "" : "; last good checkpoint: " + last_checkpoint_),
                                 last_checkpoint_);
    }

    const std::vector<int>* labels_or_null(const std::vector<int>& y) const {
        return cfg_.num_classes > 0 ? &y : nullptr;
    }

    std::vector<int> sample_classes(int n) {
        if (cfg_.num_classes == 0) return {};
        std::uniform_int_distribution<int> pick(0, cfg_.num_classes - 1);
        std::vector<int> y(n);
        for (auto& v : y) v = pick(noise_rng_);
        return y;
    }

    std::vector<int> draw_pretext_labels(int n) {
        std::uniform_int_distribution<int> pick(0, cfg_.pretext_classes() - 1);
        std::vector<int> y(n);
        for (auto& v : y) v = pick(pretext_rng_);
        return y;
    }

    std::optional<RearrangedBatch<T>> rearrange(const Tensor<T>& x) {
        if (cfg_.pretext == Pretext::none) return std::nullopt;
        return rearrange_with(x, draw_pretext_labels(x.n()));
    }

    RearrangedBatch<T> rearrange_with(const Tensor<T>& x, std::vector<int> labels) const {
        if (cfg_.pretext == Pretext::rotate) return rotate_batch(x, std::move(labels));
        return shuffle_batch(x, perms_, std::move(labels));
    }

    double pretext_loss_only(const RearrangedBatch<T>& r) {
        const Tensor<T> logits = d_.pretext_head(d_.trunk(r.data, false), false);
        return static_cast<double>(softmax_cross_entropy<T>(logits, r.labels).value);
    }

    TrainConfig cfg_;
    std::shared_ptr<const Dataset<T>> data_;
    PermutationSet perms_;
    Generator<T> g_;
    Discriminator<T> d_;
    AdamState<T> adam_d_, adam_g_;
    Rng noise_rng_, pretext_rng_;
    BatchSampler sampler_;
    long iter_ = 0;
    std::string last_checkpoint_;
};

}  // namespace dsgan
