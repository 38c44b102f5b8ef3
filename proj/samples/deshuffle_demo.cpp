// Library walkthrough: render scenes, shuffle and restore them, then train a
// small model for a few hundred iterations and measure deshuffle accuracy.
//
//   deshuffle_demo [output_dir]

#include <cstdio>
#include <filesystem>
#include <memory>

#include "dsgan/data.hpp"
#include "dsgan/eval.hpp"
#include "dsgan/image_io.hpp"
#include "dsgan/shuffler.hpp"
#include "dsgan/train.hpp"

using namespace dsgan;

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "deshuffle_demo";
    std::filesystem::create_directories(out);

    const Dataset<float> scenes = generate_synthetic_dataset({.image_size = 32, .seed = 1}, 2048);
    const PermutationSet perms = select_max_hamming_set(9, 30, 1);
    std::printf("%d permutations, min pairwise Hamming distance %d\n", perms.size(), perms.min_pairwise_hamming());

    Rng rng(2);
    const Tensor<float> first = scenes.images.slice(0, 8);
    const auto shuffled = shuffle_batch(first, perms, rng);
    save_image_grid((out / "original.png").string(), first);
    save_image_grid((out / "shuffled.png").string(), shuffled.data);
    save_image_grid((out / "restored.png").string(), deshuffle_batch(shuffled, perms));

    TrainConfig cfg;
    cfg.batch = 32;
    cfg.iters = 300;
    cfg.base_channels = 8;
    auto train = std::make_shared<const Dataset<float>>(scenes.subset(0, 1536));
    const Dataset<float> heldout = scenes.subset(1536, 2048);
    Trainer<float> trainer(cfg, train);
    Trainer<float>::Hooks hooks;
    hooks.record = [](const MetricRecord& r) {
        if (r.iter % 50 == 0) std::printf("iter %4ld  L_theta %.4f  L_phi %.4f  V_theta %.4f\n", r.iter, r.L_theta, r.L_phi, *r.V_theta);
    };
    trainer.run(hooks);

    Rng eval_rng(3);
    const auto acc = deshuffle_accuracy(trainer.discriminator(), heldout.images, trainer.permutations(), eval_rng);
    std::printf("held-out deshuffle accuracy %.3f +/- %.3f (chance %.3f)\n", acc.accuracy, acc.ci95(), 1.0 / perms.size());

    Rng sample_rng(4);
    save_image_grid((out / "samples.png").string(), trainer.sample_images(32, sample_rng));
    std::printf("wrote images to %s\n", out.c_str());
}
