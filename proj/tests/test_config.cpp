#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dsgan/config.hpp"

using namespace dsgan;

TEST(Config, EmptyTextGivesHingeDefaults) {
    const auto c = parse_config("");
    const auto& t = c.train;
    EXPECT_EQ(t.objective, AdversarialKind::hinge);
    EXPECT_EQ(t.pretext, Pretext::deshuffle);
    EXPECT_DOUBLE_EQ(t.alpha, 1.0);
    EXPECT_DOUBLE_EQ(t.beta, 0.5);
    EXPECT_DOUBLE_EQ(t.lr, 2e-4);
    EXPECT_DOUBLE_EQ(t.adam_beta1, 0.0);
    EXPECT_DOUBLE_EQ(t.adam_beta2, 0.9);
    EXPECT_EQ(t.n_dis, 2);
    EXPECT_EQ(t.batch, 64);
    EXPECT_EQ(t.grid, 3);
    EXPECT_EQ(t.num_perms, 30);
    EXPECT_TRUE(t.spectral_norm);
    EXPECT_EQ(c.dataset, DatasetKind::synthetic);
    EXPECT_FALSE(c.conditional);
    EXPECT_EQ(t.num_classes, 0);
}

TEST(Config, ObjectiveSetsOptimiserDefaultsButExplicitKeysWin) {
    const auto r = parse_config("objective = ralsq\n");
    EXPECT_DOUBLE_EQ(r.train.adam_beta1, 0.5);
    EXPECT_DOUBLE_EQ(r.train.adam_beta2, 0.999);
    EXPECT_EQ(r.train.n_dis, 1);
    EXPECT_FALSE(r.train.spectral_norm);
    const auto o = parse_config("adam_beta1 = 0.3\nobjective = standard\nn_dis = 3\n");
    EXPECT_DOUBLE_EQ(o.train.adam_beta1, 0.3);
    EXPECT_EQ(o.train.n_dis, 3);
}

TEST(Config, TwoByTwoGridUsesAllPermutations) {
    EXPECT_EQ(parse_config("grid = 2").train.num_perms, 24);
    EXPECT_THROW(parse_config("grid = 2\nnum_perms = 10"), ConfigError);
}

TEST(Config, CommentsAndWhitespaceAreIgnored) {
    const auto c = parse_config("  # header\n\n lr =  0.001   # trailing\nconditional=true\n");
    EXPECT_DOUBLE_EQ(c.train.lr, 0.001);
    EXPECT_TRUE(c.conditional);
    EXPECT_EQ(c.train.num_classes, c.scene_classes);
}

TEST(Config, TextRoundTrip) {
    const auto c = parse_config("objective = lsq\npretext = rotate\nbeta = 0.25\nseed = 17\nimage_size = 16\nscene_style = portrait\n");
    const auto back = parse_config(c.to_text());
    EXPECT_EQ(back, c);
    EXPECT_EQ(back.to_text(), c.to_text());
    EXPECT_EQ(back.train.pretext, Pretext::rotate);
    EXPECT_EQ(back.scene_style, SceneStyle::portrait);
}

TEST(Config, RejectsUnknownAndMalformedInput) {
    EXPECT_THROW(parse_config("learning_rate = 1"), ConfigError);
    EXPECT_THROW(parse_config("lr"), ConfigError);
    EXPECT_THROW(parse_config("= 3"), ConfigError);
    EXPECT_THROW(parse_config("lr = 1\nlr = 2"), ConfigError);
    EXPECT_THROW(parse_config("batch = many"), ConfigError);
    EXPECT_THROW(parse_config("batch = 12abc"), ConfigError);
    EXPECT_THROW(parse_config("conditional = maybe"), ConfigError);
    EXPECT_THROW(parse_config("objective = wgan"), ConfigError);
    EXPECT_THROW(parse_config("pretext = colorize"), ConfigError);
    EXPECT_THROW(parse_config("dataset = imagenet"), ConfigError);
}

TEST(Config, RejectsInvariantViolations) {
    EXPECT_THROW(parse_config("n_dis = 0"), ConfigError);
    EXPECT_THROW(parse_config("lr = -1"), ConfigError);
    EXPECT_THROW(parse_config("beta = -0.5"), ConfigError);
    EXPECT_THROW(parse_config("image_size = 4"), ConfigError);
    EXPECT_THROW(parse_config("scene_count = 1"), ConfigError);
    EXPECT_THROW(parse_config("dataset = folder"), ConfigError);
    EXPECT_THROW(parse_config("dataset_path = /definitely/not/here"), ConfigError);
}

TEST(Config, FolderPathIsNormalised) {
    const auto dir = std::filesystem::temp_directory_path() / "dsgan_cfg_folder";
    std::filesystem::create_directories(dir);
    const auto c = parse_config("dataset_path = " + dir.string() + "/./");
    EXPECT_EQ(c.dataset, DatasetKind::folder);
    EXPECT_TRUE(std::filesystem::path(c.dataset_path).is_absolute());
    EXPECT_EQ(std::filesystem::path(c.dataset_path).lexically_normal(), std::filesystem::path(c.dataset_path));
}

TEST(Config, LoadsFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "dsgan_cfg_test.cfg";
    {
        std::ofstream os(path);
        os << "iters = 123\nbatch = 16\n";
    }
    const auto c = load_config(path.string());
    EXPECT_EQ(c.train.iters, 123);
    EXPECT_EQ(c.train.batch, 16);
    EXPECT_THROW(load_config((path.parent_path() / "missing.cfg").string()), ConfigError);
}
