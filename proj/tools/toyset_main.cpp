// Writes the synthetic toy dataset splits to disk (PPM images + labels.csv),
// for CLI demos and for training the bundled toy classifier.
#include "scratch/io.hpp"
#include "scratch/toy.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic 16x16 3-class toy dataset"};
    std::string out_dir = "data/toy";
    std::string split = "train";
    int count = 600;
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--split", split, "train|test|attack (fixes the seed base)");
    app.add_option("--count", count, "Number of images");
    CLI11_PARSE(app, argc, argv);

    std::uint64_t seed_base;
    if (split == "train") seed_base = scratch::toy::kTrainSeed;
    else if (split == "test") seed_base = scratch::toy::kTestSeed;
    else if (split == "attack") seed_base = scratch::toy::kAttackSeed;
    else {
        std::cerr << "unknown split '" << split << "'\n";
        return 2;
    }

    try {
        fs::create_directories(out_dir);
        std::ofstream labels(fs::path(out_dir) / "labels.csv");
        for (int i = 0; i < count; ++i) {
            int cls = i % scratch::toy::kClasses;
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%04d.ppm", split.c_str(), i);
            scratch::save_ppm(scratch::toy::toy_image(cls, seed_base + i),
                              (fs::path(out_dir) / name).string());
            labels << name << ',' << cls << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cout << "wrote " << count << " " << split << " images to " << out_dir << "\n";
    return 0;
}
