// Writes the shipped synthetic assets: disk benchmark, two-blob scene, and the
// 20-image evaluation corpus with exact masks.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rmpd/image.hpp"
#include "rmpd/synthetic.hpp"

namespace fs = std::filesystem;
using namespace rmpd;

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: rmpd_make_assets <data-dir>\n";
        return 2;
    }
    const fs::path root(argv[1]);
    try {
        fs::create_directories(root / "corpus" / "images");
        fs::create_directories(root / "corpus" / "masks");

        const auto disk = synthetic::disk_scene(64, 64, 32.0, 32.0, 16.0);
        save_image(disk.image, root / "disk.png");
        save_mask(disk.mask, root / "disk_mask.png");

        const auto blobs = synthetic::two_blob_scene();
        save_image(blobs.image, root / "two_blob.png");
        save_mask(blobs.blob_a, root / "two_blob_a.png");
        save_mask(blobs.blob_b, root / "two_blob_b.png");

        for (std::size_t i = 0; i < 20; ++i) {
            char stem[16];
            std::snprintf(stem, sizeof stem, "item_%02zu", i);
            const auto scene = synthetic::corpus_scene(i);
            save_image(scene.image, root / "corpus" / "images" / (std::string(stem) + ".png"));
            save_mask(scene.mask, root / "corpus" / "masks" / (std::string(stem) + ".png"));
        }

        const auto target = synthetic::corpus_target();
        std::ofstream cfg(root / "corpus" / "corpus.cfg");
        cfg << "# oracle settings matching the corpus objects; use with --config\n"
            << "classifier=oracle:area-fraction\n"
            << "class=1\n"
            << "target-color=" << target.color[0] << "," << target.color[1] << "," << target.color[2] << "\n"
            << "tolerance=" << target.tolerance << "\n"
            << "reference-fraction=" << target.reference_fraction << "\n";
    } catch (const std::exception& e) {
        std::cerr << "rmpd_make_assets: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
