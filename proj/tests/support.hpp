#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "facepad/image.hpp"
#include "facepad/random.hpp"
#include "facepad/run_config.hpp"

namespace facepad::testing {

// Fresh, empty directory under the build tree's test work area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(FACEPAD_TEST_WORK_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Image random_image(Rng& rng, int h, int w, int c = 3) {
  Image img(h, w, c);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

// A run small enough to train in a couple of seconds.
inline RunConfig tiny_run_config(const std::filesystem::path& dir, std::uint64_t seed, int workers = 1) {
  const std::string text = "manifest = data/manifest.jsonl\n"
                           "output_dir = run\n"
                           "seed = " + std::to_string(seed) + "\n"
                           "workers = " + std::to_string(workers) + "\n"
                           "input_size = 16x16\n"
                           "conv_blocks = 4x3s2,8x3s2\n"
                           "dense_units = 8\n"
                           "dropout_rate = 0.25\n"
                           "epochs = 2\n"
                           "batch_size = 8\n"
                           "dataset_subjects = 8\n"
                           "dataset_bonafide_per_subject = 3\n"
                           "dataset_attacks_per_subject = 3\n"
                           "dataset_image_size = 32\n"
                           "split_fractions = 0.5,0.25,0.25\n";
  return parse_run_config(text, dir);
}

}  // namespace facepad::testing
