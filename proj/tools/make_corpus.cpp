// Copyright 2026 The ILC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Writes a deterministic procedural PNG corpus (training and held-out splits).

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ilc/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a procedural PNG corpus"};
  std::string out;
  int count = 500, heldout = 24, size = 128, heldout_size = 256;
  std::uint64_t seed = 1;
  app.add_option("-o,--output", out, "output root (train/ and heldout/ are created)")->required();
  app.add_option("--count", count, "training images")->check(CLI::NonNegativeNumber);
  app.add_option("--heldout", heldout, "held-out images")->check(CLI::NonNegativeNumber);
  app.add_option("--size", size, "training image side")->check(CLI::PositiveNumber);
  app.add_option("--heldout-size", heldout_size, "held-out image side")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "corpus seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    const std::filesystem::path root(out);
    auto emit = [&](const std::string& split, int n, int side, std::uint64_t base) {
      const auto dir = root / split;
      std::filesystem::create_directories(dir);
      char name[32];
      for (int i = 0; i < n; ++i) {
        std::snprintf(name, sizeof name, "%05d.png", i);
        ilc::write_png(dir / name, ilc::synthetic_image(side, side, base + static_cast<std::uint64_t>(i)));
      }
    };
    emit("train", count, size, seed * 1000003ULL);
    emit("heldout", heldout, heldout_size, seed * 1000003ULL + 500000ULL);
    std::cout << "wrote " << count << " training and " << heldout << " held-out images to " << out
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
