// Writes a self-contained scripted-backend demo fixture (dataset, script,
// config, data copies) so the pipeline can be exercised offline:
//   samner-make-fixture <output-dir> [data-dir]
#include <iostream>

#include "../tests/support/mock_fixture.hpp"

#ifndef SAMNER_DATA_DIR
#define SAMNER_DATA_DIR "data"
#endif

int main(int argc, char** argv) {
  if (argc < 2 || argc > 3) {
    std::cerr << "usage: samner-make-fixture <output-dir> [data-dir]\n";
    return 2;
  }
  const std::string out_dir = argv[1];
  const std::string data_dir = argc == 3 ? argv[2] : SAMNER_DATA_DIR;
  try {
    const auto paths = samner::testsupport::write_demo_fixture(out_dir, data_dir);
    std::cout << "fixture written:\n  config:  " << paths.config << "\n  dataset: " << paths.dataset
              << "\n  script:  " << paths.script << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
