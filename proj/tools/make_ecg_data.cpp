// Regenerates the bundled synthetic ECG records in the text sample format.
// Usage: make-ecg-data <output-dir> [samples]

#include <cstdio>
#include <string>
#include <vector>

#include "encrust/bench.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: make-ecg-data <output-dir> [samples]\n");
    return 2;
  }
  const std::string dir = argv[1];
  const int samples = argc > 2 ? std::atoi(argv[2]) : 8192;
  const std::vector<std::string> ids = {"100", "104", "111", "210", "230"};
  for (const std::string& id : ids) {
    const encrust::EcgRecord record = encrust::synthesize_ecg(id, samples);
    const std::string path = dir + "/" + id + ".txt";
    encrust::save_ecg(record, path);
    std::printf("wrote %s (%zu samples)\n", path.c_str(),
                record.samples.size());
  }
  return 0;
}
