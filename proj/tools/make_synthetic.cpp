/*
 * Copyright 2026 The metarec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Writes a synthetic meta-dataset, for demos and load testing.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "metarec.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic meta-dataset"};
  metarec::SyntheticOptions opt;
  std::string out = "synthetic_metadataset.json";
  app.add_option("-n,--records", opt.num_records, "Number of records");
  app.add_option("-d,--datasets", opt.num_datasets, "Number of distinct source datasets");
  app.add_option("--seed", opt.seed, "Random seed");
  app.add_option("--noise", opt.noise, "Std-dev of accuracy noise");
  app.add_option("-o,--out", out, "Output path");
  CLI11_PARSE(app, argc, argv);
  try {
    metarec::save(metarec::make_synthetic_dataset(opt), out);
  } catch (const metarec::Error& e) {
    std::cerr << "metarec-synth: " << e.what() << "\n";
    return metarec::exit_code_for(e.code());
  }
  std::cout << "wrote " << opt.num_records << " records to " << out << "\n";
  return 0;
}
