#pragma once

#include <vector>

#include "pxmc/param_tree.hpp"

namespace pxmc {

struct Sample {
  ParamTree params;    // merged weights (l<k>.W, l<k>.b) for network chains
  Index cycle = 0;     // 1-based cycle that produced the sample
  Index step = 0;      // number of updates taken when collected
  double phase = 0.0;  // mod(t, T) / T of the last update

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct SampleSet {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

}  // namespace pxmc
