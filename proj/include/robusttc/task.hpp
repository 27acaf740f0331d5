#pragma once

#include "robusttc/types.hpp"

#include <string>
#include <vector>

namespace robusttc {

struct LabeledExample {
  int label = 0;
  Vector features;
};

/// A labeled dataset with train/valid/test splits over fixed-length feature
/// vectors. Few-shot target tasks may have an empty valid split.
struct Task {
  std::string id;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> valid;
  std::vector<LabeledExample> test;
  int num_labels = 0;
  Index dim = 0;

  void validate(bool require_valid = true) const;
};

/// Infers num_labels and dim from the examples; labels must be a contiguous
/// range starting at 0 within each split union.
void finalize_task(Task& task);

}  // namespace robusttc
