#include "robusttc/task.hpp"

#include <stdexcept>

namespace robusttc {

namespace {

void check_split(const Task& task, const std::vector<LabeledExample>& split,
                 const char* name) {
  for (const auto& ex : split) {
    if (ex.label < 0 || ex.label >= task.num_labels)
      throw std::invalid_argument("task " + task.id + ": label out of range in " + name);
    if (ex.features.size() != task.dim)
      throw std::invalid_argument("task " + task.id + ": feature dimension mismatch in " + name);
  }
}

}  // namespace

void Task::validate(bool require_valid) const {
  if (num_labels < 1) throw std::invalid_argument("task " + id + ": needs at least one label");
  if (dim < 1) throw std::invalid_argument("task " + id + ": needs positive feature dimension");
  if (train.empty()) throw std::invalid_argument("task " + id + ": empty train split");
  if (require_valid && valid.empty())
    throw std::invalid_argument("task " + id + ": empty valid split");
  check_split(*this, train, "train");
  check_split(*this, valid, "valid");
  check_split(*this, test, "test");
}

void finalize_task(Task& task) {
  int max_label = -1;
  Index dim = 0;
  for (const auto* split : {&task.train, &task.valid, &task.test}) {
    for (const auto& ex : *split) {
      max_label = std::max(max_label, ex.label);
      if (dim == 0) dim = ex.features.size();
    }
  }
  task.num_labels = max_label + 1;
  task.dim = dim;
}

}  // namespace robusttc
