#include "robusttc/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace robusttc {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_scalar(const std::string& s, Scalar& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool looks_like_header(const std::string& line) {
  auto fields = split_fields(line);
  if (fields.empty()) return false;
  Scalar v;
  return fields[0] != "NA" && !parse_scalar(fields[0], v);
}

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path,
                                                    bool skip_header_if_present) {
  auto in = open_in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && skip_header_if_present && looks_like_header(line)) {
      first = false;
      continue;
    }
    first = false;
    rows.push_back(split_fields(line));
  }
  return rows;
}

}  // namespace

std::string format_scalar(Scalar v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_scalar failed");
  return std::string(buf, ptr);
}

void write_partial_matrix_csv(const std::filesystem::path& path, const PartialMatrix& m) {
  auto out = open_out(path);
  const Index n = m.n();
  for (Index j = 0; j < n; ++j) out << (j ? "," : "") << "c" << j;
  out << "\n";
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (j) out << ",";
      if (m.mask(i, j))
        out << format_scalar(m.values(i, j));
      else
        out << "NA";
    }
    out << "\n";
  }
}

PartialMatrix read_partial_matrix_csv(const std::filesystem::path& path) {
  auto rows = read_csv_rows(path, true);
  const Index n = static_cast<Index>(rows.size());
  if (n == 0) throw std::runtime_error("empty matrix file: " + path.string());
  PartialMatrix m(n);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[i].size()) != n)
      throw std::runtime_error(path.string() + ": row " + std::to_string(i) +
                               " has " + std::to_string(rows[i].size()) +
                               " fields, expected " + std::to_string(n));
    for (Index j = 0; j < n; ++j) {
      const std::string& f = rows[i][j];
      if (f == "NA") continue;
      Scalar v;
      if (!parse_scalar(f, v))
        throw std::runtime_error(path.string() + ": bad field '" + f + "'");
      m.set(i, j, v);
    }
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_out(path);
  for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << "c" << j;
  out << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ",";
      out << format_scalar(m(i, j));
    }
    out << "\n";
  }
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  auto rows = read_csv_rows(path, true);
  if (rows.empty()) throw std::runtime_error("empty matrix file: " + path.string());
  const Index r = static_cast<Index>(rows.size());
  const Index c = static_cast<Index>(rows[0].size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(rows[i].size()) != c)
      throw std::runtime_error(path.string() + ": ragged rows");
    for (Index j = 0; j < c; ++j) {
      Scalar v;
      if (!parse_scalar(rows[i][j], v))
        throw std::runtime_error(path.string() + ": bad field '" + rows[i][j] + "'");
      m(i, j) = v;
    }
  }
  return m;
}

void write_partition_csv(const std::filesystem::path& path, const Partition& p,
                         const std::vector<std::string>& ids) {
  if (static_cast<Index>(ids.size()) != p.size())
    throw std::invalid_argument("write_partition_csv: id count mismatch");
  auto out = open_out(path);
  out << "task_id,cluster_id\n";
  for (Index i = 0; i < p.size(); ++i)
    out << ids[i] << "," << p.assignments[i] << "\n";
}

Partition read_partition_csv(const std::filesystem::path& path,
                             std::vector<std::string>* ids) {
  auto rows = read_csv_rows(path, true);
  std::vector<int> assignments;
  int max_id = -1;
  for (const auto& row : rows) {
    if (row.size() != 2) throw std::runtime_error(path.string() + ": expected 2 fields");
    if (ids) ids->push_back(row[0]);
    int a = std::stoi(row[1]);
    assignments.push_back(a);
    max_id = std::max(max_id, a);
  }
  return Partition(std::move(assignments), max_id + 1);
}

void write_diagnostics_json(const std::filesystem::path& path, const CompletionResult& r) {
  json j;
  j["residual"] = r.residual;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["objective"] = r.objective;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_tasks_jsonl(const std::filesystem::path& path, const std::vector<Task>& tasks) {
  auto out = open_out(path);
  for (const auto& task : tasks) {
    auto emit = [&](const std::vector<LabeledExample>& split, const char* name) {
      for (const auto& ex : split) {
        json j;
        j["task_id"] = task.id;
        j["split"] = name;
        j["label"] = ex.label;
        j["features"] = std::vector<Scalar>(ex.features.data(),
                                            ex.features.data() + ex.features.size());
        out << j.dump() << "\n";
      }
    };
    emit(task.train, "train");
    emit(task.valid, "valid");
    emit(task.test, "test");
  }
}

std::vector<Task> read_tasks_jsonl(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Task> tasks;
  std::map<std::string, size_t> index_by_id;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": invalid JSON");
    const std::string id = j.at("task_id").get<std::string>();
    const std::string split = j.at("split").get<std::string>();
    LabeledExample ex;
    ex.label = j.at("label").get<int>();
    const auto feats = j.at("features").get<std::vector<Scalar>>();
    ex.features = Eigen::Map<const Vector>(feats.data(), static_cast<Index>(feats.size()));

    auto it = index_by_id.find(id);
    if (it == index_by_id.end()) {
      it = index_by_id.emplace(id, tasks.size()).first;
      tasks.emplace_back();
      tasks.back().id = id;
    }
    Task& task = tasks[it->second];
    if (split == "train")
      task.train.push_back(std::move(ex));
    else if (split == "valid")
      task.valid.push_back(std::move(ex));
    else if (split == "test")
      task.test.push_back(std::move(ex));
    else
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": unknown split '" + split + "'");
  }
  for (auto& task : tasks) finalize_task(task);
  return tasks;
}

}  // namespace robusttc
