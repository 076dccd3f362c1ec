// SPDX-License-Identifier: Apache-2.0
#include "chansr/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "chansr/error.hpp"

namespace chansr::report {

namespace fs = std::filesystem;
using nlohmann::json;
using model::kNumRegressionTasks;
using model::kNumTasks;
using model::Task;

namespace {

constexpr std::array<const char*, kNumRegressionTasks> kTargetKeys = {"PL", "Rp", "DS",
                                                                       "phi", "theta"};

json metrics_json(const eval::MetricsReport& r) {
  json j;
  j["model_id"] = r.model_id;
  j["scale"] = r.scale;
  j["sample_count"] = r.sample_count;
  j["cell_count"] = r.cell_count;
  json t = json::object();
  for (std::size_t i = 0; i < kTargetKeys.size(); ++i) {
    t[kTargetKeys[i]] = {{"mae", r.targets[i].mae}, {"stde", r.targets[i].stde}};
  }
  j["targets"] = t;
  j["accuracy"] = r.accuracy;
  return j;
}

eval::MetricsReport metrics_from(const json& j) {
  eval::MetricsReport r;
  r.model_id = j.at("model_id").get<std::string>();
  r.scale = j.at("scale").get<int>();
  r.sample_count = j.at("sample_count").get<std::size_t>();
  r.cell_count = j.at("cell_count").get<std::size_t>();
  for (std::size_t i = 0; i < kTargetKeys.size(); ++i) {
    const auto& t = j.at("targets").at(kTargetKeys[i]);
    r.targets[i].mae = t.at("mae").get<double>();
    r.targets[i].stde = t.at("stde").get<double>();
  }
  r.accuracy = j.at("accuracy").get<double>();
  return r;
}

template <typename F>
auto parse_or_throw(std::string_view line, F&& f) {
  try {
    return f(json::parse(line));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report line: ") + e.what());
  }
}

std::string fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string pad(std::string s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ')
              : std::string(width - s.size(), ' ') + s;
}

std::string grid_text(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      line += pad(row[c], widths[c], c == 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string metrics_to_json(const eval::MetricsReport& r) { return metrics_json(r).dump(); }

eval::MetricsReport metrics_from_json(std::string_view line) {
  return parse_or_throw(line, [](const json& j) { return metrics_from(j); });
}

std::string epoch_to_json(const train::EpochRecord& r) {
  json j;
  j["stage"] = std::string(train::to_string(r.stage));
  j["epoch"] = r.epoch;
  j["steps"] = r.steps;
  json loss = json::object();
  json sigma = json::object();
  for (Task t : model::kAllTasks) {
    const auto i = static_cast<std::size_t>(model::idx(t));
    loss[std::string(model::task_name(t))] = r.train_loss[i];
    sigma[std::string(model::task_name(t))] = r.sigma[i];
  }
  j["train_loss"] = loss;
  j["objective"] = r.objective;
  j["sigma"] = sigma;
  j["test"] = r.test ? metrics_json(*r.test) : json(nullptr);
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

train::EpochRecord epoch_from_json(std::string_view line) {
  return parse_or_throw(line, [](const json& j) {
    train::EpochRecord r;
    r.stage = train::stage_from_string(j.at("stage").get<std::string>());
    r.epoch = j.at("epoch").get<int>();
    r.steps = j.at("steps").get<std::uint64_t>();
    for (Task t : model::kAllTasks) {
      const auto i = static_cast<std::size_t>(model::idx(t));
      r.train_loss[i] = j.at("train_loss").at(std::string(model::task_name(t))).get<double>();
      r.sigma[i] = j.at("sigma").at(std::string(model::task_name(t))).get<double>();
    }
    r.objective = j.at("objective").get<double>();
    if (!j.at("test").is_null()) r.test = metrics_from(j.at("test"));
    r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
  });
}

std::string metrics_table(const std::vector<eval::MetricsReport>& reports) {
  const std::vector<std::string> header = {"Model",   "Scale",     "PL (dB)",
                                           "Rp (dB)", "DS (ns)",   "phi (deg)",
                                           "theta (deg)", "LOS/NLOS (%)"};
  std::string out;
  for (const char* block : {"MAE", "STDE"}) {
    const bool mae = std::string(block) == "MAE";
    std::vector<std::vector<std::string>> rows{header};
    for (const auto& r : reports) {
      std::vector<std::string> row{r.model_id, "x" + std::to_string(r.scale)};
      for (const auto& t : r.targets) row.push_back(fixed(mae ? t.mae : t.stde, 2));
      row.push_back(mae ? fixed(100.0 * r.accuracy, 2) : "-");
      rows.push_back(std::move(row));
    }
    if (!out.empty()) out += '\n';
    out += std::string(block) + '\n' + grid_text(rows);
  }
  return out;
}

std::string ablation_table(const eval::AblationTable& table) {
  std::vector<std::vector<std::string>> rows{
      {"Variant", "Seeds", "PL MAE (dB)", "MAE gain", "PL STDE (dB)", "STDE gain"}};
  auto gain = [](const std::optional<double>& g) {
    if (!g) return std::string("-");
    return (*g >= 0 ? "+" : "") + fixed(100.0 * *g, 1) + "%";
  };
  for (const auto& row : table.rows) {
    rows.push_back({std::string(eval::to_string(row.variant)), std::to_string(row.runs.size()),
                    fixed(row.median_mae, 3), gain(row.gain_mae), fixed(row.median_stde, 3),
                    gain(row.gain_stde)});
  }
  return "Ablation (x" + std::to_string(table.scale) + ", medians over seeds)\n" +
         grid_text(rows);
}

std::string ablation_jsonl(const eval::AblationTable& table) {
  std::string out;
  for (const auto& row : table.rows) {
    for (const auto& run : row.runs) {
      json j;
      j["kind"] = "run";
      j["variant"] = std::string(eval::to_string(run.variant));
      j["seed"] = run.seed;
      j["metrics"] = metrics_json(run.report);
      out += j.dump() + '\n';
    }
  }
  for (const auto& row : table.rows) {
    json j;
    j["kind"] = "summary";
    j["variant"] = std::string(eval::to_string(row.variant));
    j["scale"] = table.scale;
    j["seeds"] = row.runs.size();
    j["median_pl_mae"] = row.median_mae;
    j["median_pl_stde"] = row.median_stde;
    j["gain_mae"] = row.gain_mae ? json(*row.gain_mae) : json(nullptr);
    j["gain_stde"] = row.gain_stde ? json(*row.gain_stde) : json(nullptr);
    out += j.dump() + '\n';
  }
  return out;
}

ReportFiles emit_report(const std::vector<eval::MetricsReport>& reports,
                        const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  ReportFiles files{dir / (stem + ".jsonl"), dir / (stem + ".txt")};
  std::string jsonl;
  for (const auto& r : reports) jsonl += metrics_to_json(r) + '\n';
  write_text(files.jsonl, jsonl);
  write_text(files.text, metrics_table(reports));
  return files;
}

ReportFiles emit_ablation(const eval::AblationTable& table, const fs::path& dir,
                          const std::string& stem) {
  fs::create_directories(dir);
  ReportFiles files{dir / (stem + ".jsonl"), dir / (stem + ".txt")};
  write_text(files.jsonl, ablation_jsonl(table));
  write_text(files.text, ablation_table(table));
  return files;
}

void write_train_log(const fs::path& path, const train::TrainLog& log) {
  std::string text;
  for (const auto& r : log.records) text += epoch_to_json(r) + '\n';
  write_text(path, text);
}

train::TrainLog read_train_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  train::TrainLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) log.records.push_back(epoch_from_json(line));
  }
  return log;
}

void append_line(const fs::path& path, std::string_view line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << line << '\n';
}

}  // namespace chansr::report
