#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "mipeaks/hsic.hpp"
#include "mipeaks/trace_io.hpp"
#include "mipeaks/trajectory.hpp"

namespace mipeaks::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

KernelConfig kernel_from_flag(const std::string& sigma) {
  KernelConfig k;
  if (sigma == "auto") {
    k.mode = BandwidthMode::grid_search;
  } else if (sigma == "median") {
    k.mode = BandwidthMode::median_heuristic;
  } else {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(sigma, &used);
    } catch (...) {
      used = 0;
    }
    if (used != sigma.size() || !(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("--sigma must be auto, median or a positive number, got '" + sigma + "'");
    }
    k.mode = BandwidthMode::explicit_value;
    k.bandwidth = v;
  }
  k.validate();
  return k;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json report_json(const PeakReport& r) {
  json j;
  j["peaks"] = r.indices;
  j["num_peaks"] = r.indices.size();
  j["steps"] = r.length;
  j["ratio"] = r.ratio;
  j["q1"] = r.q1;
  j["median"] = r.median;
  j["q3"] = r.q3;
  j["iqr"] = r.iqr;
  j["threshold"] = r.threshold;
  j["mean"] = r.mean;
  j["std"] = r.std;
  j["aom"] = number_or_null(r.aom);
  j["degenerate"] = r.degenerate;
  if (r.intervals) {
    j["intervals"] = {{"max", r.intervals->max}, {"min", r.intervals->min}, {"avg", r.intervals->avg}};
  } else {
    j["intervals"] = nullptr;
  }
  return j;
}

std::string fmt(double v, int prec = 4) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string gfmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Row {
  std::string label;
  double steps = 0, peaks = 0, ratio = 0;
  std::optional<double> max_int, min_int, avg_int;
  double mean = 0, std = 0, aom = 0;
};

Row row_of(const std::string& label, const PeakReport& r) {
  Row row{label, static_cast<double>(r.length), static_cast<double>(r.indices.size()), r.ratio, {}, {}, {},
          r.mean, r.std, r.aom};
  if (r.intervals) {
    row.max_int = r.intervals->max;
    row.min_int = r.intervals->min;
    row.avg_int = r.intervals->avg;
  }
  return row;
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v, 2) : "-"; }

void print_table(const std::vector<Row>& rows) {
  std::printf("%-28s %8s %7s %8s %9s %9s %9s %12s %12s %9s\n", "trace", "steps", "peaks", "ratio", "max_int",
              "min_int", "avg_int", "mean", "std", "aom");
  for (const auto& r : rows) {
    std::printf("%-28s %8s %7s %8s %9s %9s %9s %12s %12s %9s\n", r.label.c_str(), fmt(r.steps, 2).c_str(),
                fmt(r.peaks, 2).c_str(), fmt(r.ratio, 4).c_str(), opt_fmt(r.max_int).c_str(),
                opt_fmt(r.min_int).c_str(), opt_fmt(r.avg_int).c_str(), gfmt(r.mean).c_str(),
                gfmt(r.std).c_str(), fmt(r.aom, 3).c_str());
  }
}

// Arithmetic mean over per-trace rows; intervals average over traces that have them.
Row average_row(const std::vector<Row>& rows) {
  Row avg;
  avg.label = "average";
  double n = static_cast<double>(rows.size());
  double iv_n = 0, mx = 0, mn = 0, av = 0;
  for (const auto& r : rows) {
    avg.steps += r.steps / n;
    avg.peaks += r.peaks / n;
    avg.ratio += r.ratio / n;
    avg.mean += r.mean / n;
    avg.std += r.std / n;
    avg.aom += r.aom / n;
    if (r.max_int) {
      ++iv_n;
      mx += *r.max_int;
      mn += *r.min_int;
      av += *r.avg_int;
    }
  }
  if (iv_n > 0) {
    avg.max_int = mx / iv_n;
    avg.min_int = mn / iv_n;
    avg.avg_int = av / iv_n;
  }
  return avg;
}

json row_json(const Row& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"label", r.label},  {"steps", r.steps},          {"num_peaks", r.peaks},
          {"ratio", r.ratio},  {"max_interval", opt(r.max_int)}, {"min_interval", opt(r.min_int)},
          {"avg_interval", opt(r.avg_int)}, {"mean", r.mean}, {"std", r.std}, {"aom", number_or_null(r.aom)}};
}

std::string histogram_csv(const std::vector<TokenFrequency>& rows,
                          const std::optional<std::vector<std::string>>& names) {
  std::string out = "token_id,token,count,frequency\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string name = names && r.token_id < names->size() ? (*names)[r.token_id] : "";
    for (char& c : name) {
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    }
    std::snprintf(buf, sizeof buf, "%u,%s,%zu,%.9g\n", r.token_id, name.c_str(), r.count, r.frequency);
    out += buf;
  }
  return out;
}

}  // namespace

int run_analyze(const AnalyzeArgs& args) {
  // Everything is computed before the output directory is touched, so a
  // failing input leaves no partial outputs behind.
  std::vector<RepresentationTrace> traces;
  KernelConfig kernel;
  PeakConfig peak_config;
  try {
    kernel = kernel_from_flag(args.sigma);
    peak_config.tau = args.tau;
    peak_config.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  for (const auto& path : args.inputs) {
    try {
      traces.push_back(io::read_trace(path));
      if (!args.pooling.empty()) traces.back().gold_pooling = parse_gold_pooling(args.pooling);
    } catch (const Error& e) {
      std::cerr << "error: trace '" << path << "': " << e.what() << "\n";
      return kInputError;
    }
  }

  TrajectoryParams params;
  params.n_min = args.n_min;
  params.window = args.window;
  params.threads = args.threads;

  struct Output {
    std::string file;
    std::string text;
  };
  std::vector<Output> outputs;
  std::vector<Row> rows;
  json summary;
  summary["mode"] = args.mode;
  summary["tau"] = args.tau;
  summary["sigma_flag"] = args.sigma;
  summary["inputs"] = args.inputs;

  if (args.mode == "batch") {
    MiSequence mi;
    try {
      mi = mi_trajectory(traces, kernel, MiMode::batch_anchored, params);
    } catch (const InsufficientData& e) {
      std::cerr << "error: batch of " << traces.size() << " traces: " << e.what() << "\n";
      return kInsufficientData;
    } catch (const Error& e) {
      std::cerr << "error: batch of " << traces.size() << " traces: " << e.what() << "\n";
      return kInputError;
    }
    const PeakReport rep = detect_peaks(mi.values, peak_config);
    outputs.push_back({"mi_batch.csv", io::mi_csv(mi, rep)});
    rows.push_back(row_of("batch", rep));
    json b = report_json(rep);
    b["sigma"] = mi.sigma;
    b["coverage"] = mi.coverage;
    summary["batch"] = b;

    bool have_ids = true;
    for (const auto& t : traces) have_ids = have_ids && t.token_ids.has_value();
    if (have_ids) {
      std::vector<PeakReport> reports(traces.size(), rep);
      for (std::size_t i = 0; i < traces.size(); ++i) {
        auto& idx = reports[i].indices;
        std::erase_if(idx, [&](std::size_t t) { return t >= traces[i].length(); });
      }
      const auto hist = peak_token_histogram(traces, reports, args.top_k);
      outputs.push_back({"peak_tokens.csv", histogram_csv(hist, traces.front().token_strings)});
    }
  } else {
    json per = json::array();
    std::vector<PeakReport> reports;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const std::string& path = args.inputs[i];
      MiSequence mi;
      try {
        mi = mi_trajectory(std::span(&traces[i], 1), kernel, MiMode::single_trace, params);
      } catch (const InsufficientData& e) {
        std::cerr << "error: trace '" << path << "': " << e.what() << "\n";
        return kInsufficientData;
      } catch (const Error& e) {
        std::cerr << "error: trace '" << path << "': " << e.what() << "\n";
        return kInputError;
      }
      const PeakReport rep = detect_peaks(mi.values, peak_config);
      const std::string stem = fs::path(path).stem().string();
      char name[32];
      std::snprintf(name, sizeof name, "mi_%03zu_", i);
      outputs.push_back({std::string(name) + stem + ".csv", io::mi_csv(mi, rep)});
      rows.push_back(row_of(stem, rep));
      json r = report_json(rep);
      r["trace"] = path;
      r["sigma"] = mi.sigma;
      per.push_back(r);
      reports.push_back(rep);
    }
    summary["traces"] = per;
    if (rows.size() > 1) {
      rows.push_back(average_row(rows));
      summary["average"] = row_json(rows.back());
    }
    bool have_ids = true;
    for (const auto& t : traces) have_ids = have_ids && t.token_ids.has_value();
    if (have_ids) {
      const auto hist = peak_token_histogram(traces, reports, args.top_k);
      outputs.push_back({"peak_tokens.csv", histogram_csv(hist, traces.front().token_strings)});
    }
  }
  json table = json::array();
  for (const auto& r : rows) table.push_back(row_json(r));
  summary["table"] = table;
  outputs.push_back({"summary.json", summary.dump(2) + "\n"});

  try {
    fs::create_directories(args.out);
    for (const auto& o : outputs) io::write_file_text(fs::path(args.out) / o.file, o.text);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  print_table(rows);
  return kOk;
}

}  // namespace mipeaks::cli
