#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>

#include <json.hpp>

#include "commands.hpp"
#include "mipeaks/info_bounds.hpp"
#include "mipeaks/trace_io.hpp"

namespace mipeaks::cli {
namespace {

bounds::Range parse_range(const std::string& s, const char* flag) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoul(s);
      return {v, v};
    }
    return {std::stoul(s.substr(0, dots)), std::stoul(s.substr(dots + 2))};
  } catch (...) {
    throw ConfigError(std::string(flag) + " expects a..b, got '" + s + "'");
  }
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

int run_bounds(const BoundsArgs& args) {
  bounds::VerifyOptions opt;
  bounds::VerifyReport report;
  try {
    opt.trials = args.trials;
    opt.seed = args.seed;
    opt.y_card = parse_range(args.y_card, "--y-card");
    opt.steps = parse_range(args.steps, "--t");
    opt.h_card = parse_range(args.h_card, "--h-card");
    opt.predictors_per_trial = args.predictors;
    opt.corrupt_upper_bound = args.zero_upper_bound;
    report = bounds::verify_bounds_random(opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }

  nlohmann::json j;
  j["options"] = {{"trials", opt.trials},
                  {"seed", opt.seed},
                  {"y_card", {opt.y_card.lo, opt.y_card.hi}},
                  {"t", {opt.steps.lo, opt.steps.hi}},
                  {"h_card", {opt.h_card.lo, opt.h_card.hi}},
                  {"predictors_per_trial", opt.predictors_per_trial},
                  {"tolerance", opt.tolerance},
                  {"debug_zero_upper_bound", opt.corrupt_upper_bound}};
  j["trials"] = report.trials;
  j["fano_lower_bound"] = {{"checks", report.fano_checks},
                           {"violations", report.fano_violations},
                           {"inapplicable", report.fano_inapplicable},
                           {"worst_slack", finite_or_null(report.worst_fano_slack)}};
  j["error_upper_bound_bits"] = {{"checks", report.upper_checks},
                                 {"violations", report.upper_violations},
                                 {"worst_slack", finite_or_null(report.worst_upper_slack)}};
  j["chain_rule"] = {{"checks", report.chain_checks},
                     {"violations", report.chain_violations},
                     {"worst_residual", report.worst_chain_residual}};
  j["data_processing"] = {{"checks", report.dpi_checks},
                          {"violations", report.dpi_violations},
                          {"worst_slack", finite_or_null(report.worst_dpi_slack)}};
  j["violations"] = report.violations();
  j["passed"] = report.passed();

  try {
    std::filesystem::create_directories(args.out);
    io::write_file_text(std::filesystem::path(args.out) / "bounds_report.json", j.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  std::cout << "trials " << report.trials << ", violations " << report.violations() << " (fano "
            << report.fano_violations << ", upper " << report.upper_violations << ", chain " << report.chain_violations
            << ", dpi " << report.dpi_violations << ")\n";
  return report.passed() ? kOk : kBoundViolation;
}

}  // namespace mipeaks::cli
