#pragma once

// JSON serialization of model parameters and fits, plus the TSV/CSV
// result writers shared by the CLI.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlis/baselines.hpp"
#include "rlis/em.hpp"
#include "rlis/model.hpp"
#include "rlis/replicability.hpp"

namespace rlis {

inline nlohmann::json to_json(const StepDensity& f) {
  return nlohmann::json{{"breakpoints", f.breakpoints()}, {"heights", f.heights()}};
}

inline StepDensity step_density_from_json(const nlohmann::json& j) {
  return StepDensity(j.at("breakpoints").get<std::vector<double>>(),
                     j.at("heights").get<std::vector<double>>());
}

inline nlohmann::json to_json(const HmmParams& p) {
  nlohmann::json a = nlohmann::json::array();
  for (int k = 0; k < kNumStates; ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (int l = 0; l < kNumStates; ++l) row.push_back(p.a(k, l));
    a.push_back(row);
  }
  return nlohmann::json{{"pi", p.pi.pi},
                        {"A", a},
                        {"f1", to_json(p.f1)},
                        {"f2", to_json(p.f2)}};
}

inline HmmParams params_from_json(const nlohmann::json& j) {
  HmmParams p;
  const auto pi = j.at("pi").get<std::vector<double>>();
  const auto a = j.at("A").get<std::vector<std::vector<double>>>();
  if (pi.size() != kNumStates || a.size() != kNumStates)
    throw input_error("params JSON: pi and A must have four states");
  Vec4 pv;
  Mat4 av;
  for (int k = 0; k < kNumStates; ++k) {
    pv[k] = pi[static_cast<std::size_t>(k)];
    if (a[static_cast<std::size_t>(k)].size() != kNumStates)
      throw input_error("params JSON: A rows must have four entries");
    for (int l = 0; l < kNumStates; ++l)
      av[k][l] = a[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
  }
  p.pi = StationaryDist(pv);
  p.a = TransitionMatrix(av);
  p.f1 = step_density_from_json(j.at("f1"));
  p.f2 = step_density_from_json(j.at("f2"));
  return p;
}

inline nlohmann::json to_json(const EmFit& fit) {
  nlohmann::json j = to_json(fit.params);
  j["trace"] = fit.log_likelihood_trace;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations_used;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw input_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_params_json(const std::string& path, const HmmParams& p) {
  write_text_file(path, to_json(p).dump(2) + "\n");
}

inline HmmParams read_params_json(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw input_error("params JSON parse error in " + path + ": " + e.what());
  }
  try {
    return params_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw input_error("params JSON schema error in " + path + ": " + e.what());
  }
}

namespace detail {

// TSV floats carry six significant digits; full precision lives in JSON.
inline std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return buf;
}

inline std::string feature_id(const PairedPValues& d, std::size_t j) {
  if (!d.ids.empty()) return d.ids[j];
  return "feature_" + std::to_string(j + 1);
}

}  // namespace detail

inline std::string test_outcome_tsv(const PairedPValues& data,
                                    const TestOutcome& outcome) {
  std::string out = "feature_id\tp1\tp2\trlis\trejected\n";
  std::vector<char> rej(data.size(), 0);
  for (std::size_t j : outcome.rejected) rej[j] = 1;
  for (std::size_t j = 0; j < data.size(); ++j) {
    out += detail::feature_id(data, j);
    out += '\t';
    out += detail::fmt6(data.y1[j]);
    out += '\t';
    out += detail::fmt6(data.y2[j]);
    out += '\t';
    out += detail::fmt6(outcome.rlis[j]);
    out += '\t';
    out += rej[j] ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline nlohmann::json test_outcome_sidecar(const TestOutcome& outcome) {
  nlohmann::json j{{"q", outcome.nominal_q},
                   {"num_rejected", outcome.rejected.size()},
                   {"estimated_fdp", outcome.estimated_fdp}};
  if (outcome.threshold)
    j["threshold"] = *outcome.threshold;
  else
    j["threshold"] = nullptr;
  return j;
}

inline std::string baseline_tsv(const PairedPValues& data,
                                const BaselineOutcome& outcome) {
  std::string out = "feature_id\tp1\tp2\tstatistic\trejected\tmethod\n";
  std::vector<char> rej(data.size(), 0);
  for (std::size_t j : outcome.rejected) rej[j] = 1;
  const char* name = baseline_name(outcome.method);
  for (std::size_t j = 0; j < data.size(); ++j) {
    out += detail::feature_id(data, j);
    out += '\t';
    out += detail::fmt6(data.y1[j]);
    out += '\t';
    out += detail::fmt6(data.y2[j]);
    out += '\t';
    out += detail::fmt6(outcome.statistic[j]);
    out += '\t';
    out += rej[j] ? '1' : '0';
    out += '\t';
    out += name;
    out += '\n';
  }
  return out;
}

}  // namespace rlis
